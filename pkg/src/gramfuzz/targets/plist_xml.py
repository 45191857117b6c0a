"""Instrumented property-list checker.

Stage one scans tags and enforces well-formedness (balanced, name-matched
nesting).  Stage two checks the plist schema: a single <plist> root wrapping
exactly one value, dicts as key/value runs, known value kinds only.  Stage
three interprets scalar payloads: integer and real syntax, string entities,
date shape, and base64 data.  The data decoder crashes on one decoded
payload length, which takes a schema-valid document to reach.
"""

from __future__ import annotations

import base64
import binascii

from ..harness import TargetCrash

_BLOCKS: dict[str, int] = {}
_STAGES: dict[str, str] = {}


def _blk(name: str, stage: str) -> int:
    bid = 500 + len(_BLOCKS)
    _BLOCKS[name] = bid
    _STAGES[name] = stage
    return bid


X_ENTER = _blk("scan_enter", "parse")
X_DECL = _blk("scan_decl", "parse")
X_DECL_MISPLACED = _blk("scan_decl_misplaced", "parse")
X_DECL_UNCLOSED = _blk("scan_decl_unclosed", "parse")
X_OPEN = _blk("scan_open", "parse")
X_ATTRS = _blk("scan_open_with_attrs", "parse")
X_SELF_CLOSE = _blk("scan_self_close", "parse")
X_CLOSE_MATCH = _blk("scan_close_match", "parse")
X_CLOSE_MISMATCH = _blk("scan_close_mismatch", "parse")
X_CLOSE_EXTRA = _blk("scan_close_extra", "parse")
X_TAG_SYNTAX = _blk("scan_tag_syntax", "parse")
X_ANGLE_UNCLOSED = _blk("scan_angle_unclosed", "parse")
X_TEXT_CHILD = _blk("scan_text_child", "parse")
X_WS_BETWEEN = _blk("scan_ws_between", "parse")
X_TOP_TEXT = _blk("scan_top_text", "parse")
X_UNCLOSED = _blk("scan_unclosed", "parse")
X_SECOND_ROOT = _blk("scan_second_root", "parse")
X_NO_ROOT = _blk("scan_no_root", "parse")
X_OK = _blk("scan_ok", "parse")

S_ROOT_PLIST = _blk("schema_root_plist", "check")
S_ROOT_OTHER = _blk("schema_root_other", "check")
S_VERSION = _blk("schema_version_attr", "check")
S_NO_VERSION = _blk("schema_no_version", "check")
S_ONE_CHILD = _blk("schema_one_child", "check")
S_NO_CHILD = _blk("schema_no_child", "check")
S_MANY_CHILDREN = _blk("schema_many_children", "check")
S_DICT = _blk("schema_dict", "check")
S_ARRAY = _blk("schema_array", "check")
S_STRING = _blk("schema_string", "check")
S_INTEGER = _blk("schema_integer", "check")
S_REAL = _blk("schema_real", "check")
S_TRUE = _blk("schema_true", "check")
S_FALSE = _blk("schema_false", "check")
S_DATA = _blk("schema_data", "check")
S_DATE = _blk("schema_date", "check")
S_UNKNOWN_KIND = _blk("schema_unknown_kind", "check")
S_KEY_OK = _blk("schema_key_ok", "check")
S_KEY_MISSING = _blk("schema_key_missing", "check")
S_VALUE_MISSING = _blk("schema_value_missing", "check")
S_KEY_NOT_TEXT = _blk("schema_key_not_text", "check")
S_BOOL_NONEMPTY = _blk("schema_bool_nonempty", "check")
S_SCALAR_HAS_CHILD = _blk("schema_scalar_has_child", "check")
S_TOO_DEEP = _blk("schema_too_deep", "check")
S_OK = _blk("schema_ok", "check")

I_INT_OK = _blk("interp_int_ok", "eval")
I_INT_NEG = _blk("interp_int_neg", "eval")
I_INT_BAD = _blk("interp_int_bad", "eval")
I_INT_HUGE = _blk("interp_int_huge", "eval")
I_REAL_OK = _blk("interp_real_ok", "eval")
I_REAL_BAD = _blk("interp_real_bad", "eval")
I_STR_PLAIN = _blk("interp_str_plain", "eval")
I_ENT_KNOWN = _blk("interp_entity_known", "eval")
I_ENT_UNKNOWN = _blk("interp_entity_unknown", "eval")
I_AMP_BARE = _blk("interp_amp_bare", "eval")
I_DATE_OK = _blk("interp_date_ok", "eval")
I_DATE_BAD = _blk("interp_date_bad", "eval")
I_B64_EMPTY = _blk("interp_b64_empty", "eval")
I_B64_CHARSET = _blk("interp_b64_charset", "eval")
I_B64_LEN = _blk("interp_b64_len", "eval")
I_B64_BAD = _blk("interp_b64_bad", "eval")
I_DATA_OK = _blk("interp_data_ok", "eval")
I_DICT = _blk("interp_dict", "eval")
I_ARRAY = _blk("interp_array", "eval")
I_BOOL = _blk("interp_bool", "eval")
I_DONE = _blk("interp_done", "eval")

BLOCKS = dict(_BLOCKS)
STAGES = dict(_STAGES)

_VALUE_KINDS = frozenset(
    ("dict", "array", "string", "integer", "real", "true", "false", "data", "date")
)

_B64_ALPHABET = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/=")

CRASH_DATA_LEN = 31


class _Fail(Exception):
    pass


class _Elem:
    __slots__ = ("name", "attrs", "children")

    def __init__(self, name, attrs):
        self.name = name
        self.attrs = attrs
        self.children = []  # _Elem or str


def _tag_name(body):
    i = 0
    if i >= len(body) or not body[i].isalpha():
        return None, body
    while i < len(body) and body[i].isalnum():
        i += 1
    return body[:i], body[i:]


def _scan(text, hit):
    root = None
    stack: list[_Elem] = []
    i, n = 0, len(text)
    seen_tag = False

    def attach(elem):
        nonlocal root
        if stack:
            stack[-1].children.append(elem)
        elif root is None:
            root = elem
        else:
            hit(X_SECOND_ROOT)
            raise _Fail()

    while i < n:
        lt = text.find("<", i)
        if lt < 0:
            chunk = text[i:]
            i = n
        else:
            chunk = text[i:lt]
            i = lt
        if chunk:
            if chunk.strip():
                if stack:
                    hit(X_TEXT_CHILD)
                    stack[-1].children.append(chunk)
                else:
                    hit(X_TOP_TEXT)
                    raise _Fail()
            else:
                hit(X_WS_BETWEEN)
        if i >= n:
            break
        if text.startswith("<?", i):
            end = text.find("?>", i + 2)
            if end < 0:
                hit(X_DECL_UNCLOSED)
                raise _Fail()
            if seen_tag or root is not None:
                hit(X_DECL_MISPLACED)
                raise _Fail()
            hit(X_DECL)
            i = end + 2
            continue
        gt = text.find(">", i)
        if gt < 0:
            hit(X_ANGLE_UNCLOSED)
            raise _Fail()
        body = text[i + 1 : gt]
        i = gt + 1
        seen_tag = True
        if body.startswith("/"):
            name, rest = _tag_name(body[1:])
            if name is None or rest.strip():
                hit(X_TAG_SYNTAX)
                raise _Fail()
            if not stack:
                hit(X_CLOSE_EXTRA)
                raise _Fail()
            if stack[-1].name != name:
                hit(X_CLOSE_MISMATCH)
                raise _Fail()
            hit(X_CLOSE_MATCH)
            attach(stack.pop())
            continue
        name, rest = _tag_name(body)
        if name is None:
            hit(X_TAG_SYNTAX)
            raise _Fail()
        self_closing = rest.rstrip().endswith("/")
        attrs = rest.rstrip().rstrip("/").strip()
        hit(X_ATTRS if attrs else X_OPEN)
        elem = _Elem(name, attrs)
        if self_closing:
            hit(X_SELF_CLOSE)
            attach(elem)
        else:
            stack.append(elem)

    if stack:
        hit(X_UNCLOSED)
        raise _Fail()
    if root is None:
        hit(X_NO_ROOT)
        raise _Fail()
    hit(X_OK)
    return root


def _element_children(elem):
    return [c for c in elem.children if isinstance(c, _Elem)]


def _text_content(elem):
    return "".join(c for c in elem.children if isinstance(c, str))


def _check_value(elem, hit, depth):
    if depth > 32:
        hit(S_TOO_DEEP)
        raise _Fail()
    kind = elem.name
    if kind not in _VALUE_KINDS:
        hit(S_UNKNOWN_KIND)
        raise _Fail()
    if kind == "dict":
        hit(S_DICT)
        kids = _element_children(elem)
        idx = 0
        while idx < len(kids):
            if kids[idx].name != "key":
                hit(S_KEY_MISSING)
                raise _Fail()
            if _element_children(kids[idx]):
                hit(S_KEY_NOT_TEXT)
                raise _Fail()
            hit(S_KEY_OK)
            if idx + 1 >= len(kids):
                hit(S_VALUE_MISSING)
                raise _Fail()
            _check_value(kids[idx + 1], hit, depth + 1)
            idx += 2
        return
    if kind == "array":
        hit(S_ARRAY)
        for kid in _element_children(elem):
            _check_value(kid, hit, depth + 1)
        return
    if kind in ("true", "false"):
        hit(S_TRUE if kind == "true" else S_FALSE)
        if elem.children:
            hit(S_BOOL_NONEMPTY)
            raise _Fail()
        return
    hit({"string": S_STRING, "integer": S_INTEGER, "real": S_REAL,
         "data": S_DATA, "date": S_DATE}[kind])
    if _element_children(elem):
        hit(S_SCALAR_HAS_CHILD)
        raise _Fail()


def _check(root, hit):
    if root.name != "plist":
        hit(S_ROOT_OTHER)
        raise _Fail()
    hit(S_ROOT_PLIST)
    hit(S_VERSION if "version=" in root.attrs else S_NO_VERSION)
    kids = _element_children(root)
    if len(kids) == 0:
        hit(S_NO_CHILD)
        raise _Fail()
    if len(kids) > 1:
        hit(S_MANY_CHILDREN)
        raise _Fail()
    hit(S_ONE_CHILD)
    _check_value(kids[0], hit, 0)
    hit(S_OK)


def _interp_value(elem, hit):
    kind = elem.name
    if kind == "dict":
        hit(I_DICT)
        kids = _element_children(elem)
        for idx in range(1, len(kids), 2):
            _interp_value(kids[idx], hit)
        return
    if kind == "array":
        hit(I_ARRAY)
        for kid in _element_children(elem):
            _interp_value(kid, hit)
        return
    if kind in ("true", "false"):
        hit(I_BOOL)
        return
    text = _text_content(elem).strip()
    if kind == "integer":
        body = text[1:] if text.startswith(("-", "+")) else text
        # ascii check: isdigit alone admits superscripts that int() rejects
        if not (body.isascii() and body.isdigit()):
            hit(I_INT_BAD)
            raise _Fail()
        value = int(text)
        if abs(value) >= 2**63:
            hit(I_INT_HUGE)
        elif value < 0:
            hit(I_INT_NEG)
        else:
            hit(I_INT_OK)
        return
    if kind == "real":
        try:
            float(text)
        except ValueError:
            hit(I_REAL_BAD)
            raise _Fail() from None
        hit(I_REAL_OK)
        return
    if kind == "string":
        pos = 0
        plain = True
        while True:
            amp = text.find("&", pos)
            if amp < 0:
                break
            plain = False
            semi = text.find(";", amp)
            if semi < 0:
                hit(I_AMP_BARE)
                raise _Fail()
            if text[amp + 1 : semi] in ("amp", "lt", "gt", "quot", "apos"):
                hit(I_ENT_KNOWN)
            else:
                hit(I_ENT_UNKNOWN)
                raise _Fail()
            pos = semi + 1
        if plain:
            hit(I_STR_PLAIN)
        return
    if kind == "date":
        # Loose ISO shape: YYYY-MM-DD at minimum.
        ok = (
            len(text) >= 10
            and text[0:4].isdigit()
            and text[4] == "-"
            and text[5:7].isdigit()
            and text[7] == "-"
            and text[8:10].isdigit()
        )
        hit(I_DATE_OK if ok else I_DATE_BAD)
        if not ok:
            raise _Fail()
        return
    # data
    compact = "".join(text.split())
    if not compact:
        hit(I_B64_EMPTY)
        return
    if not set(compact) <= _B64_ALPHABET:
        hit(I_B64_CHARSET)
        raise _Fail()
    if len(compact) % 4 != 0:
        hit(I_B64_LEN)
        raise _Fail()
    try:
        decoded = base64.b64decode(compact, validate=True)
    except (binascii.Error, ValueError):
        hit(I_B64_BAD)
        raise _Fail() from None
    if len(decoded) == CRASH_DATA_LEN:
        raise TargetCrash("data-len-31")
    hit(I_DATA_OK)


def _interp(root, hit):
    _interp_value(_element_children(root)[0], hit)
    hit(I_DONE)


def run(data: bytes, sink) -> None:
    """Entry point: bytes in, coverage out via the sink."""
    hit = sink.hit
    hit(X_ENTER)
    text = data.decode("latin-1")
    try:
        root = _scan(text, hit)
    except _Fail:
        return
    try:
        _check(root, hit)
    except _Fail:
        return
    try:
        _interp(root, hit)
    except _Fail:
        return
