import base64
import json
import os

import numpy as np
import pytest

from gramfuzz.harness import CoverageSink, TargetSpec, execute
from gramfuzz.targets import minijs, plist_xml

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

MINIJS = TargetSpec("in_process", name="toy-minijs")
PLIST = TargetSpec("in_process", name="toy-xml")

MANGLED_PLIST = b"""<?xmn="1.0" encoding="UTF-8"?>
<plist version="1.0">
<dict>
\t<key>Some ASCII string</key>
\t<string></string>
\t<data>
\t</data>
</t>"""


def _stages_hit(mod, data):
    sink = CoverageSink()
    by_id = {bid: mod.STAGES[name] for name, bid in mod.BLOCKS.items()}
    try:
        mod.run(data, sink)
    except Exception:
        pass
    return {by_id[b] for b in sink.trace}


def test_block_inventories_match_fixtures():
    for mod, fname in ((minijs, "minijs_blocks.json"), (plist_xml, "plist_blocks.json")):
        with open(os.path.join(FIXTURES, fname)) as f:
            frozen = json.load(f)
        current = {n: {"id": b, "stage": mod.STAGES[n]} for n, b in mod.BLOCKS.items()}
        assert current == frozen


def test_block_counts():
    assert len(minijs.BLOCKS) >= 80
    assert len(plist_xml.BLOCKS) >= 40


def test_block_ids_unique():
    ids = list(minijs.BLOCKS.values()) + list(plist_xml.BLOCKS.values())
    assert len(ids) == len(set(ids))


def test_minijs_stage_gating():
    assert _stages_hit(minijs, b"var x=(") == {"parse"}
    assert _stages_hit(minijs, b"print(nope);") == {"parse", "check"}
    assert _stages_hit(minijs, b"print(1);") == {"parse", "check", "eval"}


def test_plist_stage_gating():
    assert _stages_hit(plist_xml, b"<a><b></a>") == {"parse"}
    assert _stages_hit(plist_xml, b"<notplist></notplist>") == {"parse", "check"}
    doc = b"<plist><integer>7</integer></plist>"
    assert _stages_hit(plist_xml, doc) == {"parse", "check", "eval"}


def test_mangled_plist_stops_in_parse_stage():
    assert _stages_hit(plist_xml, MANGLED_PLIST) == {"parse"}


def test_minijs_planted_crash_needs_all_three_calls():
    crash = b'match("abcdef");tail();setin("pq");print(tail());'
    r = execute(MINIJS, crash)
    assert (r.status, r.crash_token) == ("crash", "tail-underflow")
    for benign in (
        b'match("abcdef");tail();',
        b'setin("pq");print(tail());',
        b'setin("pq");match("abcdef");tail();',  # match resyncs
        b'match("abcdef");setin("abcdef");tail();',  # same length
        b'match("ab");setin("abcdef");print(tail());',  # longer subject
    ):
        r = execute(MINIJS, benign)
        assert r.status == "ok", benign


def test_minijs_crash_execution_is_contained():
    crash = b'match("abc");setin("");tail();'
    r = execute(MINIJS, crash)
    assert r.status == "crash"
    r2 = execute(MINIJS, b'print("after");')
    assert r2.status == "ok"


def test_minijs_hang_detection_is_deterministic():
    loop = b"var x=0;while(x<99999999){x=x+1;}"
    a = execute(MINIJS, loop)
    b = execute(MINIJS, loop)
    assert a.status == b.status == "hang"
    assert a.exec_micros >= MINIJS.timeout_ms * 1000
    assert np.array_equal(a.cov, b.cov)


def test_minijs_syntax_error_inputs_are_ok_status():
    for bad in (b"@@@", b"var", b'"unterminated', b"/* open", b"((((((", b"{" * 200):
        r = execute(MINIJS, bad)
        assert r.status == "ok", bad


def test_minijs_runtime_errors_are_graceful():
    for prog in (
        b"print(1/0);",
        b"print(1%0);",
        b'print("a"+1);',
        b'print(chr(999));',
        b'print(num("xy"));',
        b'print(ord(""));',
        b'print(sub("abc",0-5,99));',
        b'if(1>2){var q=1;}print(q);',
        b'var s="ab";while(1<2){s=s+s;}',
    ):
        r = execute(MINIJS, prog)
        assert r.status in ("ok", "hang"), prog


def test_minijs_deep_expression_is_rejected_not_crashed():
    r = execute(MINIJS, b"print(" + b"(" * 500 + b"1" + b")" * 500 + b");")
    assert r.status == "ok"


def test_plist_planted_crash_at_magic_decoded_length():
    payload = base64.b64encode(b"A" * 31)
    doc = b"<plist><data>" + payload + b"</data></plist>"
    r = execute(PLIST, doc)
    assert (r.status, r.crash_token) == ("crash", "data-len-31")
    for n in (30, 32, 0, 1):
        doc = b"<plist><data>" + base64.b64encode(b"A" * n) + b"</data></plist>"
        assert execute(PLIST, doc).status == "ok", n


def test_plist_valid_documents_reach_eval():
    docs = [
        b'<?xml version="1.0"?><plist version="1.0"><dict><key>k</key><string>v</string></dict></plist>',
        b"<plist><array><integer>-3</integer><real>1.5</real><true></true></array></plist>",
        b"<plist><date>2024-01-15</date></plist>",
        b"<plist><string>a &amp; b</string></plist>",
    ]
    for doc in docs:
        assert _stages_hit(plist_xml, doc) == {"parse", "check", "eval"}


def test_plist_schema_violations_stop_in_check():
    docs = [
        b"<plist><dict><integer>1</integer></dict></plist>",  # value without key
        b"<plist><bogus></bogus></plist>",
        b"<plist><true>x</true></plist>",
        b"<plist></plist>",
        b"<plist><integer>1</integer><integer>2</integer></plist>",
    ]
    for doc in docs:
        assert _stages_hit(plist_xml, doc) == {"parse", "check"}, doc


def test_plist_interp_errors_are_graceful():
    docs = [
        b"<plist><integer>12x</integer></plist>",
        b"<plist><real>no</real></plist>",
        b"<plist><date>soon</date></plist>",
        b"<plist><data>!!not-base64!!</data></plist>",
        b"<plist><data>abc</data></plist>",
        b"<plist><string>a &bogus; b</string></plist>",
    ]
    for doc in docs:
        assert execute(PLIST, doc).status == "ok", doc


def test_coverage_map_reflects_trace():
    r = execute(MINIJS, b"print(1);")
    assert r.status == "ok"
    assert np.count_nonzero(r.cov) > 10
    r2 = execute(MINIJS, b"print(1);")
    assert np.array_equal(r.cov, r2.cov)


def test_deeper_inputs_cover_strictly_more_edges():
    parse_only = execute(MINIJS, b"var x=(").cov
    full = execute(MINIJS, b"var x=1;print(x);").cov
    parse_edges = set(np.flatnonzero(parse_only))
    full_edges = set(np.flatnonzero(full))
    assert len(full_edges) > len(parse_edges)
