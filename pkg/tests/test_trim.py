"""Trimming tests with hand-traced outcomes."""

from gramfuzz.trim import builtin_trim, tree_trim


class CountingOracle:
    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, data):
        self.calls += 1
        return self.fn(data)


def test_builtin_trim_hand_traced():
    # signature: does the input still contain "CC"
    oracle = CountingOracle(lambda d: b"CC" in d)
    out = builtin_trim(b"AAAABBBBCCCCDDDD", oracle)
    # 4-byte chunks: drop AAAA, drop BBBB, keep CCCC, drop DDDD
    assert out.trimmed == b"CCCC"
    assert out.bytes_removed == 12
    assert out.executions_used == 4
    assert out.mode == "builtin"
    assert out.still_parses is None
    assert oracle.calls == out.executions_used + 1  # plus the baseline


def test_builtin_trim_nothing_removable():
    oracle = CountingOracle(lambda d: b"MAGIC" in d)
    out = builtin_trim(b"MAGIC", oracle)
    assert out.trimmed == b"MAGIC"
    assert out.bytes_removed == 0
    assert out.executions_used == 2  # one 4-byte chunk, one 1-byte tail


def test_builtin_trim_never_empties():
    out = builtin_trim(b"abcd", lambda d: True)
    assert out.trimmed == b"abcd"  # only candidate would be empty
    assert out.executions_used == 0


def test_builtin_trim_large_input_shrinks_fast():
    data = b"x" * 4096 + b"NEEDLE" + b"y" * 4096
    out = builtin_trim(data, lambda d: b"NEEDLE" in d)
    assert b"NEEDLE" in out.trimmed
    assert len(out.trimmed) < 64
    # chunked removal beats byte-at-a-time by orders of magnitude
    assert out.executions_used < 600


def test_builtin_trim_reports_parse_state(plist):
    out = builtin_trim(b"AAAABBBBCCCCDDDD", lambda d: b"CC" in d, plist)
    assert out.still_parses is False
    # an oracle that rejects every removal leaves the valid doc intact
    out = builtin_trim(b"<a>hi</a>", lambda d: d, plist)
    assert out.trimmed == b"<a>hi</a>"
    assert out.still_parses is True


def test_tree_trim_hand_traced(plist):
    oracle = CountingOracle(lambda d: b"hello" in d)
    out = tree_trim(b"<a><b></b>hello</a>", plist, oracle)
    assert out.trimmed == b"<a>hello</a>"
    assert out.bytes_removed == 7
    assert out.mode == "tree"
    assert out.still_parses is True
    # reject items-spanning-both, accept <b></b>, then reject the two
    # hello-holding nodes on the final pass; zero-span nodes cost nothing
    assert out.executions_used == 4


def test_tree_trim_permissive_oracle_keeps_valid_doc(plist):
    out = tree_trim(b"<a>t</a>", plist, lambda d: True)
    assert out.trimmed == b"<a></a>"
    assert out.executions_used == 1
    assert out.still_parses is True


def test_tree_trim_drops_junk_statement(minijs):
    data = b'junkvar = 1; match("abc"); print(tail());'
    sig = lambda d: (b"match" in d, b"tail" in d)
    out = tree_trim(data, minijs, sig)
    assert b"junkvar" not in out.trimmed
    assert sig(out.trimmed) == sig(data)
    assert out.still_parses is True
    assert len(out.trimmed) < len(data)


def test_tree_trim_fallback_on_parse_error(plist):
    oracle = CountingOracle(lambda d: b"X" in d)
    out = tree_trim(b"<<<X", plist, oracle)
    assert out.mode == "builtin_fallback"
    assert b"X" in out.trimmed
    assert out.still_parses is False


def test_tree_trim_counts_exclude_baseline(minijs):
    oracle = CountingOracle(lambda d: b"1" in d)
    out = tree_trim(b"x = 1;", minijs, oracle)
    assert oracle.calls == out.executions_used + 1
