import pytest

from gramfuzz.grammar import GrammarError, load_grammar

MINIMAL = r"""
start := NUM ;
NUM := /[0-9]+/ ;
WS skip /[ \t\n]+/ ;
"""


def test_minimal_grammar():
    g = load_grammar(MINIMAL)
    assert len(g.rules) == 1
    assert len(g.tokens) == 2
    assert g.start_rule == "start"
    assert g.skip_classes == {"WS"}
    assert g.comment_classes == frozenset()


def test_start_directive():
    g = load_grammar("start b ;\na := NUM ;\nb := a a ;\nNUM := /[0-9]/ ;")
    assert g.start_rule == "b"


def test_first_rule_is_default_start():
    g = load_grammar("a := b ;\nb := NUM ;\nNUM := /[0-9]/ ;")
    assert g.start_rule == "a"


def test_duplicate_definition_rejected():
    with pytest.raises(GrammarError) as exc:
        load_grammar("a := NUM ;\na := NUM NUM ;\nNUM := /[0-9]/ ;")
    assert "duplicate" in str(exc.value)
    assert exc.value.line == 2


def test_undefined_symbol_rejected():
    with pytest.raises(GrammarError) as exc:
        load_grammar("a := nosuch ;\n")
    assert "nosuch" in str(exc.value)


def test_start_must_name_a_rule():
    with pytest.raises(GrammarError):
        load_grammar("start NUM ;\na := NUM ;\nNUM := /[0-9]/ ;")


def test_no_rules_rejected():
    with pytest.raises(GrammarError):
        load_grammar("NUM := /[0-9]/ ;")


def test_empty_literal_rejected():
    with pytest.raises(GrammarError):
        load_grammar('a := "" ;')


def test_empty_matching_pattern_rejected():
    with pytest.raises(GrammarError) as exc:
        load_grammar("a := NUM ;\nNUM := /[0-9]*/ ;")
    assert "empty" in str(exc.value)


@pytest.mark.parametrize(
    "pattern",
    ["a{2,3}", "^abc", "abc$", "(?:ab)", "(?P<x>a)", r"\1"],
)
def test_pattern_restrictions(pattern):
    with pytest.raises(GrammarError):
        load_grammar(f"a := T ;\nT := /{pattern}/ ;")


def test_pattern_allows_classes_and_groups():
    g = load_grammar(r"a := T ; T := /(foo|ba[rz])+x?/ ;")
    assert g.tokens[0].pattern == r"(foo|ba[rz])+x?"


def test_literals_share_one_terminal():
    g = load_grammar('a := "x" b ;\nb := "x" | "y" ;')
    assert len(g.literals) == 2
    names = [n for n, _ in g.literals]
    assert g.rules[0].alternatives[0][0] == names[0]


def test_string_escapes():
    g = load_grammar(r'a := "\x41\n" ;')
    assert g.literals[0][1] == b"A\n"


def test_comment_class_is_also_skipped():
    g = load_grammar("a := NUM ;\nNUM := /[0-9]/ ;\nLC comment /#[^\\n]*/ ;")
    assert g.comment_classes == {"LC"}
    assert "LC" in g.skip_classes


def test_rule_named_start_is_allowed():
    g = load_grammar("start := NUM ;\nNUM := /[0-9]/ ;")
    assert g.start_rule == "start"
    assert g.rules[0].name == "start"


def test_syntax_error_reports_position():
    with pytest.raises(GrammarError) as exc:
        load_grammar("a := b\n")  # missing terminator
    assert "end of grammar" in str(exc.value) or exc.value.line is not None


def test_plist_grammar_has_eight_symbols(plist):
    assert plist.symbol_count == 8


def test_minijs_grammar_loads(minijs):
    assert minijs.start_rule == "program"
    assert {"LINE_COMMENT", "BLOCK_COMMENT"} == set(minijs.comment_classes)
