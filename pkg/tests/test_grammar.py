import pytest

from shellsynth.grammar import (
    MARKER,
    GrammarError,
    N,
    T,
    compute_min_depth,
    load_grammar,
    parse_grammar,
)
from shellsynth.synthesis import leftmost_nonterminal

from oracles import min_depth_bruteforce

DF_TEXT = 'args ::= "-a" | out ; out ::= "--output=" <ns> field ; field ::= "source" | "target"'


def test_df_style_grammar_parses():
    g = parse_grammar(DF_TEXT)
    assert g.nonterminals == {"args", "out", "field"}
    assert len(g.productions) == 5
    assert g.terminals == {"-a", "--output=", "source", "target"}
    assert g.productions[2].rhs == (T("--output="), MARKER, N("field"))
    assert g.start == "args"


def test_non_productive_rejected():
    with pytest.raises(GrammarError, match="non-productive"):
        parse_grammar("x ::= x")


def test_empty_input_rejected():
    with pytest.raises(GrammarError, match="no start symbol"):
        parse_grammar("")
    with pytest.raises(GrammarError, match="no start symbol"):
        parse_grammar("# only a comment\n")


def test_undefined_nonterminal_reports_location():
    with pytest.raises(GrammarError) as exc:
        parse_grammar('a ::= "x"\nb ::= "y" missing\n')
    assert exc.value.line == 2
    assert exc.value.col is not None


def test_syntax_error_reports_location():
    with pytest.raises(GrammarError) as exc:
        parse_grammar('a ::= "x\n')
    assert exc.value.line == 1


def test_terminal_length_limit():
    parse_grammar(f'a ::= "{"x" * 64}"')
    with pytest.raises(GrammarError):
        parse_grammar(f'a ::= "{"x" * 65}"')


def test_terminal_nonterminal_clash():
    with pytest.raises(GrammarError):
        parse_grammar('a ::= "b" | b\nb ::= "z"')


def test_start_directive_and_epsilon():
    g = parse_grammar('%start ls ls_args\nls_args ::= "-a" | ""\n')
    assert g.start_for("ls") == "ls_args"
    assert any(p.rhs == () for p in g.productions)
    with pytest.raises(KeyError):
        g.start_for("df")


def test_undefined_start_rejected():
    with pytest.raises(GrammarError):
        parse_grammar('%start ls nope\na ::= "x"\n')


def test_continuation_lines():
    g = parse_grammar('a ::= "x"\n    | "y"\n    | "z"\n')
    assert len(g.productions) == 3


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.grammar"
    with pytest.raises(FileNotFoundError, match="nope.grammar"):
        load_grammar(missing)


def test_min_depth_matches_bruteforce(toy):
    for nt in toy.nonterminals:
        assert toy.min_depth[nt] == min_depth_bruteforce(toy, nt), nt


def test_min_depth_small_case():
    g = parse_grammar('a ::= b c | "x" a\nb ::= "y"\nc ::= b | d\nd ::= "z" d | "w"')
    assert compute_min_depth(g.productions) == {"b": 1, "d": 1, "c": 2, "a": 3}


def test_leftmost_nonterminal_examples():
    assert leftmost_nonterminal([T("--output="), N("field")]) == "field"
    assert leftmost_nonterminal([T("-a")]) is None
    assert leftmost_nonterminal([N("out"), N("field")]) == "out"


def test_bundled_grammar_is_valid(toy):
    assert {"echo", "ls", "cat", "df"} <= set(toy.commands)
    assert toy.redirect_target == "out_file"
    assert set(toy.min_depth) == set(toy.nonterminals)
