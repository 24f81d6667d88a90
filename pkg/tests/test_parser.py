import pytest

from qunity import syntax as S
from qunity.expand import ExpansionError, expand, expand_text
from qunity.parser import QunitySyntaxError, parse, parse_term, tokenize

ZERO = S.EApp(S.PLeft(S.UNIT, S.UNIT), S.EUnit())
ONE = S.EApp(S.PRight(S.UNIT, S.UNIT), S.EUnit())


def test_tokenize_recognizes_compound_operators():
    texts = [t.text for t in tokenize("Bit (x) Bit (+) () |> f := x -> y")]
    assert "(x)" in texts and "(+)" in texts and "|>" in texts and ":=" in texts and "->" in texts


def test_comments_are_skipped():
    prog = parse("// a comment\nmain := 0 // trailing\n")
    assert expand(prog) == ZERO


def test_bits_are_injections_of_unit():
    assert expand_text("0") == ZERO
    assert expand_text("1") == ONE


def test_bit_power_has_trailing_unit():
    assert expand_text("Bit^2") == S.TProd(S.BIT, S.TProd(S.BIT, S.UNIT))
    assert expand_text("Bit^0") == S.UNIT


def test_tuples_nest_to_the_right():
    assert expand_text("(0, 1, 0)") == S.EPair(ZERO, S.EPair(ONE, ZERO))


def test_pipe_is_application():
    assert expand_text("0 |> had") == expand_text("had 0")


def test_plus_state_is_hadamard_of_zero():
    e = expand_text("plus")
    assert isinstance(e, S.EApp) and isinstance(e.prog, S.PU3) and e.arg == ZERO


def test_rational_angle_literal():
    f = expand_text("u3(1234567/1000000, 0, pi)")
    assert S.eval_real(f.theta) == pytest.approx(1.234567, abs=1e-15)


def test_real_function_constants():
    f = expand_text("u3(2 * arccos(1 / sqrt(2)), -pi, euler)")
    assert S.eval_real(f.theta) == pytest.approx(1.5707963267948966)
    assert S.eval_real(f.phi) == pytest.approx(-3.141592653589793)


def test_parametric_definitions_unfold():
    src = """
    def rep(0) := ()
    def rep(n+1) := (0, rep(n))
    main := rep(2)
    """
    assert expand(parse(src)) == S.EPair(ZERO, S.EPair(ZERO, S.EUnit()))


def test_definitions_take_term_arguments():
    src = """
    def twice(f) := lambda x : Bit -> x |> f |> f
    main := twice(had)
    """
    f = expand(parse(src))
    assert isinstance(f, S.PAbs) and f.dtype == S.BIT


def test_main_text_is_recorded():
    prog = parse("def a := 0\nmain := a |> had\n")
    assert prog.entry_text.strip() == "a |> had"


def test_ctrl_syntax():
    e = expand_text("ctrl x : Bit {0 -> (x, 0) | 1 -> (x, 1)} : Bit * Bit")
    assert isinstance(e, S.ECtrl)
    assert [p for p, _ in e.branches] == [ZERO, ONE]
    assert e.rtype == S.TProd(S.BIT, S.BIT)


def test_match_sugar_is_an_abstraction():
    f = expand_text("match[Bit, Bit] {0 -> 1 | 1 -> 0}")
    assert isinstance(f, S.PAbs)


def test_let_sugar():
    e = expand_text("let x : Bit = 0 in (x, x)")
    assert isinstance(e, S.EApp) and isinstance(e.prog, S.PAbs)


def test_syntax_error_reports_position():
    with pytest.raises(QunitySyntaxError) as info:
        parse("main := (0, ")
    assert info.value.line == 1 and info.value.col > 0


def test_unknown_name_in_program_position():
    with pytest.raises(ExpansionError):
        expand_text("0 |> nosuchprogram")


def test_parse_term_round_trips_through_show():
    e = expand_text("try (0 |> had) catch 1")
    assert expand_text(S.show(e)) == e


def test_parse_term_rejects_trailing_input():
    with pytest.raises(QunitySyntaxError):
        parse_term("0 0 )")
