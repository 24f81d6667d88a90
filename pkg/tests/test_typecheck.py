import pytest

from qunity import syntax as S
from qunity.expand import expand_text
from qunity.typecheck import (
    MIXED, PROG, PURE, ErasureFailure, NotOrthogonal, NotSpanning, QunityTypeError, check_iso,
    check_ortho, check_spanning, infer, infer_pure_expr, is_classical, iter_derivations,
    show_derivation, validate,
)

BIT = S.BIT


def typed(text):
    return infer(expand_text(text))


def test_closed_pure_expression():
    d = typed("had 0")
    assert d.kind == PURE and d.type == BIT


def test_measurement_is_mixed():
    d = typed("had 0 |> meas[Bit]")
    assert d.kind == MIXED and d.type == BIT


def test_discarding_abstraction_is_a_channel():
    d = typed("lambda (x, y) : Bit * Bit -> x")
    assert d.kind == PROG and d.type == S.Channel(S.TProd(BIT, BIT), BIT)


def test_reversible_abstraction_is_coherent():
    d = typed("lambda (x, y) : Bit * Bit -> (y, x)")
    assert d.type == S.Coherent(S.TProd(BIT, BIT), S.TProd(BIT, BIT))


def test_sharing_a_variable_is_pure():
    d = typed("lambda x : Bit -> (x, x)")
    assert isinstance(d.type, S.Coherent)


def test_relevance_unused_quantum_variable():
    x = expand_text("0")
    with pytest.raises(QunityTypeError):
        infer_pure_expr((), (("x", BIT),), x)


def test_type_mismatch_names_rule():
    with pytest.raises(QunityTypeError) as info:
        typed("(0, 0) |> had")
    assert "T-" in str(info.value)


def test_ctrl_requires_orthogonal_patterns():
    with pytest.raises(NotOrthogonal):
        typed("lambda x : Bit -> ctrl x : Bit {0 -> (x, 0) | 0 -> (x, 1)} : Bit * Bit")


def test_ctrl_with_erasure():
    d = typed("lambda x : Bit -> ctrl x : Bit {0 -> (x, 0) | 1 -> (x, 1)} : Bit * Bit")
    assert isinstance(d.type, S.Coherent)


def test_ctrl_branch_must_use_controlled_variable():
    with pytest.raises(QunityTypeError):
        typed("lambda x : Bit -> ctrl x : Bit {0 -> 0 | 1 -> 1} : Bit")


def test_ctrl_erasure_failure():
    with pytest.raises(ErasureFailure):
        typed("lambda x : Bit -> ctrl x : Bit {0 -> (had x, 0) | 1 -> (x, 1)} : Bit * Bit")


def test_ortho_and_spanning():
    zero, one = expand_text("0"), expand_text("1")
    check_spanning(BIT, [zero, one])
    cert = check_ortho(BIT, [one])
    assert cert.patterns == (one,)
    with pytest.raises(NotSpanning):
        check_spanning(BIT, [one])


def test_spanning_by_variable():
    check_spanning(S.TProd(BIT, BIT), [S.EVar("x")])


def test_pair_patterns_split_on_first_component():
    pats = [expand_text(t) for t in ["(0, x)", "(1, 0)", "(1, 1)"]]
    check_spanning(S.TProd(BIT, BIT), pats)


def test_try_catch_types():
    d = typed("try (1 |> (lambda 0 : Bit -> 1)) catch 0")
    assert d.kind == MIXED and d.type == BIT


def test_every_derivation_revalidates():
    d = typed("lambda x : Bit -> ctrl x : Bit {0 -> (x, 0) | 1 -> (x, 1)} : Bit * Bit")
    validate(d)
    rules = {n.rule for n in iter_derivations(d)}
    assert "TCtrl" in rules and "TPureAbs" in rules


def test_show_derivation_is_a_tree():
    text = show_derivation(typed("had 0"))
    lines = text.splitlines()
    assert lines[0].startswith("TPureApp") and lines[1].startswith("  ")


def test_is_classical():
    assert is_classical(expand_text("(x, x)"))
    assert not is_classical(expand_text("had 0"))
    assert is_classical(expand_text("try 0 catch 1"))


def test_iso_rejects_match_sugar():
    # The pattern of the expanded abstraction is a ctrl expression, not a spanning list.
    assert not check_iso(expand_text("match[Bit, Bit] {0 -> 1 | 1 -> 0}"))


def test_iso_accepts_total_programs_only():
    assert check_iso(expand_text("lambda (x, y) : Bit * Bit -> (y, x)"))
    assert not check_iso(expand_text("lambda 0 : Bit -> 1"))
    assert check_iso(expand_text("try (lambda 0 : Bit -> 1) 1 catch 0"))
