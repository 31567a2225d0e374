import numpy as np
import pytest
from hypothesis import given, settings

from conftest import MUL_UDIV, concrete_files, suite_files
from gen import grid_env, preds
from peepre import terms as T
from peepre.dsl import (ParseError, load, parse_optimizations, parse_predicate, show_optimization,
                        structure)
from peepre.semantics import eval_predicate


def test_mul_udiv_names(mul_udiv):
    assert mul_udiv.inputs == ["%X"]
    assert mul_udiv.consts == ["C1", "C2"]
    assert mul_udiv.pre is None
    assert mul_udiv.root == "%r"


@pytest.mark.parametrize("text,message", [
    ("%m = mul nuw %X, C1\n%r = udiv %m, C2\n=>\n%r = udiv %X, C3", "undefined name C3"),
    ("%r = and nuw %X, C1\n=>\n%r = %X", "flag nuw not allowed"),
    ("%r = add %r, 1\n=>\n%r = %r", "refers to itself"),
    ("%a = add %x, 1\n%a = add %x, 2\n=>\n%a = %x", "duplicate definition"),
    ("%r = add %x, 1\n=>\n%s = %x", "does not define root"),
    ("%r = frob %x, 1\n=>\n%r = %x", "unknown identifier"),
    ("%r = add %x, C1 + 1\n=>\n%r = %x", "constant expression in source"),
    ("Pre: C2 == 0\n%r = add %x, C1\n=>\n%r = %x", "undefined name C2"),
    ("%r = add %x\n=>\n%r = %x", "takes 2 operands"),
])
def test_parse_errors(text, message):
    with pytest.raises(ParseError, match=message):
        load(text)


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        load("%r = add %x, 1\n=>\n%r = udiv %x, C9")
    assert (exc.value.line, exc.value.col) == (3, 15)


def test_single_type_has_one_assignment_per_width(mul_udiv):
    assert list(mul_udiv.types.assignments((4, 8))) == [(4,), (8,)]


def test_zext_forces_strictly_wider():
    opt = load("%a = zext %x\n%r = lshr %a, C1\n=>\n%r = 0")
    assert list(opt.types.assignments((4, 8))) == [(4, 8)]
    assert opt.types.name_widths((4, 8)) == {"%x": 4, "%a": 8, "%r": 8, "C1": 8}


def test_icmp_result_is_one_bit():
    opt = load("%r = icmp eq %x, C1\n=>\n%r = icmp eq C1, %x")
    assert opt.types.name_widths((8,))["%r"] == 1
    assert opt.types.name_widths((8,))["C1"] == 8


def test_explicit_widths_fix_types():
    opt = load("%a = zext i4 %x to i8\n%r = lshr %a, C1\n=>\n%r = 0")
    assert list(opt.types.assignments((4, 8))) == [()]
    assert opt.types.name_widths(())["C1"] == 8


def test_precondition_and_assumptions():
    opt = load("Pre: C1 != 0 && isPowerOf2(C1)\nAssume: C1 u< 4\n%r = udiv %x, C1\n=>\n%r = lshr %x, log2(C1)")
    assert opt.pre == parse_predicate("C1 != 0 && isPowerOf2(C1)")
    assert opt.assumptions == [parse_predicate("C1 u< 4")]


def test_several_rewrites_in_one_file():
    text = MUL_UDIV + "\nName: other\n%r = add %x, 0\n=>\n%r = %x\n"
    opts = parse_optimizations(text)
    assert [o.name for o in opts] == ["mul_nuw_udiv", "other"]


@pytest.mark.parametrize("path", suite_files() + concrete_files(), ids=lambda p: p.name)
def test_show_round_trip(path):
    opt = load(path.read_text())
    again = load(show_optimization(opt))
    assert structure(again) == structure(opt)


@settings(max_examples=300, deadline=None)
@given(preds)
def test_predicate_text_round_trip(p):
    back = parse_predicate(T.show(p))
    # nested connectives flatten on the first pass; after that printing is stable
    assert T.show(parse_predicate(T.show(back))) == T.show(back)
    env = grid_env()
    assert np.array_equal(np.broadcast_to(eval_predicate(back, env), (256,)),
                          np.broadcast_to(eval_predicate(p, env), (256,)))
