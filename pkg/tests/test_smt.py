import random

import pytest

import oracle
from gen import random_pred
from peepre.dsl import parse_predicate as P
from peepre.examples import Example, Label
from peepre.smt import SmtBackend, solver_available
from peepre.verify import CounterExample, ExhaustiveBackend, MissedPositive, Valid, Weakest

pytestmark = pytest.mark.skipif(not solver_available(), reason="no SMT solver installed")


@pytest.fixture(scope="module")
def smt():
    backend = SmtBackend(widths=(4,))
    yield backend
    backend.close()


def _exact(keys):
    if not keys:
        return P("false")
    return P(" || ".join(f"(C1 == {a} && C2 == {b})" for a, b in sorted(keys)))


def test_counterexample_is_negative(smt, mul_udiv):
    ce = smt.check_refinement(mul_udiv, P("true"))
    assert isinstance(ce, CounterExample)
    label = oracle.labels(mul_udiv, (4,))[ce.example.values]
    # a counterexample under ``true`` may also be a trivial valuation whose target is unsafe
    assert label in ("negative", "trivial")
    assert smt.check_refinement(mul_udiv, P("C1 != 0 && C1 u>= C2 && C2 /u C1 != 0")) == Valid()
    ce = smt.check_refinement(mul_udiv, P("C1 u>= C2 && C2 /u C1 != 0"))
    assert ce.reason == "precondition is unsafe"


def test_weakest_and_witnesses(smt, mul_udiv):
    missed = smt.check_weakest(mul_udiv, P("C1 == C2"))
    assert isinstance(missed, MissedPositive)
    assert oracle.labels(mul_udiv, (4,))[missed.example.values] == "positive"
    positives = {k for k, v in oracle.labels(mul_udiv, (4,)).items() if v == "positive"}
    assert smt.check_weakest(mul_udiv, _exact(positives)) == Weakest()
    assert smt.weaker_than(mul_udiv, P("true"), P("C1 != 0")).values[0] == 0
    assert smt.weaker_than(mul_udiv, P("C1 u< C2"), P("C1 u< C2")) is None


def test_classification_matches_exhaustive(smt, mul_udiv):
    examples = [Example((4,), (a, b)) for a, b in [(2, 4), (4, 2), (3, 0), (0, 1), (1, 1)]]
    want = ExhaustiveBackend((4,)).classify_examples(mul_udiv, examples)
    assert [e.label for e in smt.classify_examples(mul_udiv, examples)] == [e.label for e in want]
    found = smt.find_examples(mul_udiv, (4,), Label.POSITIVE, 3)
    assert len(found) == 3
    assert all(oracle.labels(mul_udiv, (4,))[e.values] == "positive" for e in found)


def test_predicate_encoding_matches_evaluator(smt, mul_udiv):
    rng = random.Random(11)
    keys = oracle.all_valuations([4, 4])
    for _ in range(25):
        p = random_pred(rng, 2)
        accepted = _exact(oracle.accept_set(mul_udiv, (4,), p, keys))
        assert smt.weaker_than(mul_udiv, p, accepted) is None
        assert smt.weaker_than(mul_udiv, accepted, p) is None
