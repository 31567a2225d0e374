import numpy as np
import pytest

import oracle
from peepre import terms as T
from peepre.dsl import parse_predicate
from peepre.examples import Example, Label
from peepre.learner import (InadmissiblePredicate, LearnerConfig, LearnerStalled, PredicateMatrix,
                            RelaxSchedule, Sample, learn_predicate, preconditions_by_examples,
                            separates)
from peepre.predenum import Enumerator
from peepre.semantics import ACCEPT, REJECT, UNSAFE
from peepre.verify import ExhaustiveBackend


def ex(*values):
    return Example((4,), values)


def test_vectors_after_one_predicate(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(2, 4), ex(1, 3)], [ex(0, 1), ex(4, 2)])
    assert m.mixed_vectors() == [()]
    m.add_predicate(parse_predicate("C1 u< C2"))
    assert [m.vector_of(i) for i in range(4)] == [(1,), (1,), (1,), (0,)]
    assert m.mixed_vectors() == [(1,)]
    assert m.registry() == {(1,): ([0, 1], [2]), (0,): ([], [3])}


def test_division_predicate_is_unsafe_on_zero_divisor(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(2, 4)], [ex(0, 1), ex(4, 2)])
    m.add_predicate(parse_predicate("C1 u< C2"))
    m.add_predicate(parse_predicate("C2 /u C1 == 0"))
    assert m.vector_of(1) == (ACCEPT, UNSAFE)
    assert m.mixed_vectors() == []


def test_unsafe_on_positive_is_inadmissible(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(0, 1)], [ex(4, 2)])
    with pytest.raises(InadmissiblePredicate):
        m.add_predicate(parse_predicate("C2 /u C1 == 0"))
    assert m.n == 0


def test_weighted_partition(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(2, 4), ex(1, 3), ex(4, 1)], [ex(0, 1)])
    m.add_predicate(parse_predicate("C1 u< C2"))
    # (1,) holds two positives and a negative, so it counts against the learner
    assert m.weighted_partition() == ([((0,), 1)], [(1,)])


def test_sample_keeps_small_populations(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(1, 1), ex(2, 2)], [ex(0, 1), ex(0, 2), ex(0, 3)])
    s = m.sample_mixed((), cap=16)
    assert (s.positives, s.negatives) == ([0, 1], [2, 3, 4])


def test_sample_caps_and_splits_evenly(mul_udiv):
    pos = [ex(a, b) for a in range(1, 16) for b in range(1, 16)][:100]
    neg = [ex(0, b) for b in range(16)] + [ex(a, 0) for a in range(1, 16)]
    neg += [ex(a, b) for a in range(1, 16) for b in range(1, 16)][100:169]
    m = PredicateMatrix(mul_udiv, pos, neg)
    s = m.sample_mixed((), cap=16, seed=3)
    assert len(s.positives) == 8 and len(s.negatives) == 8
    assert all(i < 100 for i in s.positives) and all(i >= 100 for i in s.negatives)
    assert m.sample_mixed((), cap=16, seed=3) == s


def test_sample_needs_mixed_vector(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(1, 1)], [])
    with pytest.raises(ValueError):
        m.sample_mixed(())


def test_separation_orientations():
    pos, neg = np.array([REJECT], dtype=np.int8), np.array([ACCEPT], dtype=np.int8)
    assert separates(pos, neg)
    assert separates(np.array([ACCEPT]), np.array([UNSAFE]))
    assert not separates(np.array([UNSAFE]), np.array([ACCEPT]))
    assert not separates(np.array([ACCEPT, REJECT]), np.array([ACCEPT]))
    assert separates(np.array([ACCEPT, ACCEPT, ACCEPT, REJECT]), np.array([REJECT]), ratio=0.75)
    assert not separates(np.array([ACCEPT, ACCEPT]), np.array([ACCEPT, ACCEPT]), ratio=0.5)


def test_relax_schedule():
    r = RelaxSchedule()
    assert (r.ratio(0), r.ratio(1999), r.ratio(2000), r.ratio(9999), r.ratio(10000)) == (1, 1, .75, .75, .6)


def test_first_separator_uses_negated_orientation(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(4, 2)], [ex(0, 1)])
    pred, col = learn_predicate(m, Sample([0], [1], ()), Enumerator(mul_udiv), RelaxSchedule())
    assert pred == parse_predicate("C1 u< C2")
    assert col.tolist() == [REJECT, ACCEPT]


def test_candidates_unsafe_on_positives_are_skipped(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(0, 1)], [ex(4, 2)])
    pred, col = learn_predicate(m, Sample([0], [1], ()), Enumerator(mul_udiv), RelaxSchedule())
    assert col[0] != UNSAFE


def test_learner_stalls_at_cap(mul_udiv):
    m = PredicateMatrix(mul_udiv, [ex(2, 4)], [ex(4, 2)])
    with pytest.raises(LearnerStalled):
        learn_predicate(m, Sample([0], [1], ()), Enumerator(mul_udiv), RelaxSchedule(cap=1))


def test_trivial_example_sets(mul_udiv):
    assert preconditions_by_examples(mul_udiv, [ex(1, 1)], []).full == T.TRUE
    assert preconditions_by_examples(mul_udiv, [], [ex(1, 1)]).full == T.FALSE
    with pytest.raises(ValueError):
        preconditions_by_examples(mul_udiv, [], [])


def test_full_formula_matches_positive_set(mul_udiv):
    universe = ExhaustiveBackend((4,)).labelled_universe(mul_udiv, (4,))
    pos = [e for e in universe if e.label is Label.POSITIVE]
    neg = [e for e in universe if e.label is not Label.POSITIVE]
    out = preconditions_by_examples(mul_udiv, pos, neg, config=LearnerConfig(seed=1))
    keys = [e.values for e in universe]
    assert oracle.accept_set(mul_udiv, (4,), out.full, keys) == {e.values for e in pos}
    assert out.matrix.mixed_vectors() == []
    assert out.stats.learned == len(out.predicates)


def test_initial_predicates_are_used(mul_udiv):
    universe = ExhaustiveBackend((4,)).labelled_universe(mul_udiv, (4,))
    pos = [e for e in universe if e.label is Label.POSITIVE]
    neg = [e for e in universe if e.label is not Label.POSITIVE]
    hint = parse_predicate("C2 %u C1 == 0")
    out = preconditions_by_examples(mul_udiv, pos, neg, initial=[hint, hint])
    assert out.predicates[0] == hint
    assert out.predicates.count(hint) == 1


def test_partials_reject_every_negative(mul_udiv):
    universe = ExhaustiveBackend((4,)).labelled_universe(mul_udiv, (4,))
    pos = [e for e in universe if e.label is Label.POSITIVE]
    neg = [e for e in universe if e.label is not Label.POSITIVE]
    out = preconditions_by_examples(mul_udiv, pos, neg, config=LearnerConfig(seed=2))
    for p in out.partials:
        accepted = oracle.accept_set(mul_udiv, (4,), p, [e.values for e in universe])
        assert accepted <= {e.values for e in pos}
        assert accepted
