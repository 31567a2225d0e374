import itertools
import json
from dataclasses import dataclass

import pytest

import oracle
from conftest import concrete_files
from peepre import terms as T
from peepre.driver import (STALLED, WEAKEST, InferConfig, _ClauseTable, _cnfs_of_size, _partitions,
                           concrete_examples, generalize, generalize_with_values, infer, search)
from peepre.dsl import load, parse_predicate
from peepre.examples import Label
from peepre.verify import ExhaustiveBackend, Valid, Weakest

VALID = "%a = add %x, C1\n%r = sub %a, C1\n=>\n%r = %x"


def test_infer_reaches_weakest_at_width_4(mul_udiv):
    report = infer(mul_udiv, InferConfig(widths=(4,)))
    assert report.status == WEAKEST
    got, acc, pos = oracle.check_weakest_equality(mul_udiv, report.weakest, (4,))[0]
    assert acc == pos
    backend = ExhaustiveBackend((4,))
    assert backend.check_refinement(mul_udiv, report.weakest, reject_trivial=True) == Valid()
    assert backend.check_weakest(mul_udiv, report.weakest) == Weakest()
    for p, frac in report.partials:
        assert backend.check_refinement(mul_udiv, p) == Valid()
        assert 0 <= frac <= 1


def test_unconditionally_valid_rewrite_gives_true():
    opt = load(VALID)
    assert infer(opt, InferConfig(widths=(4,))).weakest == T.TRUE
    report = search(opt, InferConfig(widths=(4,)))
    assert (report.status, report.weakest) == (WEAKEST, T.TRUE)
    assert report.stats.candidates_tested == 1


def test_infer_is_deterministic(mul_udiv):
    a = infer(mul_udiv, InferConfig(widths=(4,), seed=3)).to_json()
    b = infer(mul_udiv, InferConfig(widths=(4,), seed=3)).to_json()
    a["stats"].pop("elapsed")
    b["stats"].pop("elapsed")
    assert a == b


def test_report_json(mul_udiv):
    report = infer(mul_udiv, InferConfig(widths=(4,)))
    data = json.loads(json.dumps(report.to_json()))
    assert set(data) == {"status", "weakest", "partials", "stats", "message"}
    keys = oracle.all_valuations([4, 4])
    assert oracle.accept_set(mul_udiv, (4,), parse_predicate(data["weakest"]), keys) == \
        oracle.accept_set(mul_udiv, (4,), report.weakest, keys)
    assert data["stats"]["outer_iterations"] >= 1


def test_search_on_single_predicate_rewrite():
    opt = load("%m = mul nsw %X, C1\n%r = sdiv %m, C1\n=>\n%r = %X")
    s = search(opt, InferConfig(widths=(4,)))
    i = infer(opt, InferConfig(widths=(4,)))
    assert s.status == i.status == WEAKEST
    keys = oracle.all_valuations([4])
    assert oracle.accept_set(opt, (4,), s.weakest, keys) == oracle.accept_set(opt, (4,), i.weakest, keys)


def test_search_budget_stalls(mul_udiv):
    report = search(mul_udiv, InferConfig(widths=(4,), search_budget=10))
    assert report.status == STALLED
    assert report.stats.candidates_tested == 11


def test_config_validation():
    with pytest.raises(ValueError):
        InferConfig(widths=())
    with pytest.raises(ValueError):
        InferConfig(K=0)
    with pytest.raises(ValueError):
        InferConfig(timeout=0)


@dataclass
class _Weighted:
    term: object
    weight: int


class _StubEnumerator:
    def __init__(self, weights):
        self.weights = weights

    def replay(self):
        return iter(_Weighted(f"a{i}", w) for i, w in enumerate(self.weights))


WEIGHTS = [2, 2, 3, 4]


def _all_literals():
    return [(i, neg) for i in range(len(WEIGHTS)) for neg in (False, True)]


def _brute_clauses(size):
    out = set()
    lits = _all_literals()
    for r in range(1, len(lits) + 1):
        for combo in itertools.combinations(lits, r):
            if sum(WEIGHTS[i] for i, _ in combo) == size:
                out.add(frozenset(combo))
    return out


def _as_set(clause):
    return frozenset((l.atom, l.negated) for l in clause)


@pytest.mark.parametrize("size", range(2, 9))
def test_clause_table_matches_brute_force(size):
    table = _ClauseTable(_StubEnumerator(WEIGHTS))
    pool = table.clauses(size)
    got, i = [], 0
    while pool.has(i):
        got.append(pool[i])
        i += 1
    assert len({_as_set(c) for c in got}) == len(got)
    assert {_as_set(c) for c in got} == _brute_clauses(size)
    tops = [max(2 * l.atom + l.negated for l in c) for c in got]
    assert tops == sorted(tops)


@pytest.mark.parametrize("size", range(2, 9))
def test_cnfs_match_brute_force(size):
    table = _ClauseTable(_StubEnumerator(WEIGHTS))
    got = [frozenset(_as_set(c) for c in cnf) for cnf in _cnfs_of_size(table, size) if cnf is not None]
    assert len(set(got)) == len(got)
    clauses = [c for k in range(2, size + 1) for c in _brute_clauses(k)]
    weight = {c: sum(WEIGHTS[i] for i, _ in c) for c in clauses}
    want = set()
    for r in range(1, size // 2 + 1):
        for combo in itertools.combinations(clauses, r):
            if sum(weight[c] for c in combo) != size:
                continue
            if any(a <= b for a in combo for b in combo if a is not b):
                continue
            want.add(frozenset(combo))
    assert set(got) == want


def test_partitions_order():
    assert list(_partitions(8, 8)) == [(2, 2, 2, 2), (3, 3, 2), (4, 2, 2), (4, 4), (5, 3), (6, 2), (8,)]
    assert list(_partitions(0, 0)) == [()]
    assert list(_partitions(3, 3)) == [(3,)]


def test_generalize_renames_source_literals():
    g = generalize_with_values(load("%a = and %x, 7\n%r = and %a, 3\n=>\n%r = and %x, 3"))
    assert g.opt.consts == ["C1", "C2"]
    assert g.values == (7, 3)
    # the target literal 3 matches the second source literal
    target = g.opt.nodes[g.opt.target["%r"]]
    assert g.opt.nodes[target.args[1]].name == "C2"


def test_generalize_keeps_unmatched_target_literals():
    opt = generalize(load("%a = add %x, 1\n%r = sub %a, 1\n=>\n%r = add %x, 5"))
    assert opt.consts == ["C1", "C2"]
    target = opt.nodes[opt.target["%r"]]
    assert [type(opt.nodes[a]).__name__ for a in target.args] == ["Input", "Literal"]


def test_generalize_rejects_symbolic_input(mul_udiv):
    with pytest.raises(ValueError):
        generalize(mul_udiv)


@pytest.mark.parametrize("path", concrete_files(), ids=lambda p: p.name)
def test_generalized_rewrite_admits_original_valuation(path):
    g = generalize_with_values(load(path.read_text()))
    backend = ExhaustiveBackend((4, 8))
    for e in backend.classify_examples(g.opt, concrete_examples(g, (4, 8))):
        assert e.label is Label.POSITIVE
