"""Predicate matrix and the example-driven precondition learner."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import boolsynth as B
from . import bv
from . import terms as T
from .dsl import Optimization, check_predicate_types
from .examples import Example, const_widths
from .semantics import ACCEPT, REJECT, UNSAFE, env_for, eval_predicate

# vector order: accept < reject < unsafe
_ORDER = {int(ACCEPT): 0, int(REJECT): 1, int(UNSAFE): 2}


class InadmissiblePredicate(ValueError):
    """The predicate is Unsafe on some positive example."""


class LearnerStalled(Exception):
    """No separating predicate was found within the enumeration cap."""

    def __init__(self, msg, partials=(), predicates=()):
        super().__init__(msg)
        self.partials = list(partials)
        self.predicates = list(predicates)


class LearnerTimeout(Exception):
    """The wall-clock deadline passed while enumerating."""


class ExampleEvaluator:
    """Evaluates predicates over a fixed list of examples, reusing per-assignment environments."""

    def __init__(self, opt: Optimization, examples):
        self.opt = opt
        self.size = len(examples)
        groups = {}
        for i, e in enumerate(examples):
            groups.setdefault(e.assignment, []).append(i)
        self._groups = []
        for a, idx in groups.items():
            widths = const_widths(opt, a)
            values = {c: bv.asarray(np.asarray([examples[i].values[j] for i in idx], dtype=object), w)
                      for j, (c, w) in enumerate(zip(opt.consts, widths))}
            self._groups.append((np.asarray(idx), env_for(opt, a, values)))

    def __call__(self, pred) -> np.ndarray:
        out = np.zeros(self.size, dtype=np.int8)
        for idx, env in self._groups:
            out[idx] = np.broadcast_to(eval_predicate(pred, env), idx.shape)
        return out


@dataclass
class Sample:
    positives: list               # example ids
    negatives: list
    vector: tuple


@dataclass
class RelaxSchedule:
    full_until: int = 2000        # candidates demanding full separation
    first_ratio: float = 0.75
    second_after: int = 10000
    second_ratio: float = 0.6
    cap: int = 200_000            # candidates before the learner stalls

    def ratio(self, n: int) -> float:
        if n < self.full_until:
            return 1.0
        return self.first_ratio if n < self.second_after else self.second_ratio


class PredicateMatrix:
    """Learned predicates, their results on every example, and the resulting vectors."""

    def __init__(self, opt: Optimization, positives, negatives):
        self.opt = opt
        self.examples = list(positives) + list(negatives)
        self.is_pos = np.array([True] * len(positives) + [False] * len(negatives), dtype=bool)
        self.evaluator = ExampleEvaluator(opt, self.examples)
        self.predicates = []
        self.columns = []
        self._rows = [()] * len(self.examples)

    @property
    def n(self) -> int:
        return len(self.predicates)

    def vector_of(self, i: int) -> tuple:
        return self._rows[i]

    def add_predicate(self, pred, column=None) -> None:
        col = self.evaluator(pred) if column is None else column
        if np.any(col[self.is_pos] == UNSAFE):
            raise InadmissiblePredicate(f"{T.show(pred)} is unsafe on a positive example")
        self.predicates.append(pred)
        self.columns.append(col)
        self._rows = [r + (int(c),) for r, c in zip(self._rows, col)]

    def registry(self) -> dict:
        """vector -> (positive ids, negative ids), in first-occurrence order."""
        reg = {}
        for i, v in enumerate(self._rows):
            pos, neg = reg.setdefault(v, ([], []))
            (pos if self.is_pos[i] else neg).append(i)
        return reg

    def mixed_vectors(self) -> list:
        reg = self.registry()
        mixed = [v for v, (p, n) in reg.items() if p and n]
        return sorted(mixed, key=lambda v: (-(len(reg[v][0]) + len(reg[v][1])),
                                            tuple(_ORDER[x] for x in v)))

    def weighted_partition(self):
        """Pure-positive vectors with their example counts, and every vector holding a negative."""
        weighted, negatives = [], []
        for v, (p, n) in self.registry().items():
            if n:
                negatives.append(v)
            else:
                weighted.append((v, len(p)))
        return weighted, negatives

    def sample_mixed(self, v: tuple, cap: int = 16, seed: int = 0) -> Sample:
        pos, neg = self.registry().get(v, ([], []))
        if not pos or not neg:
            raise ValueError("vector is not mixed")
        if len(pos) + len(neg) <= cap:
            return Sample(list(pos), list(neg), v)
        half = cap // 2
        kp, kn = min(len(pos), half), min(len(neg), half)
        # hand unused room to the larger class
        kp = min(len(pos), cap - kn)
        kn = min(len(neg), cap - kp)
        rng = np.random.default_rng(seed)
        ps = sorted(rng.choice(pos, size=max(kp, 1), replace=False).tolist())
        ns = sorted(rng.choice(neg, size=max(kn, 1), replace=False).tolist())
        return Sample(ps, ns, v)


def separates(codes_pos, codes_neg, ratio: float = 1.0) -> bool:
    """Either orientation classifies at least ``ratio`` of the sample correctly.

    Unsafe never counts as correct on a positive; it is always correct on a negative.
    """
    total = len(codes_pos) + len(codes_neg)
    direct = np.count_nonzero(codes_pos == ACCEPT) + np.count_nonzero(codes_neg != ACCEPT)
    flipped = np.count_nonzero(codes_pos == REJECT) + np.count_nonzero(codes_neg != REJECT)
    if ratio >= 1.0:
        return direct == total or flipped == total
    # a relaxed predicate must still split the sample
    splits = len(np.unique(np.concatenate([codes_pos, codes_neg]))) > 1
    return splits and max(direct, flipped) >= ratio * total


@dataclass
class LearnStats:
    candidates: int = 0
    learned: int = 0


def learn_predicate(matrix: PredicateMatrix, sample: Sample, enumerator, schedule: RelaxSchedule,
                    stats: LearnStats | None = None, deadline: float | None = None):
    """First enumerated predicate separating the sample that is safe on every positive."""
    sub = ExampleEvaluator(matrix.opt, [matrix.examples[i] for i in sample.positives + sample.negatives])
    npos = len(sample.positives)
    all_pos = [i for i in range(len(matrix.examples)) if matrix.is_pos[i]]
    for n, wp in enumerate(enumerator.replay()):
        if n >= schedule.cap:
            break
        if deadline is not None and n % 256 == 0 and time.monotonic() > deadline:
            raise LearnerTimeout("deadline passed during predicate enumeration")
        if stats is not None:
            stats.candidates += 1
        codes = sub(wp.term)
        if np.any(codes[:npos] == UNSAFE):
            continue
        if not separates(codes[:npos], codes[npos:], schedule.ratio(n)):
            continue
        col = matrix.evaluator(wp.term)
        if np.any(col[all_pos] == UNSAFE):
            continue
        return wp.term, col
    raise LearnerStalled(f"no separating predicate among {schedule.cap} candidates")


@dataclass
class LearnerConfig:
    sample_cap: int = 16
    relax: RelaxSchedule = field(default_factory=RelaxSchedule)
    K: int = 1
    restarts: int = 3
    seed: int = 0
    deadline: float | None = None     # time.monotonic() value


@dataclass
class LearnerOutput:
    partials: list                # CNF formulas as terms
    full: object                  # term, or None
    predicates: list
    matrix: PredicateMatrix | None = None
    stats: LearnStats = field(default_factory=LearnStats)


def preconditions_by_examples(opt: Optimization, positives, negatives, initial=(), config=None,
                              enumerator=None) -> LearnerOutput:
    """Grow the predicate matrix until no vector is mixed, emitting partial formulas on the way."""
    from .predenum import Enumerator

    config = config or LearnerConfig()
    positives, negatives = list(positives), list(negatives)
    if not positives and not negatives:
        raise ValueError("no examples to learn from")
    if not negatives:
        return LearnerOutput([], T.TRUE, [])
    if not positives:
        return LearnerOutput([], T.FALSE, [])
    enumerator = enumerator or Enumerator(opt)
    matrix = PredicateMatrix(opt, positives, negatives)
    stats = LearnStats()
    for p in initial:
        check_predicate_types(opt, p)
        if p in matrix.predicates:
            continue
        try:
            matrix.add_predicate(p)
        except InadmissiblePredicate:
            continue
    partials, seen = [], set()
    rounds = 0
    while True:
        mixed = matrix.mixed_vectors()
        if not mixed:
            break
        weighted, neg_vectors = matrix.weighted_partition()
        if weighted:
            cnf = B.learn_partial_restarts(matrix.n, weighted, neg_vectors, config.K, config.restarts)
            if cnf is not None and B.accepted_weight(cnf, weighted) > 0:
                term = B.to_term(cnf, matrix.predicates)
                if term not in seen:
                    seen.add(term)
                    partials.append(term)
        sample = matrix.sample_mixed(mixed[0], config.sample_cap, config.seed + rounds)
        rounds += 1
        try:
            pred, col = learn_predicate(matrix, sample, enumerator, config.relax, stats, config.deadline)
        except LearnerStalled as exc:
            raise LearnerStalled(str(exc), partials, matrix.predicates) from None
        matrix.add_predicate(pred, col)
        stats.learned += 1
    weighted, neg_vectors = matrix.weighted_partition()
    cnf = B.learn_complete(matrix.n, [v for v, _ in weighted], neg_vectors)
    full = None if cnf is None else B.to_term(cnf, matrix.predicates)
    return LearnerOutput(partials, full, list(matrix.predicates), matrix, stats)
