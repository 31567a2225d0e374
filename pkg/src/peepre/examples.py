"""Examples: a type assignment plus concrete values for the symbolic constants."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import bv
from .dsl import Optimization
from .semantics import ACCEPT, env_for, eval_predicate


class Label(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    TRIVIAL = "trivial"
    UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class Example:
    assignment: tuple
    values: tuple                 # unsigned values aligned with ``opt.consts``
    label: Label = field(default=Label.UNCLASSIFIED, compare=False)

    def with_label(self, label: Label) -> "Example":
        return Example(self.assignment, self.values, label)

    def valuation(self, opt: Optimization) -> dict:
        return dict(zip(opt.consts, self.values))

    def show(self, opt: Optimization) -> str:
        widths = opt.types.name_widths(self.assignment)
        parts = [f"{c}=i{widths[c]} {v}" for c, v in zip(opt.consts, self.values)]
        return "(" + ", ".join(parts) + ")" if parts else "()"


def const_widths(opt: Optimization, assignment: tuple) -> list:
    widths = opt.types.name_widths(assignment)
    return [widths[c] for c in opt.consts]


def group_by_assignment(examples) -> dict:
    """assignment -> (indices into ``examples``, per-constant value columns)."""
    groups = {}
    for i, e in enumerate(examples):
        groups.setdefault(e.assignment, []).append(i)
    out = {}
    for a, idx in groups.items():
        cols = [[examples[i].values[j] for i in idx] for j in range(len(examples[idx[0]].values))]
        out[a] = (np.asarray(idx), cols)
    return out


def evaluate(opt: Optimization, pred, examples) -> np.ndarray:
    """Three-valued codes of ``pred`` on each example, in example order."""
    out = np.zeros(len(examples), dtype=np.int8)
    for a, (idx, cols) in group_by_assignment(examples).items():
        widths = const_widths(opt, a)
        values = {c: bv.asarray(np.asarray(col, dtype=object), w)
                  for c, col, w in zip(opt.consts, cols, widths)}
        out[idx] = np.broadcast_to(eval_predicate(pred, env_for(opt, a, values)), idx.shape)
    return out


def apply_assumptions(opt: Optimization, examples, assumptions=None) -> list:
    """Keep the examples on which every assumption evaluates to Accept."""
    assumptions = opt.assumptions if assumptions is None else assumptions
    examples = list(examples)
    if not assumptions or not examples:
        return examples
    keep = np.ones(len(examples), dtype=bool)
    for a in assumptions:
        keep &= evaluate(opt, a, examples) == ACCEPT
    return [e for e, k in zip(examples, keep) if k]


# -- type assignments and budgets ------------------------------------------------

def sample_type_assignments(opt: Optimization, target: int, widths, seed: int = 0) -> list:
    feasible = list(opt.types.assignments(widths))
    if not feasible:
        raise ValueError("no feasible type assignment")
    if len(feasible) <= target:
        return feasible
    rng = np.random.default_rng(seed)
    # keep the extremes, sample the interior
    chosen = {0, len(feasible) - 1}
    interior = list(range(1, len(feasible) - 1))
    extra = rng.choice(len(interior), size=max(0, target - 2), replace=False) if target > 2 else []
    chosen.update(interior[i] for i in extra)
    return [feasible[i] for i in sorted(chosen)][:max(target, 1)]


def example_budget(count: int, b0: int = 32, b1: int = 32) -> int:
    """Per-class example target given the number of feasible type assignments."""
    if count < 1:
        raise ValueError("assignment count must be at least 1")
    budget = b0 + b1 * math.ceil(math.log2(count + 1))
    if budget < 1:
        raise ValueError("example budget must be at least 1")
    return budget


# -- generators --------------------------------------------------------------------

def gen_boundary(opt: Optimization, assignment: tuple) -> list:
    per_const = []
    for w in const_widths(opt, assignment):
        vals = []
        for v in (0, 1, bv.mask(w), bv.smin(w)):
            if v not in vals:
                vals.append(v)
        per_const.append(vals)
    return [Example(assignment, combo) for combo in itertools.product(*per_const)]


def gen_random(opt: Optimization, assignment: tuple, n: int, seed: int = 0) -> list:
    """Up to ``n`` distinct uniformly drawn valuations."""
    widths = const_widths(opt, assignment)
    space = 1 << sum(widths)
    if n <= 0:
        return []
    rng = np.random.default_rng(seed)
    if space <= n:
        flat = rng.permutation(space).tolist()
        return [Example(assignment, _unflatten(i, widths)) for i in flat]
    seen, out = set(), []
    attempts = 0
    while len(out) < n and attempts < 20 * n:
        attempts += 1
        vals = tuple(int(rng.integers(0, 1 << w)) for w in widths)
        if vals not in seen:
            seen.add(vals)
            out.append(Example(assignment, vals))
    return out


def _unflatten(i: int, widths) -> tuple:
    vals = []
    for w in reversed(widths):
        vals.append(i & bv.mask(w))
        i >>= w
    return tuple(reversed(vals))


def flatten(values, widths) -> int:
    i = 0
    for v, w in zip(values, widths):
        i = (i << w) | v
    return i


# -- classification ---------------------------------------------------------------

def classify(opt: Optimization, e: Example, backend) -> Label:
    return backend.classify_examples(opt, [e])[0].label


def gen_solver_negative(opt: Optimization, assignment: tuple, k: int, backend, seed: int = 0) -> list:
    if k <= 0:
        return []
    found = backend.find_examples(opt, assignment, Label.NEGATIVE, k, seed)
    return [e.with_label(Label.NEGATIVE) for e in found]


def gen_solver_positive(opt: Optimization, assignment: tuple, k: int, backend, seed: int = 0) -> list:
    if k <= 0:
        return []
    found = backend.find_examples(opt, assignment, Label.POSITIVE, k, seed)
    return [e.with_label(Label.POSITIVE) for e in found]


@dataclass
class ExampleSet:
    positives: list = field(default_factory=list)
    negatives: list = field(default_factory=list)
    trivial: list = field(default_factory=list)
    _index: set = field(default_factory=set, repr=False)

    def __contains__(self, e: Example) -> bool:
        return (e.assignment, e.values) in self._index

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)

    def add(self, e: Example) -> bool:
        """Insert a classified example; returns False for duplicates."""
        bucket = {Label.POSITIVE: self.positives, Label.NEGATIVE: self.negatives,
                  Label.TRIVIAL: self.trivial}.get(e.label)
        if bucket is None:
            raise ValueError("only classified examples can be added")
        key = (e.assignment, e.values)
        if key in self._index:
            return False
        self._index.add(key)
        bucket.append(e)
        return True


@dataclass
class GenConfig:
    widths: tuple = (4, 8)
    seed: int = 0
    budget0: int = 32
    budget1: int = 32
    solver_k: int = 8
    max_assignments: int = 16


def build_example_set(opt: Optimization, config: GenConfig, backend, log=None) -> ExampleSet:
    """Boundary values, then random values, then backend top-ups for a thin class."""
    feasible = opt.types.count(config.widths)
    budget = example_budget(feasible, config.budget0, config.budget1)
    assignments = sample_type_assignments(opt, config.max_assignments, config.widths, config.seed)
    per_assignment = max(1, math.ceil(2 * budget / len(assignments)))
    out = ExampleSet()
    for i, a in enumerate(assignments):
        cands = gen_boundary(opt, a) + gen_random(opt, a, per_assignment, config.seed + i)
        cands = apply_assumptions(opt, cands)
        for e in backend.classify_examples(opt, cands):
            if e.label is Label.POSITIVE and len(out.positives) >= budget:
                continue
            if e.label is Label.NEGATIVE and len(out.negatives) >= budget:
                continue
            out.add(e)
    for label, members in ((Label.POSITIVE, out.positives), (Label.NEGATIVE, out.negatives)):
        if len(members) >= budget / 4:
            continue
        for i, a in enumerate(assignments):
            gen = gen_solver_positive if label is Label.POSITIVE else gen_solver_negative
            try:
                found = gen(opt, a, config.solver_k, backend, config.seed + i)
            except BackendUnknown as exc:
                if log:
                    log(f"warning: example top-up skipped ({exc})")
                break
            for e in apply_assumptions(opt, found):
                out.add(e)
    return out


class BackendUnknown(Exception):
    """The backend could not decide a query (timeout or solver 'unknown')."""
