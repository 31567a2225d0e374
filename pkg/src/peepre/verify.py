"""Refinement checking over all feasible type assignments.

The exhaustive backend enumerates every valuation of the symbolic constants
and runtime inputs.  Per type assignment it computes, for each constant
valuation, whether the source is definable at all (non-trivial), whether the
refinement holds for every runtime input, and the first failing input.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bv
from .dsl import Optimization
from .examples import Example, Label, const_widths
from .semantics import ACCEPT, UNSAFE, DagEval, env_for, eval_predicate


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class CounterExample:
    example: Example
    runtime: dict
    reason: str = ""


@dataclass(frozen=True)
class Unknown:
    reason: str


@dataclass(frozen=True)
class Weakest:
    pass


@dataclass(frozen=True)
class MissedPositive:
    example: Example


class BudgetExceeded(ValueError):
    pass


def input_widths(opt: Optimization, assignment: tuple) -> list:
    widths = opt.types.name_widths(assignment)
    return [widths[r] for r in opt.inputs]


def _grid(widths) -> list:
    """Columns enumerating every valuation in lexicographic (unsigned) order."""
    total = sum(widths)
    idx = np.arange(1 << total, dtype=np.int64)
    cols, shift = [], total
    for w in widths:
        shift -= w
        cols.append((idx >> shift) & bv.mask(w))
    return cols


@dataclass
class Table:
    """Per constant valuation: trivial / valid flags, first failing input and assumption mask."""
    cvals: list
    trivial: np.ndarray
    valid: np.ndarray
    witness: np.ndarray
    assumed: np.ndarray


class ExhaustiveBackend:
    name = "exhaustive"

    def __init__(self, widths=(4, 8), budget_bits: int = 24, chunk: int = 1 << 20):
        self.widths = tuple(widths)
        self.budget_bits = budget_bits
        self.chunk = chunk
        self._tables = {}

    # -- plumbing --------------------------------------------------------------
    def assignments(self, opt: Optimization) -> list:
        return list(opt.types.assignments(self.widths))

    def _check_budget(self, opt, assignment, with_consts=True):
        bits = sum(input_widths(opt, assignment))
        if with_consts:
            bits += sum(const_widths(opt, assignment))
        if bits > self.budget_bits:
            raise BudgetExceeded(f"exhaustive enumeration needs {bits} bits (budget {self.budget_bits})")

    def classify_rows(self, opt, assignment, cvals):
        """Trivial/valid/witness for rows of constant values (parallel arrays)."""
        self._check_budget(opt, assignment, with_consts=False)
        n = len(cvals[0]) if cvals else 1
        rgrid = _grid(input_widths(opt, assignment))
        nr = len(rgrid[0]) if rgrid else 1
        trivial = np.zeros(n, dtype=bool)
        valid = np.zeros(n, dtype=bool)
        witness = np.zeros(n, dtype=np.int64)
        step = max(1, self.chunk // nr)
        for lo in range(0, n, step):
            hi = min(n, lo + step)
            leaves = {c: np.asarray(col[lo:hi]).reshape(-1, 1) for c, col in zip(opt.consts, cvals)}
            leaves.update({r: col.reshape(1, -1) for r, col in zip(opt.inputs, rgrid)})
            ev = DagEval(opt, assignment, leaves)
            shape = (hi - lo, nr)
            ds = np.broadcast_to(ev.source_defined(), shape)
            ok = np.broadcast_to(ev.refinement(), shape)
            trivial[lo:hi] = ~ds.any(axis=1)
            valid[lo:hi] = ok.all(axis=1)
            witness[lo:hi] = np.argmin(ok, axis=1)
        return trivial, valid, witness

    def runtime_of(self, opt, assignment, r_index: int) -> dict:
        widths = input_widths(opt, assignment)
        vals, i = [], int(r_index)
        for w in reversed(widths):
            vals.append(i & bv.mask(w))
            i >>= w
        return dict(zip(opt.inputs, reversed(vals)))

    def table(self, opt: Optimization, assignment: tuple) -> Table:
        key = (id(opt), assignment)
        hit = self._tables.get(key)
        if hit is not None and hit[0] is opt:
            return hit[1]
        self._check_budget(opt, assignment)
        cvals = _grid(const_widths(opt, assignment))
        trivial, valid, witness = self.classify_rows(opt, assignment, cvals)
        assumed = self._assumed(opt, assignment, cvals, len(trivial))
        t = Table(cvals, trivial, valid, witness, assumed)
        self._tables[key] = (opt, t)
        return t

    def _assumed(self, opt, assignment, cvals, n):
        ok = np.ones(n, dtype=bool)
        env = env_for(opt, assignment, dict(zip(opt.consts, cvals)))
        for a in opt.assumptions:
            ok &= np.broadcast_to(eval_predicate(a, env) == ACCEPT, (n,))
        return ok

    def _eval_all(self, opt, assignment, pred, t: Table):
        env = env_for(opt, assignment, dict(zip(opt.consts, t.cvals)))
        return np.broadcast_to(eval_predicate(pred, env), t.trivial.shape)

    def _example(self, opt, assignment, t: Table, i: int, label=Label.UNCLASSIFIED) -> Example:
        return Example(assignment, tuple(int(c[i]) for c in t.cvals), label)

    # -- queries -----------------------------------------------------------------
    def classify_examples(self, opt: Optimization, examples) -> list:
        out = list(examples)
        groups = {}
        for i, e in enumerate(out):
            groups.setdefault(e.assignment, []).append(i)
        for a, idx in groups.items():
            cvals = [np.asarray([out[i].values[j] for i in idx], dtype=np.int64)
                     for j in range(len(opt.consts))]
            trivial, valid, _ = self.classify_rows(opt, a, cvals)
            for k, i in enumerate(idx):
                label = Label.TRIVIAL if trivial[k] else Label.POSITIVE if valid[k] else Label.NEGATIVE
                out[i] = out[i].with_label(label)
        return out

    def check_refinement(self, opt: Optimization, pre, reject_trivial: bool = False):
        """Valid, or the first counterexample in assignment then unsigned-value order.

        With ``reject_trivial`` an accepted trivial example also counts as a counterexample.
        """
        for a in self.assignments(opt):
            t = self.table(opt, a)
            tri = self._eval_all(opt, a, pre, t)
            unsafe = t.assumed & (tri == UNSAFE)
            wrong = t.assumed & (tri == ACCEPT) & ~t.valid
            bad = unsafe | wrong
            if reject_trivial:
                bad = bad | (t.assumed & (tri == ACCEPT) & t.trivial)
            if bad.any():
                i = int(np.argmax(bad))
                label = Label.TRIVIAL if t.trivial[i] else Label.POSITIVE if t.valid[i] else Label.NEGATIVE
                if unsafe[i]:
                    return CounterExample(self._example(opt, a, t, i, label), self.runtime_of(opt, a, 0),
                                          "precondition is unsafe")
                if t.valid[i]:
                    return CounterExample(self._example(opt, a, t, i, label),
                                          self.runtime_of(opt, a, 0), "accepts a trivial example")
                return CounterExample(self._example(opt, a, t, i, label),
                                      self.runtime_of(opt, a, t.witness[i]), "refinement fails")
        return Valid()

    def check_weakest(self, opt: Optimization, pre):
        for a in self.assignments(opt):
            t = self.table(opt, a)
            tri = self._eval_all(opt, a, pre, t)
            missed = t.assumed & ~t.trivial & t.valid & (tri != ACCEPT)
            if missed.any():
                return MissedPositive(self._example(opt, a, t, int(np.argmax(missed)), Label.POSITIVE))
        return Weakest()

    def weaker_than(self, opt: Optimization, pre_a, pre_b):
        """An example accepted by ``pre_a`` but not by ``pre_b``, or None."""
        for a in self.assignments(opt):
            if sum(const_widths(opt, a)) > self.budget_bits:
                raise BudgetExceeded("too many constant bits for exhaustive comparison")
            cvals = _grid(const_widths(opt, a))
            n = len(cvals[0]) if cvals else 1
            env = env_for(opt, a, dict(zip(opt.consts, cvals)))
            ta = np.broadcast_to(eval_predicate(pre_a, env), (n,))
            tb = np.broadcast_to(eval_predicate(pre_b, env), (n,))
            hit = self._assumed(opt, a, cvals, n) & (ta == ACCEPT) & (tb != ACCEPT)
            if hit.any():
                i = int(np.argmax(hit))
                return Example(a, tuple(int(c[i]) for c in cvals))
        return None

    def find_examples(self, opt: Optimization, assignment: tuple, label: Label, k: int, seed: int = 0) -> list:
        t = self.table(opt, assignment)
        if label is Label.POSITIVE:
            mask = t.assumed & ~t.trivial & t.valid
        else:
            mask = t.assumed & ~t.trivial & ~t.valid
        idx = np.flatnonzero(mask)
        if len(idx) > k:
            idx = np.sort(np.random.default_rng(seed).choice(idx, size=k, replace=False))
        return [self._example(opt, assignment, t, int(i), label) for i in idx]

    def labelled_universe(self, opt: Optimization, assignment: tuple) -> list:
        """Every assumption-satisfying example of one assignment, labelled."""
        t = self.table(opt, assignment)
        out = []
        for i in np.flatnonzero(t.assumed):
            label = Label.TRIVIAL if t.trivial[i] else Label.POSITIVE if t.valid[i] else Label.NEGATIVE
            out.append(self._example(opt, assignment, t, int(i), label))
        return out


def v_func(opt: Optimization, e: Example, runtime: dict) -> bool:
    """The per-valuation refinement check for one example and one runtime input."""
    leaves = dict(zip(opt.consts, e.values))
    leaves.update(runtime)
    ev = DagEval(opt, e.assignment, {k: np.asarray(v) for k, v in leaves.items()})
    return bool(ev.refinement())


def source_defined(opt: Optimization, e: Example, runtime: dict) -> bool:
    leaves = dict(zip(opt.consts, e.values))
    leaves.update(runtime)
    ev = DagEval(opt, e.assignment, {k: np.asarray(v) for k, v in leaves.items()})
    return bool(ev.source_defined())
