"""CNF learning over predicate vectors.

A vector is a tuple of three-valued codes (see ``semantics.Tri``), one per
learned predicate.  A literal accepts a vector only when its predicate
evaluates to exactly the literal's polarity; an unsafe entry is rejected by
both polarities.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import terms as T
from .semantics import Tri, safety_condition

ACCEPT, REJECT, UNSAFE = int(Tri.ACCEPT), int(Tri.REJECT), int(Tri.UNSAFE)

_CHARS = {"T": ACCEPT, "⊤": ACCEPT, "B": REJECT, "F": REJECT, "⊥": REJECT, "*": UNSAFE, "★": UNSAFE}
_SHOW = {ACCEPT: "T", REJECT: "B", UNSAFE: "*"}


def parse_vector(text: str) -> tuple:
    return tuple(_CHARS[c] for c in text)


def show_vector(v) -> str:
    return "".join(_SHOW[int(x)] for x in v)


@dataclass(frozen=True, order=True)
class Literal:
    index: int
    negated: bool = False

    def accepts(self, v) -> bool:
        return v[self.index] == (REJECT if self.negated else ACCEPT)

    def show(self) -> str:
        return ("!" if self.negated else "") + f"p{self.index + 1}"


@dataclass(frozen=True, order=True)
class Clause:
    literals: tuple               # sorted Literals

    def accepts(self, v) -> bool:
        return any(lit.accepts(v) for lit in self.literals)

    def show(self) -> str:
        s = " || ".join(lit.show() for lit in self.literals)
        return f"({s})" if len(self.literals) > 1 else s


def clause(*lits) -> Clause:
    return Clause(tuple(sorted(lits)))


@dataclass(frozen=True)
class CNF:
    clauses: tuple = ()           # empty means true

    def accepts(self, v) -> bool:
        return all(c.accepts(v) for c in self.clauses)

    def show(self) -> str:
        if not self.clauses:
            return "true"
        return " && ".join(c.show() for c in self.clauses)

    def predicates(self) -> set:
        return {lit.index for c in self.clauses for lit in c.literals}


TRUE_CNF = CNF(())
FALSE_CNF = CNF((Clause(()),))


def accepts(c, v) -> bool:
    return c.accepts(v)


def literals(n: int) -> list:
    return [Literal(i, neg) for i in range(n) for neg in (False, True)]


def clauses_of_size(n: int, k: int):
    for combo in itertools.combinations(literals(n), k):
        yield Clause(combo)


def _masks(lits, vectors) -> list:
    """Per literal, the bitmask of vectors it accepts."""
    out = []
    for lit in lits:
        m = 0
        for j, v in enumerate(vectors):
            if lit.accepts(v):
                m |= 1 << j
        out.append(m)
    return out


def _clause_mask(c: Clause, vectors) -> int:
    m = 0
    for j, v in enumerate(vectors):
        if c.accepts(v):
            m |= 1 << j
    return m


# -- greedy cover --------------------------------------------------------------

def cover_clauses(candidates, negatives) -> CNF:
    """Greedily pick clauses rejecting the most still-accepted negatives."""
    negatives = list(negatives)
    pool = list(candidates)
    full = (1 << len(negatives)) - 1
    rejects = [full & ~_clause_mask(c, negatives) for c in pool]
    return _cover(pool, rejects, full)


def _cover(pool, rejects, remaining) -> CNF:
    pool, rejects = list(pool), list(rejects)
    chosen = []
    while remaining:
        best, best_count = -1, 0
        for i, r in enumerate(rejects):
            count = bin(r & remaining).count("1")
            if count > best_count:
                best, best_count = i, count
        if best < 0:
            raise ValueError("candidate clauses cannot reject every negative vector")
        chosen.append(pool[best])
        remaining &= ~rejects[best]
        del pool[best], rejects[best]
    return CNF(tuple(chosen))


# -- complete learner ------------------------------------------------------------

@dataclass
class CompleteTrace:
    k: int = 0
    candidates: list = field(default_factory=list)


def learn_complete(n: int, positives, negatives, trace: CompleteTrace | None = None) -> CNF | None:
    """Smallest-k clauses accepting every positive, then a greedy cover of the negatives.

    Returns None when no CNF over the literals separates the vectors.
    """
    positives = list(dict.fromkeys(positives))
    negatives = list(dict.fromkeys(negatives))
    for v in positives:
        if UNSAFE in v:
            raise ValueError(f"positive vector {show_vector(v)} contains an unsafe entry")
    if set(positives) & set(negatives):
        raise ValueError("a vector is both positive and negative")
    if not negatives:
        return TRUE_CNF
    if not positives:
        return FALSE_CNF
    lits = literals(n)
    pos_m = _masks(lits, positives)
    neg_m = _masks(lits, negatives)
    full_pos = (1 << len(positives)) - 1
    full_neg = (1 << len(negatives)) - 1
    chosen, rejects = [], []
    covered = 0                   # negatives rejected by some chosen clause
    k = 0
    while covered != full_neg:
        k += 1
        if k > len(lits):
            return None
        for combo in itertools.combinations(range(len(lits)), k):
            acc = 0
            for i in combo:
                acc |= pos_m[i]
            if acc != full_pos:
                continue
            nacc = 0
            for i in combo:
                nacc |= neg_m[i]
            chosen.append(Clause(tuple(lits[i] for i in combo)))
            rejects.append(full_neg & ~nacc)
            covered |= full_neg & ~nacc
    if trace is not None:
        trace.k, trace.candidates = k, list(chosen)
    return _cover(chosen, rejects, full_neg)


# -- partial learner --------------------------------------------------------------

@dataclass
class PartialStep:
    clause: Clause
    weight: int
    discarded: list               # vectors (positive or negative) newly rejected


def _greedy_partial(n, weighted, negatives, K, first=None, trace=None):
    pool = [c for k in range(1, K + 1) for c in clauses_of_size(n, k)]
    vecs = [v for v, _ in weighted]
    weights = [w for _, w in weighted]
    pos_masks = [_clause_mask(c, vecs) for c in pool]
    full_neg = (1 << len(negatives)) - 1
    neg_rejects = [full_neg & ~_clause_mask(c, negatives) for c in pool]
    live = (1 << len(vecs)) - 1
    live_neg = full_neg
    chosen, chosen_rej = [], []

    def weight_of(mask):
        return sum(weights[j] for j in range(len(vecs)) if mask >> j & 1)

    while live_neg:
        if first is not None and not chosen:
            best = pool.index(first)
        else:
            best, best_w = -1, -1
            for i, m in enumerate(pos_masks):
                w = weight_of(m & live)
                if w > best_w:
                    best, best_w = i, w
        if best < 0:
            return None
        c = pool[best]
        if trace is not None:
            dropped = [vecs[j] for j in range(len(vecs)) if (live & ~pos_masks[best]) >> j & 1]
            dropped += [negatives[j] for j in range(len(negatives)) if (live_neg & neg_rejects[best]) >> j & 1]
            trace.append(PartialStep(c, weight_of(pos_masks[best] & live), dropped))
        chosen.append(c)
        chosen_rej.append(neg_rejects[best])
        live &= pos_masks[best]
        live_neg &= ~neg_rejects[best]
        del pool[best], pos_masks[best], neg_rejects[best]
        if live_neg and not pool:
            return None
    return _cover(chosen, chosen_rej, full_neg)


def learn_partial(n: int, weighted, negatives, K: int = 1, trace: list | None = None) -> CNF | None:
    """Greedy CNF maximizing accepted positive weight; None when the clause pool runs dry.

    ``weighted`` is a list of ``(vector, weight)`` pairs.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    return _greedy_partial(n, list(weighted), list(negatives), K, trace=trace)


def accepted_weight(cnf: CNF | None, weighted) -> int:
    if cnf is None:
        return -1
    return sum(w for v, w in weighted if cnf.accepts(v))


def learn_partial_restarts(n: int, weighted, negatives, K: int = 1, restarts: int = 3) -> CNF | None:
    """Rerun the greedy learner with each of the top first-step clauses forced."""
    weighted, negatives = list(weighted), list(negatives)
    if not negatives:
        return TRUE_CNF
    pool = [c for k in range(1, K + 1) for c in clauses_of_size(n, k)]
    scored = sorted(range(len(pool)),
                    key=lambda i: (-sum(w for v, w in weighted if pool[i].accepts(v)), i))
    best = None
    for i in scored[:max(1, restarts)]:
        cnf = _greedy_partial(n, weighted, negatives, K, first=pool[i])
        if cnf is None:
            continue
        key = (-accepted_weight(cnf, weighted), len(cnf.clauses), cnf.clauses)
        if best is None or key < best[0]:
            best = (key, cnf)
    return None if best is None else best[1]


# -- matrix files -------------------------------------------------------------------

@dataclass
class MatrixFile:
    n: int
    positives: list               # (vector, weight)
    negatives: list               # (vector, weight)


def parse_matrix(text: str) -> MatrixFile:
    n = None
    pos, neg = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "preds":
            n = int(parts[1])
            continue
        if n is None:
            raise ValueError(f"line {lineno}: missing 'preds N' header")
        vec = parse_vector(parts[0])
        if len(vec) != n:
            raise ValueError(f"line {lineno}: expected {n} entries")
        weight = int(parts[2]) if len(parts) > 2 else 1
        if parts[1] == "+":
            pos.append((vec, weight))
        elif parts[1] == "-":
            neg.append((vec, weight))
        else:
            raise ValueError(f"line {lineno}: polarity must be + or -")
    if n is None:
        raise ValueError("missing 'preds N' header")
    return MatrixFile(n, pos, neg)


def dump_matrix(m: MatrixFile) -> str:
    lines = [f"preds {m.n}"]
    lines += [f"{show_vector(v)} + {w}" for v, w in m.positives]
    lines += [f"{show_vector(v)} - {w}" for v, w in m.negatives]
    return "\n".join(lines) + "\n"


# -- rendering as preconditions ------------------------------------------------------

_NEGATED_COND = {"eq": "ne", "ne": "eq", "ult": "uge", "uge": "ult", "ugt": "ule", "ule": "ugt",
                  "slt": "sge", "sge": "slt", "sgt": "sle", "sle": "sgt"}


def guarded_literal(pred, negated: bool):
    """A term that is Accept exactly when the literal accepts, and never Unsafe."""
    if not negated:
        body = pred
    elif isinstance(pred, T.Cmp):
        body = T.Cmp(_NEGATED_COND[pred.cond], pred.lhs, pred.rhs)
    else:
        body = T.Not(pred)
    guard = safety_condition(pred)
    return body if guard == T.TRUE else T.conj(guard, body)


def to_term(cnf: CNF, preds) -> T.Term:
    if not cnf.clauses:
        return T.TRUE
    parts = []
    for c in cnf.clauses:
        if not c.literals:
            parts.append(T.FALSE)
            continue
        parts.append(T.disj(*(guarded_literal(preds[lit.index], lit.negated) for lit in c.literals)))
    return T.conj(*parts)
