"""Concrete evaluation of rewrites, constant expressions and preconditions.

Everything here is vectorized: an ``Env`` maps names to numpy arrays that
broadcast against each other, so one call evaluates a term over a whole grid
of valuations.  Scalars work too (0-d arrays).

Three-valued results are int8 codes: ``REJECT`` (0), ``ACCEPT`` (1) and
``UNSAFE`` (2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import bv
from . import terms as T
from .dsl import ConstExpr, Input, Instr, Literal, Optimization, SymConst


class Tri(IntEnum):
    REJECT = 0
    ACCEPT = 1
    UNSAFE = 2

    @property
    def char(self) -> str:
        return "B" if self is Tri.REJECT else "T" if self is Tri.ACCEPT else "*"


REJECT, ACCEPT, UNSAFE = np.int8(0), np.int8(1), np.int8(2)


@dataclass
class Env:
    """Widths of every named value plus values for the names being evaluated."""
    widths: dict
    values: dict = field(default_factory=dict)
    default_width: int = 4


def env_for(opt: Optimization, assignment: tuple, values: dict) -> Env:
    widths = opt.types.name_widths(assignment)
    return Env(widths=widths, values=values, default_width=max(widths.values(), default=1))


# -- constant expressions ----------------------------------------------------

def cexpr_width(term, env: Env) -> int:
    """Width a constant expression is evaluated at: its symbols' type, else the default."""
    for n in T.walk(term):
        if isinstance(n, T.Sym):
            return env.widths[n.name]
    return env.default_width


def eval_cexpr(term, env: Env, width: int | None = None):
    """Return ``(value, safe)`` arrays; ``value`` is meaningless where ``safe`` is false."""
    w = cexpr_width(term, env) if width is None else width
    return _cexpr(term, env, w)


def _cexpr(t, env, w):
    if isinstance(t, T.Sym):
        return bv.asarray(env.values[t.name], w), np.True_
    if isinstance(t, T.Lit):
        return bv.const(t.value, w), np.True_
    if isinstance(t, T.Width):
        return bv.const(env.widths[t.name], w), np.True_
    if isinstance(t, T.Unop):
        a, ok = _cexpr(t.arg, env, w)
        return (bv.neg(a, w) if t.op == "neg" else bv.bnot(a, w)), ok
    if isinstance(t, T.Fun):
        a, ok = _cexpr(t.arg, env, w)
        if t.name == "abs":
            return bv.babs(a, w), ok
        return bv.log2(a, w), ok & bv._bool(a != 0)
    if isinstance(t, T.Binop):
        a, oka = _cexpr(t.lhs, env, w)
        b, okb = _cexpr(t.rhs, env, w)
        ok = oka & okb
        if t.op in ("udiv", "sdiv", "urem", "srem"):
            ok = ok & bv._bool(b != 0)
        return bv.BINOPS[t.op](a, b, w), ok
    raise TypeError(f"not a constant expression: {t!r}")


# -- predicates ----------------------------------------------------------------

def _tri(ok, truth):
    return np.where(ok, np.where(truth, ACCEPT, REJECT), UNSAFE).astype(np.int8)


_PFUN_IMPL = {
    "isPowerOf2": bv.is_power_of_2,
    "isPowerOf2OrZero": bv.is_power_of_2_or_zero,
    "isSignBit": bv.is_sign_bit,
}


def eval_predicate(term, env: Env) -> np.ndarray:
    """Three-valued, short-circuiting evaluation; returns an int8 code array."""
    if isinstance(term, T.BoolConst):
        return np.asarray(ACCEPT if term.value else REJECT, dtype=np.int8)
    if isinstance(term, T.Cmp):
        w = cexpr_width(T.Binop("add", term.lhs, term.rhs), env)
        a, oka = _cexpr(term.lhs, env, w)
        b, okb = _cexpr(term.rhs, env, w)
        return _tri(oka & okb, bv.compare(term.cond, a, b, w))
    if isinstance(term, T.PFun):
        w = cexpr_width(term.arg, env)
        a, ok = _cexpr(term.arg, env, w)
        return _tri(ok, _PFUN_IMPL[term.name](a, w))
    if isinstance(term, T.Not):
        r = eval_predicate(term.arg, env)
        return np.where(r == UNSAFE, UNSAFE, 1 - r).astype(np.int8)
    if isinstance(term, (T.And, T.Or)):
        # the first operand that is not the neutral value decides
        neutral = ACCEPT if isinstance(term, T.And) else REJECT
        out = eval_predicate(term.args[0], env)
        for arg in term.args[1:]:
            pending = out == neutral
            if not np.any(pending):
                break
            out = np.where(pending, eval_predicate(arg, env), out).astype(np.int8)
        return out
    raise TypeError(f"not a predicate: {term!r}")


# -- safety conditions ---------------------------------------------------------

def _and(*ps):
    if any(p == T.FALSE for p in ps):
        return T.FALSE
    return T.conj(*ps)


def _or(*ps):
    if any(p == T.TRUE for p in ps):
        return T.TRUE
    return T.disj(*ps)


def _neg(p):
    if isinstance(p, T.BoolConst):
        return T.BoolConst(not p.value)
    return p.arg if isinstance(p, T.Not) else T.Not(p)


def safety_condition(term) -> T.Term:
    """Predicate over the symbolic constants that holds iff ``term`` evaluates safely.

    The result never evaluates to Unsafe itself: each division guard is
    preceded by the safety of its operands, and ``&&`` short-circuits.
    """
    if isinstance(term, (T.Sym, T.Lit, T.Width, T.BoolConst)):
        return T.TRUE
    if isinstance(term, (T.Unop, T.PFun, T.Not)):
        return safety_condition(term.arg)
    if isinstance(term, T.Fun):
        s = safety_condition(term.arg)
        if term.name == "log2":
            return _and(s, T.Cmp("ne", term.arg, T.Lit(0)))
        return s
    if isinstance(term, T.Binop):
        s = _and(safety_condition(term.lhs), safety_condition(term.rhs))
        if term.op in ("udiv", "sdiv", "urem", "srem"):
            s = _and(s, T.Cmp("ne", term.rhs, T.Lit(0)))
        return s
    if isinstance(term, T.Cmp):
        return _and(safety_condition(term.lhs), safety_condition(term.rhs))
    if isinstance(term, (T.And, T.Or)):
        # later operands only matter when every earlier one took the neutral value
        parts, guard = [], []
        for arg in term.args:
            s = safety_condition(arg)
            parts.append(_or(*guard, s))
            guard.append(_neg(arg) if isinstance(term, T.And) else arg)
        return _and(*parts)
    raise TypeError(f"unknown term {term!r}")


def target_safety(opt: Optimization) -> T.Term:
    """Conjunction of the safety conditions of every constant expression in the target."""
    return _and(*(safety_condition(n.term) for n in opt.nodes if isinstance(n, ConstExpr)))


# -- instructions --------------------------------------------------------------

class DagEval:
    """Memoized value and definedness of DAG nodes under one type assignment.

    ``leaf_values`` maps input and symbolic-constant names to arrays that
    broadcast together.
    """

    def __init__(self, opt: Optimization, assignment: tuple, leaf_values: dict):
        self.opt = opt
        self.node_widths = opt.types.node_widths(assignment)
        self.env = env_for(opt, assignment, leaf_values)
        self._val = {}
        self._def = {}
        self._safe = None

    def width(self, nid: int) -> int:
        return self.node_widths[nid]

    def value(self, nid: int):
        if nid not in self._val:
            self._val[nid] = self._compute(nid)
        return self._val[nid]

    def _compute(self, nid):
        node = self.opt.nodes[nid]
        w = self.width(nid)
        if isinstance(node, (Input, SymConst)):
            return bv.asarray(self.env.values[node.name], w)
        if isinstance(node, Literal):
            return bv.const(node.value, w)
        if isinstance(node, ConstExpr):
            v, _ = _cexpr(node.term, self.env, w)
            return v
        op, args = node.opcode, node.args
        if op in bv.BINOPS:
            return bv.BINOPS[op](self.value(args[0]), self.value(args[1]), w)
        if op == "icmp":
            wa = self.width(args[0])
            return bv.compare(node.cond, self.value(args[0]), self.value(args[1]), wa).astype(np.int64)
        if op == "select":
            c = bv._bool(self.value(args[0]) != 0)
            return np.where(c, self.value(args[1]), self.value(args[2]))
        if op == "copy":
            return self.value(args[0])
        cast = {"zext": bv.zext, "sext": bv.sext, "trunc": bv.trunc}[op]
        return cast(self.value(args[0]), self.width(args[0]), w)

    def defined(self, nid: int):
        if nid not in self._def:
            self._def[nid] = self._compute_defined(nid)
        return self._def[nid]

    def _compute_defined(self, nid):
        node = self.opt.nodes[nid]
        if not isinstance(node, Instr):
            return np.True_
        ok = np.True_
        for a in node.args:
            ok = ok & self.defined(a)
        op = node.opcode
        w = self.width(nid)
        if op in bv.BINOPS:
            a, b = self.value(node.args[0]), self.value(node.args[1])
            if op in ("udiv", "sdiv", "urem", "srem"):
                ok = ok & bv.divisor_ok(op, a, b, w)
            if op in ("shl", "lshr", "ashr"):
                ok = ok & bv._bool(b < w)
            for f in node.flags:
                ok = ok & bv.flag_ok(op, f, a, b, w)
        return ok

    def target_safe(self):
        if self._safe is None:
            ok = np.True_
            for nid, n in enumerate(self.opt.nodes):
                if isinstance(n, ConstExpr):
                    ok = ok & _cexpr(n.term, self.env, self.width(nid))[1]
            self._safe = ok
        return self._safe

    def refinement(self):
        """Per-valuation check: target safe and, where the source is defined,
        the target is defined and produces the same value."""
        s, t = self.opt.source_root, self.opt.target_root
        ds = self.defined(s)
        ok = ~ds | (self.defined(t) & bv._bool(self.value(s) == self.value(t)))
        return self.target_safe() & ok

    def source_defined(self):
        return self.defined(self.opt.source_root)
