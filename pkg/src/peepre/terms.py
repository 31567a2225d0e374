"""Abstract syntax for preconditions and constant expressions.

Constant expressions (``Sym``, ``Lit``, ``Unop``, ``Binop``, ``Fun``, ``Width``)
denote bitvectors; predicates (``Cmp``, ``PFun``, ``Not``, ``And``, ``Or``,
``BoolConst``) denote three-valued truth.  All nodes are immutable and
hashable; the hash is cached because terms are used heavily as dict keys.
"""
from __future__ import annotations

from dataclasses import dataclass

BINOP_SYMBOLS = {
    "add": "+", "sub": "-", "mul": "*",
    "udiv": "/u", "sdiv": "/", "urem": "%u", "srem": "%",
    "shl": "<<", "lshr": "u>>", "ashr": ">>",
    "and": "&", "or": "|", "xor": "^",
}
# C-like binding strength; higher binds tighter
BINOP_PRECEDENCE = {
    "mul": 10, "udiv": 10, "sdiv": 10, "urem": 10, "srem": 10,
    "add": 9, "sub": 9,
    "shl": 8, "lshr": 8, "ashr": 8,
    "and": 7, "xor": 6, "or": 5,
}
COMMUTATIVE = frozenset({"add", "mul", "and", "or", "xor"})

COND_SYMBOLS = {
    "eq": "==", "ne": "!=",
    "slt": "<", "sle": "<=", "sgt": ">", "sge": ">=",
    "ult": "u<", "ule": "u<=", "ugt": "u>", "uge": "u>=",
}
CONDS = tuple(COND_SYMBOLS)
CFUNS = ("abs", "log2")
PFUNS = ("isPowerOf2", "isPowerOf2OrZero", "isSignBit")
UNOPS = ("neg", "not")


class Term:
    __slots__ = ()

    def __hash__(self):
        try:
            return object.__getattribute__(self, "_h")
        except AttributeError:
            h = hash((type(self).__name__,) + tuple(getattr(self, f) for f in self.__dataclass_fields__))
            object.__setattr__(self, "_h", h)
            return h

    def __str__(self):
        return show(self)


def _term(cls):
    cls = dataclass(frozen=True, eq=True, unsafe_hash=False)(cls)
    cls.__hash__ = Term.__hash__
    return cls


# -- constant expressions ---------------------------------------------------

@_term
class Sym(Term):
    name: str


@_term
class Lit(Term):
    value: int


@_term
class Unop(Term):
    op: str
    arg: Term


@_term
class Binop(Term):
    op: str
    lhs: Term
    rhs: Term


@_term
class Fun(Term):
    name: str
    arg: Term


@_term
class Width(Term):
    name: str


# -- predicates --------------------------------------------------------------

@_term
class Cmp(Term):
    cond: str
    lhs: Term
    rhs: Term


@_term
class PFun(Term):
    name: str
    arg: Term


@_term
class Not(Term):
    arg: Term


@_term
class And(Term):
    args: tuple


@_term
class Or(Term):
    args: tuple


@_term
class BoolConst(Term):
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)

CEXPR_TYPES = (Sym, Lit, Unop, Binop, Fun, Width)
PRED_TYPES = (Cmp, PFun, Not, And, Or, BoolConst)


def is_cexpr(t) -> bool:
    return isinstance(t, CEXPR_TYPES)


def conj(*parts) -> Term:
    """Flattening conjunction that drops ``true`` operands."""
    args = []
    for p in parts:
        if isinstance(p, And):
            args.extend(p.args)
        elif p == TRUE:
            continue
        else:
            args.append(p)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(tuple(args))


def disj(*parts) -> Term:
    args = []
    for p in parts:
        if isinstance(p, Or):
            args.extend(p.args)
        elif p == FALSE:
            continue
        else:
            args.append(p)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(tuple(args))


# -- traversal ---------------------------------------------------------------

def children(t):
    if isinstance(t, (Unop, Fun, PFun, Not)):
        return (t.arg,)
    if isinstance(t, (Binop, Cmp)):
        return (t.lhs, t.rhs)
    if isinstance(t, (And, Or)):
        return t.args
    return ()


def walk(t):
    yield t
    for c in children(t):
        yield from walk(c)


def symbols(t) -> list:
    """Names of symbolic constants in ``t`` (excluding ``width`` arguments), in order."""
    seen = []
    for n in walk(t):
        if isinstance(n, Sym) and n.name not in seen:
            seen.append(n.name)
    return seen


def atoms(t) -> list:
    """The comparison and predicate-function leaves of a predicate."""
    out = []
    for n in walk(t):
        if isinstance(n, (Cmp, PFun)) and n not in out:
            out.append(n)
    return out


# -- printing ----------------------------------------------------------------

def _show_cexpr(t, ctx_prec: int = 0) -> str:
    if isinstance(t, Sym):
        return t.name
    if isinstance(t, Lit):
        return str(t.value)
    if isinstance(t, Width):
        return f"width({t.name})"
    if isinstance(t, Fun):
        return f"{t.name}({_show_cexpr(t.arg)})"
    if isinstance(t, Unop):
        sym = "-" if t.op == "neg" else "~"
        inner = _show_cexpr(t.arg, 11)
        if isinstance(t.arg, (Unop, Lit)) or inner.startswith("-"):
            inner = f"({inner})"
        return sym + inner
    if isinstance(t, Binop):
        p = BINOP_PRECEDENCE[t.op]
        # left-associative: the right operand needs parens at equal precedence
        s = f"{_show_cexpr(t.lhs, p)} {BINOP_SYMBOLS[t.op]} {_show_cexpr(t.rhs, p + 1)}"
        return f"({s})" if p < ctx_prec else s
    raise TypeError(f"not a constant expression: {t!r}")


def _show_pred(t, ctx: int = 0) -> str:
    # ctx: 0 top, 1 inside ||, 2 inside &&, 3 under !
    if isinstance(t, BoolConst):
        return "true" if t.value else "false"
    if isinstance(t, Cmp):
        s = f"{_show_cexpr(t.lhs)} {COND_SYMBOLS[t.cond]} {_show_cexpr(t.rhs)}"
        return f"({s})" if ctx >= 3 else s
    if isinstance(t, PFun):
        return f"{t.name}({_show_cexpr(t.arg)})"
    if isinstance(t, Not):
        return "!" + _show_pred(t.arg, 3)
    if isinstance(t, And):
        s = " && ".join(_show_pred(a, 2) for a in t.args)
        return f"({s})" if ctx >= 2 else s
    if isinstance(t, Or):
        s = " || ".join(_show_pred(a, 1) for a in t.args)
        return f"({s})" if ctx >= 1 else s
    raise TypeError(f"not a predicate: {t!r}")


def show(t) -> str:
    if is_cexpr(t):
        return _show_cexpr(t)
    return _show_pred(t)
