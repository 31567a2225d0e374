"""Type-aware enumeration of predicates in nondecreasing weight.

Weight counts leaves (symbolic constants, literals, named values) plus one
per function application; operators are free.  Expressions are kept in a
normal form (sorted commutative operands, folded double negation, a few
total identities) and each normal form is emitted once.

Comparisons are generated only as ``==``, ``u<`` and ``<``: the remaining
conditions are negations or operand swaps of these, and the Boolean learner
gets negation for free.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import terms as T
from .dsl import ConstExpr, Literal, Optimization

_RANK = {T.Sym: 0, T.Lit: 1, T.Width: 2, T.Unop: 3, T.Fun: 4, T.Binop: 5}
_SHIFTS = ("shl", "lshr", "ashr")
_DIVS = ("udiv", "sdiv", "urem", "srem")
ENUM_BINOPS = ("add", "sub", "mul", "and", "or", "xor",
               "shl", "lshr", "ashr", "udiv", "sdiv", "urem", "srem")
ENUM_CONDS = ("eq", "ult", "slt")


@dataclass(frozen=True)
class WeightedPredicate:
    term: T.Term
    weight: int


def weight_of(t) -> int:
    if isinstance(t, (T.Sym, T.Lit)):
        return 1
    if isinstance(t, T.Width):
        return 2
    if isinstance(t, (T.Fun, T.PFun)):
        return 1 + weight_of(t.arg)
    if isinstance(t, T.BoolConst):
        return 0
    return sum(weight_of(c) for c in T.children(t))


def sort_key(t):
    """Structural total order: tag, then name or value, then children."""
    if isinstance(t, T.Sym):
        return (0, t.name)
    if isinstance(t, T.Lit):
        return (1, t.value)
    if isinstance(t, T.Width):
        return (2, t.name)
    if isinstance(t, (T.Unop, T.Fun)):
        return (_RANK[type(t)], t.op if isinstance(t, T.Unop) else t.name, sort_key(t.arg))
    if isinstance(t, T.Binop):
        return (5, t.op, sort_key(t.lhs), sort_key(t.rhs))
    raise TypeError(f"not a constant expression: {t!r}")


def is_total(t) -> bool:
    """No division or log2 anywhere, so evaluation can never be unsafe."""
    for n in T.walk(t):
        if isinstance(n, T.Binop) and n.op in _DIVS:
            return False
        if isinstance(n, T.Fun) and n.name == "log2":
            return False
    return True


def unop_count(t) -> int:
    return sum(1 for n in T.walk(t) if isinstance(n, T.Unop))


def has_sym(t) -> bool:
    return any(isinstance(n, T.Sym) for n in T.walk(t))


def _lit(t, *values) -> bool:
    return isinstance(t, T.Lit) and t.value in values


def _flatten(op, t):
    if isinstance(t, T.Binop) and t.op == op:
        return _flatten(op, t.lhs) + _flatten(op, t.rhs)
    return [t]


def canonicalize(t):
    """Normal form of a constant expression; idempotent."""
    if isinstance(t, (T.Sym, T.Lit, T.Width)):
        return t
    if isinstance(t, T.Unop):
        a = canonicalize(t.arg)
        if isinstance(a, T.Unop) and a.op == t.op:
            return a.arg
        if isinstance(a, T.Lit):
            return T.Lit(-a.value if t.op == "neg" else ~a.value)
        return T.Unop(t.op, a)
    if isinstance(t, T.Fun):
        return T.Fun(t.name, canonicalize(t.arg))
    if not isinstance(t, T.Binop):
        raise TypeError(f"not a constant expression: {t!r}")
    a, b = canonicalize(t.lhs), canonicalize(t.rhs)
    op = t.op
    # operations that are really a unary operator
    if (op == "mul" and _lit(b, -1)) or (op == "sub" and _lit(a, 0)) or (op == "sdiv" and _lit(b, -1)):
        return canonicalize(T.Unop("neg", a if op != "sub" else b))
    if op == "mul" and _lit(a, -1):
        return canonicalize(T.Unop("neg", b))
    if op == "xor" and (_lit(a, -1) or _lit(b, -1)):
        return canonicalize(T.Unop("not", b if _lit(a, -1) else a))
    if op == "sub" and _lit(a, -1):
        return canonicalize(T.Unop("not", b))
    if op == "srem" and _lit(b, -1) and is_total(a):
        return T.Lit(0)
    if op == "sub" and isinstance(b, T.Lit) and b.value != 0:
        return canonicalize(T.Binop("add", a, T.Lit(-b.value)))
    if op in T.COMMUTATIVE:
        return _canon_assoc(op, _flatten(op, a) + _flatten(op, b))
    if op == "sub":
        if _lit(b, 0):
            return a
        if a == b and is_total(a):
            return T.Lit(0)
    if op in _SHIFTS:
        if _lit(b, 0):
            return a
        if _lit(a, 0) and is_total(b):
            return T.Lit(0)
    if op in ("udiv", "sdiv") and _lit(b, 1):
        return a
    if op in ("urem", "srem") and _lit(b, 1) and is_total(a):
        return T.Lit(0)
    return T.Binop(op, a, b)


def _canon_assoc(op, operands):
    ops = sorted(operands, key=sort_key)
    identity = {"add": 0, "mul": 1, "or": 0, "xor": 0, "and": -1}[op]
    absorbing = {"mul": 0, "and": 0, "or": -1}.get(op)
    if absorbing is not None and any(_lit(x, absorbing) for x in ops):
        # total operands cannot change the result; partial ones still carry their safety
        ops = sorted([T.Lit(absorbing)] + [x for x in ops if not is_total(x)], key=sort_key)
        if len(ops) == 1:
            return ops[0]
    ops = [x for x in ops if not _lit(x, identity)]
    if op in ("and", "or"):
        ops = [x for i, x in enumerate(ops) if i == 0 or x != ops[i - 1] or not is_total(x)]
    if op == "xor":
        kept = []
        for x in ops:
            if kept and kept[-1] == x and is_total(x):
                kept.pop()
            else:
                kept.append(x)
        ops = kept
    if not ops:
        return T.Lit(identity)
    out = ops[0]
    for x in ops[1:]:
        out = T.Binop(op, out, x)
    return out


def canonical_atom(p):
    """Normal form of a comparison or predicate-function atom, with its polarity.

    Returns ``(atom, negated)`` where the atom uses only ``==``, ``u<`` or ``<``.
    """
    if isinstance(p, T.PFun):
        return T.PFun(p.name, canonicalize(p.arg)), False
    if not isinstance(p, T.Cmp):
        raise TypeError(f"not an atom: {p!r}")
    a, b = canonicalize(p.lhs), canonicalize(p.rhs)
    c = p.cond
    swap = {"ugt": ("ult", True, False), "uge": ("ult", False, True), "ule": ("ult", True, True),
            "sgt": ("slt", True, False), "sge": ("slt", False, True), "sle": ("slt", True, True),
            "ne": ("eq", False, True)}
    negated = False
    if c in swap:
        c, flip, negated = swap[c]
        if flip:
            a, b = b, a
    if c == "eq":
        # injective unary operators cancel across an equality
        while isinstance(a, T.Unop) and isinstance(b, T.Unop) and a.op == b.op:
            a, b = a.arg, b.arg
        if isinstance(b, T.Unop) and isinstance(a, T.Lit):
            a, b = b, a
        if isinstance(a, T.Unop) and isinstance(b, T.Lit):
            a, b = a.arg, T.Lit(-b.value if a.op == "neg" else ~b.value)
        # literals go on the right
        if (isinstance(a, T.Lit), sort_key(a)) > (isinstance(b, T.Lit), sort_key(b)):
            a, b = b, a
    elif isinstance(a, T.Unop) and isinstance(b, T.Unop) and a.op == b.op == "not":
        # bitwise not reverses both orders
        a, b = b.arg, a.arg
    if c == "ult":
        if _lit(b, 1):
            return canonical_atom(T.Cmp("eq", a, T.Lit(0)))[0], negated
        if _lit(b, -1):
            return canonical_atom(T.Cmp("eq", a, T.Lit(-1)))[0], not negated
        if _lit(a, 0):
            return canonical_atom(T.Cmp("eq", b, T.Lit(0)))[0], not negated
    return T.Cmp(c, a, b), negated


def _useful_binop(op, a, b) -> bool:
    if not (has_sym(a) or has_sym(b)):
        return False
    if op in _DIVS and (_lit(b, 0) or _lit(a, 0)):
        return False    # always unsafe, or zero wherever safe
    if op in _SHIFTS and _lit(b, -1):
        return False    # always shifts everything out
    return True


def optimization_literals(opt: Optimization) -> list:
    found = []
    for n in opt.nodes:
        if isinstance(n, Literal):
            found.append(n.value)
        elif isinstance(n, ConstExpr):
            found.extend(x.value for x in T.walk(n.term) if isinstance(x, T.Lit))
    for p in ([opt.pre] if opt.pre is not None else []) + list(opt.assumptions):
        found.extend(x.value for x in T.walk(p) if isinstance(x, T.Lit))
    return found


class Enumerator:
    """Stream of distinct type-correct predicates in nondecreasing weight."""

    def __init__(self, opt: Optimization, extra_literals=(), max_weight: int = 12):
        model = opt.types
        self.classes = []
        self.syms = {}
        for c in opt.consts:
            cls = model.name_class[c]
            if cls not in self.syms:
                self.classes.append(cls)
                self.syms[cls] = []
            self.syms[cls].append(T.Sym(c))
        pool = [0, 1, -1]
        for v in list(optimization_literals(opt)) + list(extra_literals):
            if v not in pool:
                pool.append(v)
        self.literals = [T.Lit(v) for v in pool]
        # one named value per free type variable, when types can differ
        reps = {}
        for name, cls in model.name_class.items():
            if cls in model.fixed or cls in reps:
                continue
            reps[cls] = name
        self.width_leaves = [T.Width(n) for n in reps.values()] if len(reps) >= 2 else []
        self.max_weight = max_weight
        self._cexprs = {cls: {} for cls in self.classes}
        self._seen_cexpr = {cls: set() for cls in self.classes}
        self._seen_atoms = set()
        self._stream = self._generate()
        self._cache = []
        self.emitted = 0

    def __iter__(self):
        return self

    def __next__(self) -> WeightedPredicate:
        if self.emitted < len(self._cache):
            wp = self._cache[self.emitted]
        else:
            wp = next(self._stream)
            self._cache.append(wp)
        self.emitted += 1
        return wp

    next_predicate = __next__

    @property
    def emitted_total(self) -> int:
        """Distinct predicates generated so far, by any consumer."""
        return len(self._cache)

    def replay(self):
        """Iterate the whole stream from the start, generating lazily past what is cached."""
        i = 0
        while True:
            if i < len(self._cache):
                yield self._cache[i]
            else:
                try:
                    wp = next(self._stream)
                except StopIteration:
                    return
                self._cache.append(wp)
                yield wp
            i += 1

    # expressions of one type class at one weight with a given unary-operator count
    def cexprs(self, cls, w: int, u: int = 0) -> list:
        table = self._cexprs[cls]
        if (w, u) in table:
            return table[(w, u)]
        seen = self._seen_cexpr[cls]
        out = []

        def emit(t):
            c = canonicalize(t)
            if weight_of(c) == w and unop_count(c) == u and c not in seen:
                seen.add(c)
                out.append(c)

        if u == 0 and w == 1:
            for t in self.syms[cls] + self.literals:
                emit(t)
        if u == 0 and w == 2:
            for t in self.width_leaves:
                emit(t)
        for wa in range(1, w):
            for ua in range(u + 1):
                left, right = self.cexprs(cls, wa, ua), self.cexprs(cls, w - wa, u - ua)
                for op in ENUM_BINOPS:
                    for a in left:
                        for b in right:
                            if _useful_binop(op, a, b):
                                emit(T.Binop(op, a, b))
        if w >= 2:
            for a in self.cexprs(cls, w - 1, u):
                if has_sym(a):
                    emit(T.Fun("abs", a))
                    emit(T.Fun("log2", a))
        if u >= 1:
            for a in self.cexprs(cls, w, u - 1):
                if has_sym(a) and not isinstance(a, T.Unop):
                    emit(T.Unop("neg", a))
                    emit(T.Unop("not", a))
        table[(w, u)] = out
        return out

    def _atom(self, p):
        atom, _ = canonical_atom(p)
        if atom in self._seen_atoms:
            return None
        self._seen_atoms.add(atom)
        return atom

    def _generate(self):
        for w in range(2, self.max_weight + 1):
            # a tree with w leaves has at most 2w - 1 nodes, each carrying at most one unary operator
            for u in range(0, 2 * w):
                for cls in self.classes:
                    yield from self._comparisons(cls, w, u)
                    for a in self.cexprs(cls, w - 1, u):
                        if not has_sym(a):
                            continue
                        for name in T.PFUNS:
                            atom = self._atom(T.PFun(name, a))
                            if atom is not None and weight_of(atom) == w:
                                yield WeightedPredicate(atom, w)

    def _comparisons(self, cls, w, u):
        for wa in range(1, w):
            for ua in range(u + 1):
                left = self.cexprs(cls, wa, ua)
                right = self.cexprs(cls, w - wa, u - ua)
                for a in left:
                    for b in right:
                        if a == b or not (has_sym(a) or has_sym(b)):
                            continue
                        for cond in ENUM_CONDS:
                            if cond == "ult" and (_lit(b, 0) or _lit(a, -1)):
                                continue    # constant false
                            atom = self._atom(T.Cmp(cond, a, b))
                            if atom is not None and weight_of(atom) == w:
                                yield WeightedPredicate(atom, w)
