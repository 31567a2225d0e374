"""Random constant expressions and predicates over C1, C2."""
import random

import numpy as np
from hypothesis import strategies as st

from peepre import terms as T
from peepre.semantics import Env

SYMS = ("C1", "C2")
BINOPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr", "udiv", "sdiv", "urem", "srem")
CONDS = tuple(T.COND_SYMBOLS)
LITS = (0, 1, 2, -1, 7, 8)


def random_cexpr(rng: random.Random, depth: int = 3):
    r = rng.random()
    if depth == 0 or r < 0.3:
        return T.Sym(rng.choice(SYMS)) if rng.random() < 0.7 else T.Lit(rng.choice(LITS))
    if r < 0.45:
        return T.Unop(rng.choice(T.UNOPS), random_cexpr(rng, depth - 1))
    if r < 0.55:
        return T.Fun(rng.choice(T.CFUNS), random_cexpr(rng, depth - 1))
    return T.Binop(rng.choice(BINOPS), random_cexpr(rng, depth - 1), random_cexpr(rng, depth - 1))


def random_pred(rng: random.Random, depth: int = 3):
    r = rng.random()
    if depth == 0 or r < 0.4:
        if rng.random() < 0.8:
            return T.Cmp(rng.choice(CONDS), random_cexpr(rng, 2), random_cexpr(rng, 2))
        return T.PFun(rng.choice(T.PFUNS), random_cexpr(rng, 2))
    if r < 0.55:
        return T.Not(random_pred(rng, depth - 1))
    if r < 0.6:
        return T.BoolConst(rng.random() < 0.5)
    kind = T.And if r < 0.8 else T.Or
    return kind(tuple(random_pred(rng, depth - 1) for _ in range(rng.randint(2, 3))))


def grid_env(w: int = 4) -> Env:
    """Every (C1, C2) pair at width ``w``."""
    c1, c2 = np.meshgrid(np.arange(1 << w), np.arange(1 << w), indexing="ij")
    return Env(widths={"C1": w, "C2": w}, values={"C1": c1.reshape(-1), "C2": c2.reshape(-1)},
               default_width=w)


leaves = st.one_of(st.sampled_from(SYMS).map(T.Sym), st.sampled_from(LITS).map(T.Lit))

cexprs = st.recursive(
    leaves,
    lambda sub: st.one_of(
        st.builds(T.Unop, st.sampled_from(T.UNOPS), sub),
        st.builds(T.Fun, st.sampled_from(T.CFUNS), sub),
        st.builds(T.Binop, st.sampled_from(BINOPS), sub, sub)),
    max_leaves=6)

atoms = st.one_of(st.builds(T.Cmp, st.sampled_from(CONDS), cexprs, cexprs),
                  st.builds(T.PFun, st.sampled_from(T.PFUNS), cexprs))

preds = st.recursive(
    atoms,
    lambda sub: st.one_of(
        st.builds(T.Not, sub),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: T.And(tuple(xs))),
        st.lists(sub, min_size=2, max_size=3).map(lambda xs: T.Or(tuple(xs)))),
    max_leaves=5)
