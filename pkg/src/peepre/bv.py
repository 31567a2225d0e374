"""Width-aware bitvector arithmetic over numpy arrays.

Values are unsigned integers in ``[0, 2**w)``.  Widths up to 31 bits use
``int64`` arrays (products of two operands still fit); wider values fall back
to ``object`` arrays of Python ints, which is slow but exact.
"""
from __future__ import annotations

import numpy as np

MAX_FAST_WIDTH = 31


def dtype_for(w: int):
    return np.int64 if w <= MAX_FAST_WIDTH else object


def mask(w: int) -> int:
    return (1 << w) - 1


def smin(w: int) -> int:
    return 1 << (w - 1)


def asarray(x, w: int) -> np.ndarray:
    """Coerce a scalar or array to the storage dtype for width ``w``."""
    a = np.asarray(x)
    dt = dtype_for(w)
    if a.dtype != dt:
        if dt is object:
            a = np.array([int(v) for v in a.ravel()], dtype=object).reshape(a.shape)
        else:
            a = a.astype(np.int64)
    return a


def const(value: int, w: int, shape=()) -> np.ndarray:
    v = value & mask(w)
    if dtype_for(w) is object:
        out = np.empty(shape, dtype=object)
        out[...] = v
        return out
    return np.full(shape, v, dtype=np.int64)


def wrap(a, w: int):
    return a & mask(w)


def to_signed(a, w: int):
    return a - ((a >> (w - 1)) & 1) * (1 << w)


def _bool(a) -> np.ndarray:
    return np.asarray(a).astype(bool)


def _shift_amount(b, w: int):
    """Shift amounts clipped to a safe range, plus the in-range mask."""
    ok = _bool(b < w)
    return np.where(ok, b, 0), ok


# -- arithmetic ------------------------------------------------------------

def add(a, b, w):
    return wrap(a + b, w)


def sub(a, b, w):
    return wrap(a - b, w)


def mul(a, b, w):
    return wrap(a * b, w)


def neg(a, w):
    return wrap(-a, w)


def bnot(a, w):
    return a ^ mask(w)


def band(a, b, w):
    return a & b


def bor(a, b, w):
    return a | b


def bxor(a, b, w):
    return a ^ b


def _safe_div(b):
    return np.where(_bool(b == 0), 1, b)


def udiv(a, b, w):
    return np.where(_bool(b == 0), mask(w), a // _safe_div(b))


def urem(a, b, w):
    return np.where(_bool(b == 0), a, a % _safe_div(b))


def _sdivrem(a, b, w):
    sa, sb = to_signed(a, w), to_signed(b, w)
    sb1 = _safe_div(sb)
    abs_a = np.where(_bool(sa < 0), -sa, sa)
    abs_b = np.where(_bool(sb1 < 0), -sb1, sb1)
    q = abs_a // abs_b
    negq = _bool((sa < 0) != (sb1 < 0))
    q = np.where(negq, -q, q)
    r = sa - sb1 * q
    return q, r


def sdiv(a, b, w):
    q, _ = _sdivrem(a, b, w)
    return np.where(_bool(b == 0), mask(w), wrap(q, w))


def srem(a, b, w):
    _, r = _sdivrem(a, b, w)
    return np.where(_bool(b == 0), a, wrap(r, w))


def shl(a, b, w):
    s, ok = _shift_amount(b, w)
    return np.where(ok, wrap(a << s, w), 0)


def lshr(a, b, w):
    s, ok = _shift_amount(b, w)
    return np.where(ok, a >> s, 0)


def ashr(a, b, w):
    s, ok = _shift_amount(b, w)
    sa = to_signed(a, w)
    fill = np.where(_bool(sa < 0), mask(w), 0)
    return np.where(ok, wrap(sa >> s, w), fill)


BINOPS = {
    "add": add, "sub": sub, "mul": mul,
    "udiv": udiv, "sdiv": sdiv, "urem": urem, "srem": srem,
    "shl": shl, "lshr": lshr, "ashr": ashr,
    "and": band, "or": bor, "xor": bxor,
}

# -- undefined-behaviour side conditions (True means defined) --------------

def _in_signed_range(x, w):
    return _bool((x >= -(1 << (w - 1))) & (x <= (1 << (w - 1)) - 1))


def divisor_ok(op, a, b, w):
    nonzero = _bool(b != 0)
    if op in ("sdiv", "srem"):
        overflow = _bool((a == smin(w)) & (b == mask(w)))
        return nonzero & ~overflow
    return nonzero


def flag_ok(op, flag, a, b, w):
    """Definedness contribution of a single ``nuw``/``nsw``/``exact`` flag."""
    if flag == "nuw":
        if op == "add":
            return _bool(a + b <= mask(w))
        if op == "sub":
            return _bool(a >= b)
        if op == "mul":
            return _bool(a * b <= mask(w))
        if op == "shl":
            s, ok = _shift_amount(b, w)
            return ~ok | _bool(wrap(a << s, w) >> s == a)
    if flag == "nsw":
        sa, sb = to_signed(a, w), to_signed(b, w)
        if op == "add":
            return _in_signed_range(sa + sb, w)
        if op == "sub":
            return _in_signed_range(sa - sb, w)
        if op == "mul":
            return _in_signed_range(sa * sb, w)
        if op == "shl":
            s, ok = _shift_amount(b, w)
            back = to_signed(wrap(a << s, w), w) >> s
            return ~ok | _bool(back == sa)
    if flag == "exact":
        if op in ("udiv", "sdiv"):
            rem = urem(a, b, w) if op == "udiv" else srem(a, b, w)
            return _bool(rem == 0)
        if op in ("lshr", "ashr"):
            s, ok = _shift_amount(b, w)
            return ~ok | _bool(a & ((1 << s) - 1) == 0)
    raise ValueError(f"flag {flag} not valid on {op}")


# -- comparisons -------------------------------------------------------------

def compare(cond, a, b, w) -> np.ndarray:
    if cond in ("slt", "sle", "sgt", "sge"):
        a, b = to_signed(a, w), to_signed(b, w)
    if cond == "eq":
        r = a == b
    elif cond == "ne":
        r = a != b
    elif cond in ("ult", "slt"):
        r = a < b
    elif cond in ("ule", "sle"):
        r = a <= b
    elif cond in ("ugt", "sgt"):
        r = a > b
    elif cond in ("uge", "sge"):
        r = a >= b
    else:
        raise ValueError(f"unknown condition {cond}")
    return _bool(r)


# -- constant functions ------------------------------------------------------

def babs(a, w):
    sa = to_signed(a, w)
    return wrap(np.where(_bool(sa < 0), -sa, sa), w)


def log2(a, w):
    """Floor of log2; 0 for a zero argument (callers gate on safety)."""
    out = np.zeros_like(a)
    for bit in range(1, w):
        out = np.where(_bool(a >> bit != 0), bit, out)
    return out


def is_power_of_2(a, w):
    return _bool(a != 0) & _bool((a & wrap(a - 1, w)) == 0)


def is_power_of_2_or_zero(a, w):
    return _bool((a & wrap(a - 1, w)) == 0)


def is_sign_bit(a, w):
    return _bool(a == smin(w))


# -- casts -------------------------------------------------------------------

def zext(a, w_from, w_to):
    return asarray(a, w_to)


def sext(a, w_from, w_to):
    return wrap(asarray(to_signed(a, w_from), w_to), w_to)


def trunc(a, w_from, w_to):
    return asarray(wrap(a, w_to), w_to)
