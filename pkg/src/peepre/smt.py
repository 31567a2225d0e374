"""External-solver backend speaking SMT-LIB v2 over a child process's standard streams.

Each query runs between ``(push)`` and ``(pop)`` in one long-lived solver
process and issues a single ``(check-sat)``.  Models are read back with
``(get-value ...)``.  The backend answers the same questions as
``verify.ExhaustiveBackend``.
"""
from __future__ import annotations

import os
import select
import shlex
import shutil
import subprocess
import time

import numpy as np

from . import bv
from . import terms as T
from .dsl import ConstExpr, Input, Instr, Literal, Optimization, SymConst
from .examples import BackendUnknown, Example, Label
from .semantics import UNSAFE, DagEval, env_for, eval_predicate
from .verify import CounterExample, MissedPositive, Valid, Weakest

DEFAULT_COMMAND = "z3 -in -smt2"


def solver_available(command: str = DEFAULT_COMMAND) -> bool:
    parts = shlex.split(command)
    return bool(parts) and shutil.which(parts[0]) is not None


# -- s-expression helpers ------------------------------------------------------

def _bv(value: int, w: int) -> str:
    return f"(_ bv{value & bv.mask(w)} {w})"


def _and(*xs) -> str:
    xs = [x for x in xs if x != "true"]
    if "false" in xs:
        return "false"
    if not xs:
        return "true"
    return xs[0] if len(xs) == 1 else f"(and {' '.join(xs)})"


def _or(*xs) -> str:
    xs = [x for x in xs if x != "false"]
    if "true" in xs:
        return "true"
    if not xs:
        return "false"
    return xs[0] if len(xs) == 1 else f"(or {' '.join(xs)})"


def _not(x: str) -> str:
    return {"true": "false", "false": "true"}.get(x, f"(not {x})")


def _resize(x: str, src: int, dst: int) -> str:
    if src == dst:
        return x
    if src > dst:
        return f"((_ extract {dst - 1} 0) {x})"
    return f"((_ zero_extend {dst - src}) {x})"


def _read_sexpr(text: str):
    """Parse one s-expression into nested lists of atom strings."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            out = []
            while tokens[pos] != ")":
                out.append(parse())
            pos += 1
            return out
        return tok

    return parse()


def _bv_value(v) -> int:
    if isinstance(v, list):               # (_ bvN w)
        return int(v[1][2:])
    if v.startswith("#b"):
        return int(v[2:], 2)
    if v.startswith("#x"):
        return int(v[2:], 16)
    raise ValueError(f"unexpected model value {v!r}")


_CMP = {"eq": "=", "ult": "bvult", "ule": "bvule", "ugt": "bvugt", "uge": "bvuge",
        "slt": "bvslt", "sle": "bvsle", "sgt": "bvsgt", "sge": "bvsge"}
_BINOP = {"add": "bvadd", "sub": "bvsub", "mul": "bvmul", "and": "bvand", "or": "bvor",
          "xor": "bvxor", "udiv": "bvudiv", "sdiv": "bvsdiv", "urem": "bvurem", "srem": "bvsrem",
          "shl": "bvshl", "lshr": "bvlshr", "ashr": "bvashr"}


# -- encoder ------------------------------------------------------------------------

class Encoder:
    """Translates terms and the rewrite DAG for one type assignment.

    ``rename`` maps value names to the solver symbols standing for them, so the
    same DAG can be encoded over several copies of the runtime inputs.
    """

    def __init__(self, opt: Optimization, assignment: tuple, rename=None):
        self.opt = opt
        self.widths = opt.types.name_widths(assignment)
        self.node_widths = opt.types.node_widths(assignment)
        self.default = max(self.widths.values(), default=1)
        self.rename = rename or {}
        self._val, self._def = {}, {}

    def sym(self, name: str) -> str:
        return self.rename.get(name, _symbol(name))

    # constant expressions: (value, safe)
    def cexpr_width(self, t) -> int:
        for n in T.walk(t):
            if isinstance(n, T.Sym):
                return self.widths[n.name]
        return self.default

    def cexpr(self, t, w: int):
        if isinstance(t, T.Sym):
            return _resize(self.sym(t.name), self.widths[t.name], w), "true"
        if isinstance(t, T.Lit):
            return _bv(t.value, w), "true"
        if isinstance(t, T.Width):
            return _bv(self.widths[t.name], w), "true"
        if isinstance(t, T.Unop):
            a, ok = self.cexpr(t.arg, w)
            return f"({'bvneg' if t.op == 'neg' else 'bvnot'} {a})", ok
        if isinstance(t, T.Fun):
            a, ok = self.cexpr(t.arg, w)
            if t.name == "abs":
                return f"(ite (bvslt {a} {_bv(0, w)}) (bvneg {a}) {a})", ok
            # the highest set bit wins, so it is tested outermost
            out = _bv(0, w)
            for bit in range(1, w):
                out = f"(ite (bvuge {a} {_bv(1 << bit, w)}) {_bv(bit, w)} {out})"
            return out, _and(ok, f"(not (= {a} {_bv(0, w)}))")
        if isinstance(t, T.Binop):
            a, oka = self.cexpr(t.lhs, w)
            b, okb = self.cexpr(t.rhs, w)
            ok = _and(oka, okb)
            if t.op in ("udiv", "sdiv", "urem", "srem"):
                ok = _and(ok, f"(not (= {b} {_bv(0, w)}))")
            return f"({_BINOP[t.op]} {a} {b})", ok
        raise TypeError(f"not a constant expression: {t!r}")

    # predicates: (accept, reject, unsafe) as mutually exclusive booleans
    def pred(self, t):
        if isinstance(t, T.BoolConst):
            return ("true", "false", "false") if t.value else ("false", "true", "false")
        if isinstance(t, T.Cmp):
            w = self.cexpr_width(T.Binop("add", t.lhs, t.rhs))
            a, oka = self.cexpr(t.lhs, w)
            b, okb = self.cexpr(t.rhs, w)
            return self._tri(_and(oka, okb), self._cmp(t.cond, a, b))
        if isinstance(t, T.PFun):
            w = self.cexpr_width(t.arg)
            a, ok = self.cexpr(t.arg, w)
            zero = _bv(0, w)
            low = f"(= (bvand {a} (bvsub {a} {_bv(1, w)})) {zero})"
            truth = {"isPowerOf2": _and(f"(not (= {a} {zero}))", low),
                     "isPowerOf2OrZero": low,
                     "isSignBit": f"(= {a} {_bv(bv.smin(w), w)})"}[t.name]
            return self._tri(ok, truth)
        if isinstance(t, T.Not):
            acc, rej, uns = self.pred(t.arg)
            return rej, acc, uns
        if isinstance(t, (T.And, T.Or)):
            is_and = isinstance(t, T.And)
            out = self.pred(t.args[-1])
            for arg in reversed(t.args[:-1]):
                acc, rej, uns = self.pred(arg)
                if is_and:
                    out = (_and(acc, out[0]), _or(rej, _and(acc, out[1])), _or(uns, _and(acc, out[2])))
                else:
                    out = (_or(acc, _and(rej, out[0])), _and(rej, out[1]), _or(uns, _and(rej, out[2])))
            return out
        raise TypeError(f"not a predicate: {t!r}")

    @staticmethod
    def _tri(ok, truth):
        return _and(ok, truth), _and(ok, _not(truth)), _not(ok)

    @staticmethod
    def _cmp(cond, a, b):
        if cond == "ne":
            return f"(not (= {a} {b}))"
        return f"({_CMP[cond]} {a} {b})"

    def accepts(self, t) -> str:
        return self.pred(t)[0]

    # DAG
    def value(self, nid: int) -> str:
        if nid not in self._val:
            self._val[nid] = self._value(nid)
        return self._val[nid]

    def _value(self, nid):
        node = self.opt.nodes[nid]
        w = self.node_widths[nid]
        if isinstance(node, (Input, SymConst)):
            return self.sym(node.name)
        if isinstance(node, Literal):
            return _bv(node.value, w)
        if isinstance(node, ConstExpr):
            return self.cexpr(node.term, w)[0]
        args = [self.value(a) for a in node.args]
        op = node.opcode
        if op in _BINOP:
            return f"({_BINOP[op]} {args[0]} {args[1]})"
        if op == "icmp":
            return f"(ite {self._cmp(node.cond, args[0], args[1])} #b1 #b0)"
        if op == "select":
            return f"(ite (= {args[0]} #b1) {args[1]} {args[2]})"
        if op == "copy":
            return args[0]
        src = self.node_widths[node.args[0]]
        if op == "zext":
            return f"((_ zero_extend {w - src}) {args[0]})"
        if op == "sext":
            return f"((_ sign_extend {w - src}) {args[0]})"
        return f"((_ extract {w - 1} 0) {args[0]})"

    def defined(self, nid: int) -> str:
        if nid not in self._def:
            self._def[nid] = self._defined(nid)
        return self._def[nid]

    def _defined(self, nid):
        node = self.opt.nodes[nid]
        if not isinstance(node, Instr):
            return "true"
        parts = [self.defined(a) for a in node.args]
        op, w = node.opcode, self.node_widths[nid]
        if op in _BINOP:
            a, b = self.value(node.args[0]), self.value(node.args[1])
            zero = _bv(0, w)
            if op in ("udiv", "sdiv", "urem", "srem"):
                parts.append(f"(not (= {b} {zero}))")
                if op in ("sdiv", "srem"):
                    parts.append(f"(not (and (= {a} {_bv(bv.smin(w), w)}) (= {b} {_bv(-1, w)})))")
            if op in ("shl", "lshr", "ashr"):
                parts.append(f"(bvult {b} {_bv(w, w)})")
            for f in node.flags:
                parts.append(self._flag(op, f, a, b, w))
        return _and(*parts)

    @staticmethod
    def _flag(op, flag, a, b, w):
        zx = lambda x: f"((_ zero_extend {w}) {x})"
        sx = lambda x: f"((_ sign_extend {w}) {x})"
        if flag == "nuw":
            if op == "add":
                return f"(bvule (bvadd {zx(a)} {zx(b)}) {_bv(bv.mask(w), 2 * w)})"
            if op == "sub":
                return f"(bvuge {a} {b})"
            if op == "mul":
                return f"(bvule (bvmul {zx(a)} {zx(b)}) {_bv(bv.mask(w), 2 * w)})"
            if op == "shl":
                return f"(or (bvuge {b} {_bv(w, w)}) (= (bvlshr (bvshl {a} {b}) {b}) {a}))"
        if flag == "nsw":
            if op in ("add", "sub", "mul"):
                full = f"({_BINOP[op]} {sx(a)} {sx(b)})"
                return f"(= {full} {sx(f'({_BINOP[op]} {a} {b})')})"
            if op == "shl":
                return f"(or (bvuge {b} {_bv(w, w)}) (= (bvashr (bvshl {a} {b}) {b}) {a}))"
        if flag == "exact":
            if op == "udiv":
                return f"(= (bvurem {a} {b}) {_bv(0, w)})"
            if op == "sdiv":
                return f"(= (bvsrem {a} {b}) {_bv(0, w)})"
            if op in ("lshr", "ashr"):
                return f"(or (bvuge {b} {_bv(w, w)}) (= (bvshl ({_BINOP[op]} {a} {b}) {b}) {a}))"
        raise ValueError(f"flag {flag} not valid on {op}")

    def target_safe(self) -> str:
        return _and(*(self.cexpr(n.term, self.node_widths[i])[1]
                      for i, n in enumerate(self.opt.nodes) if isinstance(n, ConstExpr)))

    def refinement(self) -> str:
        s, t = self.opt.source_root, self.opt.target_root
        same = f"(= {self.value(s)} {self.value(t)})"
        return _and(self.target_safe(), _or(_not(self.defined(s)), _and(self.defined(t), same)))

    def source_defined(self) -> str:
        return self.defined(self.opt.source_root)


def _symbol(name: str) -> str:
    return "|" + name + "|"


# -- solver process ---------------------------------------------------------------

class SolverProcess:
    """A long-lived interactive solver.  A timed-out query kills the process."""

    def __init__(self, command: str, timeout: float, seed: int = 0):
        self.command = command
        self.timeout = timeout
        self.seed = seed
        self._proc = None
        self._buf = b""

    def _start(self):
        self._proc = subprocess.Popen(shlex.split(self.command), stdin=subprocess.PIPE,
                                      stdout=subprocess.PIPE, stderr=subprocess.DEVNULL)
        self._buf = b""
        self.send("(set-option :print-success false)", f"(set-option :random-seed {self.seed})",
                  "(set-option :produce-models true)")

    def close(self):
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def send(self, *commands):
        if self._proc is None:
            self._start()
        self._proc.stdin.write(("\n".join(commands) + "\n").encode())
        self._proc.stdin.flush()

    def _read_response(self, deadline) -> str:
        """One complete s-expression or atom from the solver's output."""
        fd = self._proc.stdout.fileno()
        while True:
            text = self._buf.decode(errors="replace")
            stripped = text.lstrip()
            if stripped:
                if stripped[0] != "(":
                    if "\n" in stripped:
                        line, _, rest = stripped.partition("\n")
                        self._buf = rest.encode()
                        return line.strip()
                else:
                    depth = 0
                    for i, ch in enumerate(stripped):
                        depth += ch == "("
                        depth -= ch == ")"
                        if depth == 0:
                            self._buf = stripped[i + 1:].encode()
                            return stripped[:i + 1]
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.close()
                raise BackendUnknown("solver timeout")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                self.close()
                raise BackendUnknown("solver exited")
            self._buf += chunk

    def check(self, declarations, assertions, get=()):
        """Run one query; returns ('sat', values) or ('unsat', None)."""
        deadline = time.monotonic() + self.timeout
        self.send("(push 1)", *declarations, *(f"(assert {a})" for a in assertions), "(check-sat)")
        try:
            status = self._read_response(deadline)
            if status.startswith("(error"):
                raise BackendUnknown(f"solver error: {status}")
            values = None
            if status == "sat" and get:
                self.send(f"(get-value ({' '.join(get)}))")
                reply = self._read_response(deadline)
                if reply.startswith("(error"):
                    raise BackendUnknown(f"solver error: {reply}")
                values = {k: _bv_value(v) for k, v in _read_sexpr(reply)}
            if status not in ("sat", "unsat"):
                raise BackendUnknown(f"solver answered {status}")
            return status, values
        finally:
            if self._proc is not None:
                self.send("(pop 1)")


# -- backend ---------------------------------------------------------------------------

class SmtBackend:
    name = "smt"

    def __init__(self, widths=(4, 8), command: str = DEFAULT_COMMAND, timeout: float = 30.0,
                 seed: int = 0):
        self.widths = tuple(widths)
        self.solver = SolverProcess(command, timeout, seed)

    def close(self):
        self.solver.close()

    def assignments(self, opt: Optimization) -> list:
        return list(opt.types.assignments(self.widths))

    # declarations
    @staticmethod
    def _decls(names, widths, prefix=""):
        return [f"(declare-fun {_symbol(prefix + n)} () (_ BitVec {widths[n]}))" for n in names]

    def _const_decls(self, opt, a):
        return self._decls(opt.consts, opt.types.name_widths(a))

    def _runtime_decls(self, opt, a, prefix=""):
        return self._decls(opt.inputs, opt.types.name_widths(a), prefix)

    @staticmethod
    def _renamed(opt, prefix):
        return {r: _symbol(prefix + r) for r in opt.inputs}

    def _bound(self, opt, a, prefix):
        widths = opt.types.name_widths(a)
        return " ".join(f"({_symbol(prefix + r)} (_ BitVec {widths[r]}))" for r in opt.inputs)

    def _forall(self, opt, a, prefix, body):
        if not opt.inputs:
            return body
        return f"(forall ({self._bound(opt, a, prefix)}) {body})"

    def _exists(self, opt, a, prefix, body):
        if not opt.inputs:
            return body
        return f"(exists ({self._bound(opt, a, prefix)}) {body})"

    def _assumed(self, enc):
        return [enc.accepts(p) for p in enc.opt.assumptions]

    def _fix_consts(self, opt, a, e: Example):
        widths = opt.types.name_widths(a)
        return [f"(= {_symbol(c)} {_bv(v, widths[c])})" for c, v in zip(opt.consts, e.values)]

    def _example(self, opt, a, values, label=Label.UNCLASSIFIED):
        return Example(a, tuple(values[_symbol(c)] for c in opt.consts), label)

    # queries
    def classify_examples(self, opt: Optimization, examples) -> list:
        out = []
        for e in examples:
            a = e.assignment
            enc = Encoder(opt, a)
            decls = self._const_decls(opt, a) + self._runtime_decls(opt, a)
            fixed = self._fix_consts(opt, a, e)
            status, _ = self.solver.check(decls, fixed + [enc.source_defined()])
            if status == "unsat":
                out.append(e.with_label(Label.TRIVIAL))
                continue
            status, _ = self.solver.check(decls, fixed + [_not(enc.refinement())])
            out.append(e.with_label(Label.NEGATIVE if status == "sat" else Label.POSITIVE))
        return out

    def check_refinement(self, opt: Optimization, pre, reject_trivial: bool = False):
        for a in self.assignments(opt):
            enc = Encoder(opt, a)
            acc, _, uns = enc.pred(pre)
            bad = _or(uns, _and(acc, _not(enc.refinement())))
            if reject_trivial:
                inner = Encoder(opt, a, self._renamed(opt, "t!"))
                bad = _or(bad, _and(acc, self._forall(opt, a, "t!", _not(inner.source_defined()))))
            decls = self._const_decls(opt, a) + self._runtime_decls(opt, a)
            names = [_symbol(n) for n in opt.consts + opt.inputs]
            status, values = self.solver.check(decls, self._assumed(enc) + [bad], names)
            if status == "sat":
                e = self._example(opt, a, values)
                runtime = {r: values[_symbol(r)] for r in opt.inputs}
                return CounterExample(e.with_label(self._label(opt, e, runtime)), runtime,
                                      self._reason(opt, pre, e, runtime))
        return Valid()

    def _label(self, opt, e, runtime):
        return self.classify_examples(opt, [e])[0].label

    @staticmethod
    def _reason(opt, pre, e, runtime):
        env = env_for(opt, e.assignment, dict(zip(opt.consts, e.values)))
        if int(eval_predicate(pre, env)) == int(UNSAFE):
            return "precondition is unsafe"
        leaves = {k: np.asarray(v) for k, v in {**e.valuation(opt), **runtime}.items()}
        if bool(DagEval(opt, e.assignment, leaves).refinement()):
            return "accepts a trivial example"
        return "refinement fails"

    def _positive_query(self, opt, a):
        """Non-trivially defined source and refinement for every runtime input."""
        some = Encoder(opt, a, self._renamed(opt, "d!"))
        every = Encoder(opt, a, self._renamed(opt, "v!"))
        return [self._exists(opt, a, "d!", some.source_defined()),
                self._forall(opt, a, "v!", every.refinement())]

    def check_weakest(self, opt: Optimization, pre):
        for a in self.assignments(opt):
            enc = Encoder(opt, a)
            asserts = self._assumed(enc) + self._positive_query(opt, a) + [_not(enc.accepts(pre))]
            status, values = self.solver.check(self._const_decls(opt, a), asserts,
                                               [_symbol(c) for c in opt.consts])
            if status == "sat":
                return MissedPositive(self._example(opt, a, values, Label.POSITIVE))
        return Weakest()

    def weaker_than(self, opt: Optimization, pre_a, pre_b):
        for a in self.assignments(opt):
            enc = Encoder(opt, a)
            asserts = self._assumed(enc) + [enc.accepts(pre_a), _not(enc.accepts(pre_b))]
            status, values = self.solver.check(self._const_decls(opt, a), asserts,
                                               [_symbol(c) for c in opt.consts])
            if status == "sat":
                return self._example(opt, a, values)
        return None

    def find_examples(self, opt: Optimization, assignment: tuple, label: Label, k: int, seed: int = 0) -> list:
        a = assignment
        enc = Encoder(opt, a)
        decls = self._const_decls(opt, a)
        if label is Label.POSITIVE:
            query = self._positive_query(opt, a)
        else:
            some = Encoder(opt, a, self._renamed(opt, "d!"))
            decls = decls + self._runtime_decls(opt, a) + self._runtime_decls(opt, a, "d!")
            query = [some.source_defined(), _not(enc.refinement())]
        found, blocks = [], []
        widths = opt.types.name_widths(a)
        names = [_symbol(c) for c in opt.consts]
        while len(found) < k:
            status, values = self.solver.check(decls, self._assumed(enc) + query + blocks, names)
            if status != "sat":
                break
            e = self._example(opt, a, values, label)
            found.append(e)
            if not opt.consts:
                break
            blocks.append(_not(_and(*(f"(= {_symbol(c)} {_bv(values[_symbol(c)], widths[c])})"
                                      for c in opt.consts))))
        return found
