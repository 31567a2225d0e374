"""Textual rewrite format, DAG model and type checking.

A rewrite file looks like::

    Name: mul-udiv
    Pre: C2 % C1 == 0
    Assume: C1 != 0
    %m = mul nuw %X, C1
    %r = udiv %m, C2
    =>
    %r = udiv %X, C2 /u C1

``Name:``, ``Pre:`` and ``Assume:`` lines are optional.  Several rewrites may
share a file, each introduced by its own ``Name:`` line.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace

from . import terms as T

BINARY_OPCODES = ("add", "sub", "mul", "udiv", "sdiv", "urem", "srem",
                  "shl", "lshr", "ashr", "and", "or", "xor")
CAST_OPCODES = ("zext", "sext", "trunc")
OPCODES = BINARY_OPCODES + CAST_OPCODES + ("icmp", "select", "copy")
ALLOWED_FLAGS = {
    "add": {"nuw", "nsw"}, "sub": {"nuw", "nsw"}, "mul": {"nuw", "nsw"}, "shl": {"nuw", "nsw"},
    "udiv": {"exact"}, "sdiv": {"exact"}, "lshr": {"exact"}, "ashr": {"exact"},
}
ICMP_CONDS = ("eq", "ne", "ugt", "uge", "ult", "ule", "sgt", "sge", "slt", "sle")
DEFAULT_WIDTHS = (4, 8)
MAX_WIDTH = 64

_SYMCONST = re.compile(r"C\d+$")


class ParseError(Exception):
    def __init__(self, msg, line=0, col=0):
        super().__init__(msg)
        self.msg, self.line, self.col = msg, line, col

    def __str__(self):
        return f"{self.line}:{self.col}: {self.msg}"


class TypeCheckError(Exception):
    pass


# -- lexer ---------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<remu>%u(?![A-Za-z0-9_.]))
  | (?P<value>%[A-Za-z0-9_.]+)
  | (?P<op>u>>|u>=|u<=|u<|u>|/u(?![A-Za-z0-9_])|<<|>>|<=|>=|==|!=|&&|\|\||[-+*/%&|^~!<>(),=])
  | (?P<int>0x[0-9a-fA-F]+|\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1, col0: int = 1) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind == "remu":
            kind = "op"
        if kind != "ws":
            out.append(Tok(kind, m.group(), line, col0 + pos))
        pos = m.end()
    out.append(Tok("eof", "", line, col0 + pos))
    return out


_BINOP_TOKENS = {v: k for k, v in T.BINOP_SYMBOLS.items()}
_COND_TOKENS = {v: k for k, v in T.COND_SYMBOLS.items()}


class _ExprParser:
    """Precedence-climbing parser for predicates and constant expressions."""

    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    @property
    def cur(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return t

    def error(self, msg, tok=None):
        tok = tok or self.cur
        return ParseError(msg, tok.line, tok.col)

    # predicates
    def pred(self):
        return self.pred_or()

    def pred_or(self):
        args = [self.pred_and()]
        while self.cur.text == "||":
            self.next()
            args.append(self.pred_and())
        return T.disj(*args) if len(args) > 1 else args[0]

    def pred_and(self):
        args = [self.pred_not()]
        while self.cur.text == "&&":
            self.next()
            args.append(self.pred_not())
        if len(args) == 1:
            return args[0]
        flat = []
        for a in args:
            flat.extend(a.args if isinstance(a, T.And) else [a])
        return T.And(tuple(flat))

    def pred_not(self):
        if self.cur.text == "!":
            self.next()
            return T.Not(self.pred_not())
        return self.pred_atom()

    def pred_atom(self):
        tok = self.cur
        if tok.kind == "ident" and tok.text in ("true", "false"):
            self.next()
            return T.TRUE if tok.text == "true" else T.FALSE
        if tok.kind == "ident" and tok.text in T.PFUNS:
            self.next()
            self.expect("(")
            arg = self.cexpr()
            self.expect(")")
            return T.PFun(tok.text, arg)
        if tok.text == "(":
            # either a parenthesised predicate or the start of a constant expression
            save = self.i
            self.next()
            try:
                inner = self.pred()
                self.expect(")")
                if not T.is_cexpr(inner):
                    return inner
            except ParseError:
                pass
            self.i = save
        lhs = self.cexpr()
        op = self.cur
        if op.text not in _COND_TOKENS:
            raise self.error(f"expected comparison, found {op.text or 'end of input'!r}")
        self.next()
        rhs = self.cexpr()
        return T.Cmp(_COND_TOKENS[op.text], lhs, rhs)

    # constant expressions
    def cexpr(self, min_prec: int = 0):
        lhs = self.cexpr_unary()
        while True:
            op = _BINOP_TOKENS.get(self.cur.text)
            if op is None:
                break
            prec = T.BINOP_PRECEDENCE[op]
            if prec < min_prec:
                break
            self.next()
            rhs = self.cexpr(prec + 1)
            lhs = T.Binop(op, lhs, rhs)
        return lhs

    def cexpr_unary(self):
        tok = self.cur
        if tok.text == "-":
            self.next()
            if self.cur.kind == "int":
                return T.Lit(-_int(self.next().text))
            return T.Unop("neg", self.cexpr_unary())
        if tok.text == "~":
            self.next()
            return T.Unop("not", self.cexpr_unary())
        return self.cexpr_primary()

    def cexpr_primary(self):
        tok = self.next()
        if tok.kind == "int":
            return T.Lit(_int(tok.text))
        if tok.kind == "value":
            return T.Sym(tok.text)
        if tok.kind == "ident":
            if tok.text in T.CFUNS:
                self.expect("(")
                arg = self.cexpr()
                self.expect(")")
                return T.Fun(tok.text, arg)
            if tok.text == "width":
                self.expect("(")
                name = self.next()
                if name.kind not in ("value", "ident"):
                    raise self.error("width() takes a named value", name)
                self.expect(")")
                return T.Width(name.text)
            if _SYMCONST.match(tok.text):
                return T.Sym(tok.text)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.line, tok.col)
        if tok.text == "(":
            e = self.cexpr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.line, tok.col)

    def done(self):
        if self.cur.kind != "eof":
            raise self.error(f"unexpected trailing {self.cur.text!r}")


def _int(text):
    return int(text, 16) if text.startswith("0x") else int(text)


def parse_predicate(text: str, line: int = 1, col: int = 1):
    p = _ExprParser(tokenize(text, line, col))
    t = p.pred()
    p.done()
    return t


def parse_cexpr(text: str, line: int = 1, col: int = 1):
    p = _ExprParser(tokenize(text, line, col))
    t = p.cexpr()
    p.done()
    return t


# -- DAG model -----------------------------------------------------------------

@dataclass(frozen=True)
class Input:
    name: str


@dataclass(frozen=True)
class SymConst:
    name: str


@dataclass(frozen=True)
class Literal:
    value: int


@dataclass(frozen=True)
class ConstExpr:
    term: T.Term


@dataclass(frozen=True)
class Instr:
    opcode: str
    args: tuple
    flags: tuple = ()
    cond: str | None = None
    name: str | None = None


@dataclass
class Optimization:
    name: str
    pre: T.Term | None
    assumptions: list
    nodes: list
    source: dict                  # name -> node id: leaves, then source definitions in order
    target: dict                  # name -> node id, target definitions in order
    root: str
    inputs: list                  # runtime variables (R)
    consts: list                  # symbolic constants (C)
    annotations: dict = field(default_factory=dict)   # node id -> fixed width
    types: "TypeModel | None" = None

    @property
    def source_root(self) -> int:
        return self.source[self.root]

    @property
    def target_root(self) -> int:
        return self.target[self.root]

    def lookup(self, name: str) -> int:
        """Node id of a named value (source definitions, inputs or constants)."""
        return self.source[name]


def _is_runtime_ref(name: str) -> bool:
    return name.startswith("%")


class _OptBuilder:
    def __init__(self, name):
        self.name = name
        self.nodes = []
        self.source = {}
        self.target = {}
        self.inputs = []
        self.consts = []
        self.annotations = {}
        self.leaf = {}

    def add(self, node):
        self.nodes.append(node)
        return len(self.nodes) - 1

    def ref(self, name, in_target, tok):
        if in_target and name in self.target:
            return self.target[name]
        if name in self.source:
            return self.source[name]
        if name in self.leaf:
            return self.leaf[name]
        if in_target:
            raise ParseError(f"undefined name {name} in target", tok.line, tok.col)
        if _is_runtime_ref(name):
            nid = self.add(Input(name))
            self.inputs.append(name)
        else:
            nid = self.add(SymConst(name))
            self.consts.append(name)
        self.leaf[name] = nid
        return nid

    def operand(self, term, in_target, tok):
        if isinstance(term, T.Sym):
            return self.ref(term.name, in_target, tok)
        if isinstance(term, T.Lit):
            return self.add(Literal(term.value))
        if not T.is_cexpr(term):
            raise ParseError("expected an operand", tok.line, tok.col)
        if not in_target:
            raise ParseError("constant expression in source", tok.line, tok.col)
        for n in T.walk(term):
            if isinstance(n, T.Sym):
                if _is_runtime_ref(n.name):
                    raise ParseError(f"runtime value {n.name} in constant expression", tok.line, tok.col)
                if n.name not in self.leaf:
                    raise ParseError(f"undefined name {n.name} in target", tok.line, tok.col)
            if isinstance(n, T.Width) and n.name not in self.source and n.name not in self.leaf:
                raise ParseError(f"undefined name {n.name} in target", tok.line, tok.col)
        return self.add(ConstExpr(term))


def _parse_width(tok):
    if tok.kind == "ident" and re.fullmatch(r"i\d+", tok.text):
        w = int(tok.text[1:])
        if not 1 <= w <= MAX_WIDTH:
            raise ParseError(f"width {w} out of range", tok.line, tok.col)
        return w
    return None


def _parse_instr(b: _OptBuilder, text: str, lineno: int, in_target: bool):
    m = re.match(r"\s*(%[A-Za-z0-9_.]+)\s*=\s*", text)
    if not m:
        raise ParseError("expected '%name = ...'", lineno, 1)
    name = m.group(1)
    rest_col = m.end() + 1
    toks = tokenize(text[m.end():], lineno, rest_col)
    p = _ExprParser(toks)
    head = p.cur
    defs = b.target if in_target else b.source
    if name in defs:
        raise ParseError(f"duplicate definition of {name}", lineno, 1)
    if not in_target and (name in b.leaf):
        raise ParseError(f"{name} used before definition", lineno, 1)
    fixed = None

    if head.kind == "ident" and head.text in OPCODES and head.text != "copy":
        opcode = p.next().text
        flags, cond = [], None
        if opcode == "icmp":
            ct = p.next()
            if ct.text not in ICMP_CONDS:
                raise ParseError(f"unknown icmp condition {ct.text!r}", ct.line, ct.col)
            cond = ct.text
        while p.cur.kind == "ident" and p.cur.text in ("nuw", "nsw", "exact"):
            ft = p.next()
            if ft.text not in ALLOWED_FLAGS.get(opcode, ()):
                raise ParseError(f"flag {ft.text} not allowed on {opcode}", ft.line, ft.col)
            if ft.text not in flags:
                flags.append(ft.text)
        op_width = _parse_width(p.cur)
        if op_width is not None:
            p.next()
        args = []
        while True:
            tok = p.cur
            args.append(b.operand(p.cexpr(), in_target, tok))
            if p.cur.text != ",":
                break
            p.next()
        if opcode in CAST_OPCODES and p.cur.kind == "ident" and p.cur.text == "to":
            p.next()
            wt = p.next()
            fixed = _parse_width(wt)
            if fixed is None:
                raise ParseError("expected a type after 'to'", wt.line, wt.col)
        p.done()
        arity = 3 if opcode == "select" else 1 if opcode in CAST_OPCODES else 2
        if len(args) != arity:
            raise ParseError(f"{opcode} takes {arity} operands, got {len(args)}", lineno, head.col)
        nid = b.add(Instr(opcode, tuple(args), tuple(sorted(flags)), cond, name))
        if op_width is not None:
            if opcode in CAST_OPCODES:
                b.annotations[args[0]] = op_width
            elif opcode == "icmp":
                b.annotations[args[0]] = op_width
            else:
                b.annotations[nid] = op_width
    else:
        tok = p.cur
        arg = b.operand(p.cexpr(), in_target, tok)
        p.done()
        nid = b.add(Instr("copy", (arg,), (), None, name))
    if not in_target and name in b.leaf:
        raise ParseError(f"{name} refers to itself", lineno, 1)
    if fixed is not None:
        b.annotations[nid] = fixed
    defs[name] = nid


def _split_optimizations(text: str):
    chunks, cur = [], []
    for i, line in enumerate(text.splitlines(), 1):
        stripped = line.split(";", 1)[0].rstrip()
        if stripped.strip().startswith("Name:") and any(s.strip() and not s.strip().startswith("Name:") for _, s in cur):
            chunks.append(cur)
            cur = []
        cur.append((i, stripped))
    if any(s.strip() for _, s in cur):
        chunks.append(cur)
    return chunks


def _parse_chunk(lines) -> Optimization:
    name, pre, assumptions = "", None, []
    src_lines, tgt_lines, seen_arrow = [], [], False
    for lineno, line in lines:
        s = line.strip()
        if not s:
            continue
        col = line.index(s[0]) + 1
        if s.startswith("Name:"):
            name = s[5:].strip()
        elif s.startswith("Pre:"):
            if seen_arrow or src_lines:
                raise ParseError("Pre: must precede the source", lineno, col)
            off = line.index("Pre:") + 5
            pre = parse_predicate(line[off - 1 + 1:], lineno, off)
        elif s.startswith("Assume:"):
            off = line.index("Assume:") + 8
            assumptions.append(parse_predicate(line[off - 1 + 1:], lineno, off))
        elif s == "=>":
            if seen_arrow:
                raise ParseError("duplicate '=>'", lineno, col)
            seen_arrow = True
        else:
            (tgt_lines if seen_arrow else src_lines).append((lineno, line))
    if not seen_arrow:
        raise ParseError("missing '=>'", lines[-1][0] if lines else 1, 1)
    if not src_lines:
        raise ParseError("empty source", lines[0][0], 1)
    if not tgt_lines:
        raise ParseError("empty target", lines[-1][0], 1)

    b = _OptBuilder(name)
    for lineno, line in src_lines:
        _parse_instr(b, line, lineno, in_target=False)
    root = list(b.source)[-1]
    for lineno, line in tgt_lines:
        _parse_instr(b, line, lineno, in_target=True)
    if root not in b.target:
        raise ParseError(f"target does not define root {root}", tgt_lines[-1][0], 1)
    if list(b.target)[-1] != root:
        raise ParseError(f"target root must be {root}", tgt_lines[-1][0], 1)

    known = set(b.source) | set(b.leaf)
    for t in ([pre] if pre is not None else []) + assumptions:
        for n in T.walk(t):
            if isinstance(n, T.Sym) and n.name not in b.consts:
                raise ParseError(f"undefined name {n.name} in precondition", lines[0][0], 1)
            if isinstance(n, T.Width) and n.name not in known:
                raise ParseError(f"undefined name {n.name} in precondition", lines[0][0], 1)
    return Optimization(name=name, pre=pre, assumptions=assumptions, nodes=b.nodes,
                        source={**b.leaf, **b.source}, target=b.target, root=root,
                        inputs=b.inputs, consts=b.consts, annotations=b.annotations)


def parse_optimizations(text: str) -> list:
    return [_parse_chunk(chunk) for chunk in _split_optimizations(text)]


def parse_optimization(text: str) -> Optimization:
    opts = parse_optimizations(text)
    if len(opts) != 1:
        raise ParseError(f"expected one rewrite, found {len(opts)}", 1, 1)
    return opts[0]


def load(text: str) -> Optimization:
    """Parse and type-check a single rewrite."""
    return typecheck(parse_optimization(text))


# -- pretty printing -------------------------------------------------------------

def _operand_text(opt, nid, defined_names):
    node = opt.nodes[nid]
    if isinstance(node, (Input, SymConst)):
        return node.name
    if isinstance(node, Literal):
        return str(node.value)
    if isinstance(node, ConstExpr):
        return T.show(node.term)
    return node.name


def _instr_text(opt, nid):
    node = opt.nodes[nid]
    if node.opcode == "copy":
        body = _operand_text(opt, node.args[0], None)
    else:
        parts = [node.opcode]
        if node.cond:
            parts.append(node.cond)
        parts.extend(node.flags)
        # explicit operand type: on the first operand for casts and icmp, else on the result
        typed = node.args[0] if node.opcode in CAST_OPCODES + ("icmp",) else nid
        if typed in opt.annotations:
            parts.append(f"i{opt.annotations[typed]}")
        body = " ".join(parts) + " " + ", ".join(_operand_text(opt, a, None) for a in node.args)
        fixed = opt.annotations.get(nid)
        if node.opcode in CAST_OPCODES and fixed is not None:
            body += f" to i{fixed}"
    return f"{node.name} = {body}"


def show_optimization(opt: Optimization) -> str:
    lines = []
    if opt.name:
        lines.append(f"Name: {opt.name}")
    if opt.pre is not None:
        lines.append(f"Pre: {T.show(opt.pre)}")
    for a in opt.assumptions:
        lines.append(f"Assume: {T.show(a)}")
    for name, nid in opt.source.items():
        if isinstance(opt.nodes[nid], Instr):
            lines.append(_instr_text(opt, nid))
    lines.append("=>")
    for name, nid in opt.target.items():
        lines.append(_instr_text(opt, nid))
    return "\n".join(lines) + "\n"


def structure(opt: Optimization):
    """A hashable structural summary used for round-trip comparisons."""
    def node_key(nid, seen):
        node = opt.nodes[nid]
        if isinstance(node, Instr):
            return ("instr", node.name, node.opcode, node.cond, node.flags,
                    tuple(node_key(a, seen) for a in node.args), opt.annotations.get(nid))
        if isinstance(node, ConstExpr):
            return ("cexpr", node.term)
        if isinstance(node, Literal):
            return ("lit", node.value)
        return (type(node).__name__, node.name)
    return (opt.name, opt.pre, tuple(opt.assumptions), tuple(opt.inputs), tuple(opt.consts),
            node_key(opt.source_root, None), node_key(opt.target_root, None))


# -- types ---------------------------------------------------------------------

class _UnionFind:
    def __init__(self):
        self.parent = []

    def fresh(self):
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)
        return min(ra, rb)


@dataclass
class TypeModel:
    """Type variables of a rewrite after unification.

    ``classes`` lists the free type variables in a fixed order; a type
    assignment is a tuple of widths aligned with it.  ``fixed`` pins some
    variables (comparison results, explicit annotations) to one width.
    """
    classes: list                 # free type variable ids, enumeration order
    fixed: dict                   # type variable id -> width
    node_class: list              # node id -> type variable id
    name_class: dict              # named value -> type variable id
    wider: list                   # (a, b): width(a) > width(b)

    def width_of_class(self, assignment: tuple, cls: int) -> int:
        if cls in self.fixed:
            return self.fixed[cls]
        return assignment[self.classes.index(cls)]

    def name_widths(self, assignment: tuple) -> dict:
        return {n: self.width_of_class(assignment, c) for n, c in self.name_class.items()}

    def node_widths(self, assignment: tuple) -> list:
        return [self.width_of_class(assignment, c) for c in self.node_class]

    def satisfies(self, assignment: tuple) -> bool:
        return all(self.width_of_class(assignment, a) > self.width_of_class(assignment, b)
                   for a, b in self.wider)

    def assignments(self, widths=DEFAULT_WIDTHS):
        """Feasible type assignments in lexicographic order."""
        ws = sorted(set(widths))
        if any(not 1 <= w <= MAX_WIDTH for w in ws):
            raise ValueError(f"widths must lie in [1, {MAX_WIDTH}]")
        for combo in itertools.product(ws, repeat=len(self.classes)):
            if self.satisfies(combo):
                yield combo

    def count(self, widths=DEFAULT_WIDTHS) -> int:
        return sum(1 for _ in self.assignments(widths))


def typecheck(opt: Optimization) -> Optimization:
    uf = _UnionFind()
    node_class = [uf.fresh() for _ in opt.nodes]
    name_class = {}
    fixed_raw = []
    wider = []
    for nid, node in enumerate(opt.nodes):
        if isinstance(node, (Input, SymConst)):
            name_class[node.name] = node_class[nid]
        elif isinstance(node, Instr):
            name_class.setdefault(node.name, node_class[nid])
    # instruction names shadowed in the target keep the source's type class
    for name, nid in opt.source.items():
        name_class[name] = node_class[nid]

    def tc_cexpr(t, cls):
        for n in T.walk(t):
            if isinstance(n, T.Sym):
                if n.name not in name_class:
                    raise TypeCheckError(f"undefined name {n.name}")
                uf.union(name_class[n.name], cls)
            elif isinstance(n, T.Width) and n.name not in name_class:
                raise TypeCheckError(f"undefined name {n.name}")

    def tc_pred(t):
        if isinstance(t, T.Cmp):
            c = uf.fresh()
            tc_cexpr(t.lhs, c)
            tc_cexpr(t.rhs, c)
        elif isinstance(t, T.PFun):
            tc_cexpr(t.arg, uf.fresh())
        elif isinstance(t, (T.Not, T.And, T.Or)):
            for c in T.children(t):
                tc_pred(c)

    for nid, node in enumerate(opt.nodes):
        if isinstance(node, ConstExpr):
            tc_cexpr(node.term, node_class[nid])
        if not isinstance(node, Instr):
            continue
        me = node_class[nid]
        a = [node_class[x] for x in node.args]
        op = node.opcode
        if op in BINARY_OPCODES:
            uf.union(me, a[0])
            uf.union(me, a[1])
        elif op == "icmp":
            uf.union(a[0], a[1])
            fixed_raw.append((me, 1))
        elif op == "select":
            fixed_raw.append((a[0], 1))
            uf.union(me, a[1])
            uf.union(me, a[2])
        elif op == "copy":
            uf.union(me, a[0])
        elif op in ("zext", "sext"):
            wider.append((me, a[0]))
        elif op == "trunc":
            wider.append((a[0], me))
    uf.union(node_class[opt.source_root], node_class[opt.target_root])
    for t in ([opt.pre] if opt.pre is not None else []) + list(opt.assumptions):
        tc_pred(t)
    for nid, w in opt.annotations.items():
        fixed_raw.append((node_class[nid], w))

    fixed = {}
    for c, w in fixed_raw:
        r = uf.find(c)
        if fixed.get(r, w) != w:
            raise TypeCheckError(f"conflicting widths i{fixed[r]} and i{w}")
        fixed[r] = w
    node_class = [uf.find(c) for c in node_class]
    name_class = {n: uf.find(c) for n, c in name_class.items()}
    wider = [(uf.find(a), uf.find(b)) for a, b in wider]
    for a, b in wider:
        if a == b:
            raise TypeCheckError("cast between identical types")
    classes = []
    for c in node_class:
        if c not in fixed and c not in classes:
            classes.append(c)
    model = TypeModel(classes=classes, fixed=fixed, node_class=node_class,
                      name_class=name_class, wider=wider)
    if not _feasible(model):
        raise TypeCheckError("unsatisfiable type constraints")
    return replace(opt, types=model)


def _feasible(model: TypeModel) -> bool:
    # least solution of the strict-order constraints, seeded by the fixed widths
    lo = {c: model.fixed.get(c, 1) for c in set(model.node_class)}
    for _ in range(len(lo) + 1):
        changed = False
        for a, b in model.wider:
            if lo[a] <= lo[b]:
                lo[a] = lo[b] + 1
                changed = True
        if not changed:
            break
    else:
        return False
    return (all(w <= MAX_WIDTH for w in lo.values())
            and all(lo[c] == w for c, w in model.fixed.items()))


def check_predicate_types(opt: Optimization, pred) -> None:
    """Reject a predicate that would force two distinct type variables to unify."""
    model = opt.types

    def classes_in(t):
        out = set()
        for n in T.walk(t):
            if isinstance(n, T.Sym):
                if n.name not in model.name_class:
                    raise TypeCheckError(f"undefined name {n.name}")
                out.add(model.name_class[n.name])
            elif isinstance(n, T.Width) and n.name not in model.name_class:
                raise TypeCheckError(f"undefined name {n.name}")
        return out

    for n in T.walk(pred):
        if isinstance(n, T.Cmp):
            cs = classes_in(n.lhs) | classes_in(n.rhs)
        elif isinstance(n, T.PFun):
            cs = classes_in(n.arg)
        else:
            continue
        if len(cs) > 1:
            raise TypeCheckError(f"operands of {T.show(n)} have different types")
