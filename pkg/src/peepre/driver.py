"""Counterexample-guided inference loop, the enumeration-search baseline and generalization."""
from __future__ import annotations

import bisect
import itertools
import time
from dataclasses import dataclass, field

from . import bv
from . import terms as T
from .dsl import (ConstExpr, Input, Instr, Literal, Optimization, SymConst, check_predicate_types,
                  load, show_optimization)
from .examples import BackendUnknown, Example, ExampleSet, GenConfig, Label, build_example_set
from .learner import (ExampleEvaluator, LearnerConfig, LearnerStalled, LearnerTimeout, RelaxSchedule,
                      preconditions_by_examples)
from .predenum import Enumerator
from .semantics import ACCEPT, REJECT
from .verify import BudgetExceeded, CounterExample, ExhaustiveBackend, MissedPositive, Unknown, Valid

WEAKEST = "Weakest"
PARTIAL_ONLY = "PartialOnly"
STALLED = "Stalled"
UNKNOWN = "Unknown"
TIMEOUT = "Timeout"


@dataclass
class InferConfig:
    widths: tuple = (4, 8)
    seed: int = 0
    backend: str = "exhaustive"           # or "smt"
    smt_cmd: str = "z3 -in -smt2"
    smt_timeout: float = 30.0
    budget0: int = 32
    budget1: int = 32
    sample_cap: int = 16
    relax: RelaxSchedule = field(default_factory=RelaxSchedule)
    K: int = 1
    restarts: int = 3
    timeout: float = 1000.0               # wall-clock seconds
    max_iters: int = 100
    emit_partials: bool = True
    hints: tuple = ()                     # predicates seeding the learner
    assumptions: tuple = ()               # extra assumptions on top of the file's
    reject_trivial: bool = True           # learned formulas must reject trivially valid examples
    search_budget: int = 200_000

    def __post_init__(self):
        if not self.widths or any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        for name in ("budget0", "budget1", "sample_cap", "K", "restarts", "max_iters", "search_budget"):
            if getattr(self, name) < 0 or (name not in ("budget0", "budget1") and getattr(self, name) < 1):
                raise ValueError(f"{name} must be positive")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class Stats:
    examples_generated: int = 0
    trivial_discarded: int = 0
    predicates_enumerated: int = 0
    predicates_learned: int = 0
    candidates_tested: int = 0
    outer_iterations: int = 0
    elapsed: float = 0.0


@dataclass
class InferReport:
    status: str
    weakest: object = None                # term or None
    partials: list = field(default_factory=list)   # (term, accepted-positive fraction)
    stats: Stats = field(default_factory=Stats)
    message: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "weakest": None if self.weakest is None else T.show(self.weakest),
            "partials": [{"formula": T.show(p), "fraction": round(f, 6)} for p, f in self.partials],
            "stats": dict(vars(self.stats)),
            "message": self.message,
        }


def make_backend(config: InferConfig):
    if config.backend == "exhaustive":
        return ExhaustiveBackend(widths=config.widths)
    if config.backend == "smt":
        from .smt import SmtBackend
        return SmtBackend(widths=config.widths, command=config.smt_cmd, timeout=config.smt_timeout,
                          seed=config.seed)
    raise ValueError(f"unknown backend {config.backend!r}")


def with_assumptions(opt: Optimization, extra) -> Optimization:
    if not extra:
        return opt
    for a in extra:
        check_predicate_types(opt, a)
    copy = Optimization(**{**vars(opt), "assumptions": list(opt.assumptions) + list(extra)})
    return copy


class _Run:
    """State shared by ``infer`` and ``search``: backend, examples, clock."""

    def __init__(self, opt, config, backend=None, log=None):
        self.opt = with_assumptions(opt, config.assumptions)
        self.config = config
        self.backend = backend or make_backend(config)
        self.log = log or (lambda msg: None)
        self.start = time.monotonic()
        self.deadline = self.start + config.timeout
        self.stats = Stats()
        gen = GenConfig(widths=config.widths, seed=config.seed, budget0=config.budget0,
                        budget1=config.budget1)
        self.examples = build_example_set(self.opt, gen, self.backend, self.log)
        self.stats.examples_generated = len(self.examples) + len(self.examples.trivial)

    def expired(self) -> bool:
        return time.monotonic() > self.deadline

    def negatives(self) -> list:
        """Examples every learned formula must reject."""
        if self.config.reject_trivial:
            return self.examples.negatives + self.examples.trivial
        return list(self.examples.negatives)

    def refine(self, pre):
        return self.backend.check_refinement(self.opt, pre, self.config.reject_trivial)

    def add_counterexample(self, ce: CounterExample) -> bool:
        e = ce.example
        if e.label is Label.UNCLASSIFIED:
            e = self.backend.classify_examples(self.opt, [e])[0]
        added = self.examples.add(e)
        if added:
            self.stats.examples_generated += 1
        return added

    def fraction(self, pre) -> float:
        pos = self.examples.positives
        if not pos:
            return 1.0
        codes = ExampleEvaluator(self.opt, pos)(pre)
        return float((codes == ACCEPT).mean())

    def finish(self, report: InferReport) -> InferReport:
        self.stats.trivial_discarded = len(self.examples.trivial)
        self.stats.elapsed = round(time.monotonic() - self.start, 3)
        report.stats = self.stats
        report.partials = [(p, self.fraction(p)) for p, _ in report.partials]
        return report


def initial_predicates(opt: Optimization, config: InferConfig) -> list:
    """Atoms of the assumptions plus the hint predicates."""
    out = []
    for a in list(opt.assumptions) + list(config.assumptions):
        for atom in T.atoms(a):
            if atom not in out:
                out.append(atom)
    for h in config.hints:
        check_predicate_types(opt, h)
        if h not in out:
            out.append(h)
    return out


def infer(opt: Optimization, config: InferConfig | None = None, backend=None, log=None) -> InferReport:
    """Learn a weakest precondition, reporting validated partial preconditions on the way."""
    config = config or InferConfig()
    try:
        run = _Run(opt, config, backend, log)
    except BackendUnknown as exc:
        return InferReport(UNKNOWN, message=str(exc))
    opt = run.opt
    enumerator = Enumerator(opt)
    known = initial_predicates(opt, config)
    partials, judged = [], set()
    learner_config = LearnerConfig(sample_cap=config.sample_cap, relax=config.relax, K=config.K,
                                   restarts=config.restarts, seed=config.seed, deadline=run.deadline)

    def report(status, weakest=None, message=""):
        run.stats.predicates_enumerated = enumerator.emitted_total
        return run.finish(InferReport(status, weakest, list(partials), message=message))

    def add_partial(p):
        if p in judged:
            return
        judged.add(p)
        partials.append((p, 0.0))

    try:
        for it in range(config.max_iters):
            if run.expired():
                return report(TIMEOUT)
            run.stats.outer_iterations = it + 1
            try:
                out = preconditions_by_examples(opt, run.examples.positives, run.negatives(), known,
                                                learner_config, enumerator)
            except LearnerTimeout:
                return report(TIMEOUT)
            except LearnerStalled as exc:
                for p in exc.partials if config.emit_partials else ():
                    if p not in judged and isinstance(run.refine(p), Valid):
                        add_partial(p)
                return report(PARTIAL_ONLY if partials else STALLED, message=str(exc))
            run.stats.predicates_learned += out.stats.learned
            run.stats.candidates_tested += out.stats.candidates
            known = list(out.predicates)
            progress = False
            if config.emit_partials:
                for p in out.partials:
                    if p in judged:
                        continue
                    verdict = run.refine(p)
                    if isinstance(verdict, Unknown):
                        return report(UNKNOWN, message=verdict.reason)
                    if isinstance(verdict, CounterExample):
                        judged.add(p)
                        progress |= run.add_counterexample(verdict)
                    else:
                        add_partial(p)
            full = out.full
            verdict = run.refine(full)
            if isinstance(verdict, Unknown):
                return report(UNKNOWN, message=verdict.reason)
            if isinstance(verdict, CounterExample):
                progress |= run.add_counterexample(verdict)
                if not progress:
                    return report(PARTIAL_ONLY if partials else STALLED,
                                  message="counterexample already known")
                continue
            weak = run.backend.check_weakest(opt, full)
            if isinstance(weak, Unknown):
                return report(UNKNOWN, message=weak.reason)
            if isinstance(weak, MissedPositive):
                if config.emit_partials and full != T.FALSE:
                    add_partial(full)
                if not run.examples.add(weak.example.with_label(Label.POSITIVE)) and not progress:
                    return report(PARTIAL_ONLY if partials else STALLED,
                                  message="missed positive already known")
                run.stats.examples_generated += 1
                continue
            partials[:] = [(p, f) for p, f in partials if p != full]
            return report(WEAKEST, full)
        return report(PARTIAL_ONLY if partials else STALLED, message="iteration cap reached")
    except BackendUnknown as exc:
        return report(UNKNOWN, message=str(exc))
    except BudgetExceeded as exc:
        return report(UNKNOWN, message=str(exc))


# -- search baseline ------------------------------------------------------------------

@dataclass(frozen=True)
class _Lit:
    atom: int                     # index into the atom list
    negated: bool


class _Lazy:
    """A cached view of a generator that is only advanced as far as it is indexed."""

    def __init__(self, gen):
        self._gen = gen
        self._items = []

    def has(self, i: int) -> bool:
        while len(self._items) <= i:
            try:
                self._items.append(next(self._gen))
            except StopIteration:
                return False
        return True

    def __getitem__(self, i: int):
        return self._items[i]


class _ClauseTable:
    """Clauses (sets of literals) grouped by size, generated lazily from weighted atoms.

    Literal ``2*i + neg`` is atom ``i`` with polarity ``neg``; atoms arrive in
    nondecreasing weight, so the literals lighter than any bound form a prefix.
    """

    def __init__(self, enumerator: Enumerator):
        self.enumerator = enumerator
        self.stream = enumerator.replay()
        self.atoms, self.weights = [], []
        self.by_size = {}
        self._exhausted = False

    def _has_atom(self, i: int) -> bool:
        while not self._exhausted and len(self.atoms) <= i:
            try:
                wp = next(self.stream)
            except StopIteration:
                self._exhausted = True
                break
            self.atoms.append(wp.term)
            self.weights.append(wp.weight)
        return i < len(self.atoms)

    def _lighter(self, below: int, bound: int) -> int:
        """Number of literals before ``below`` whose weight is at most ``bound``."""
        return min(below, 2 * bisect.bisect_right(self.weights, bound, 0, (below + 1) // 2))

    def _subsets(self, below: int, total: int):
        """Literal index tuples (increasing) below ``below`` with weights summing to ``total``."""
        if total == 0:
            yield ()
            return
        for top in range(self._lighter(below, total) - 1, -1, -1):
            w = self.weights[top // 2]
            for rest in self._subsets(top, total - w):
                yield rest + (top,)

    def _generate(self, size: int):
        i = 0
        while self._has_atom(i) and self.weights[i] <= size:
            w = self.weights[i]
            for neg in (0, 1):
                top = 2 * i + neg
                for rest in self._subsets(top, size - w):
                    yield tuple(_Lit(l // 2, bool(l % 2)) for l in rest + (top,))
            i += 1

    def clauses(self, size: int) -> "_Lazy":
        if size not in self.by_size:
            self.by_size[size] = _Lazy(self._generate(size))
        return self.by_size[size]


def _partitions(total: int, largest: int):
    """Nonincreasing tuples of parts (each at least 2) summing to ``total``, smallest largest part first."""
    if total == 0:
        yield ()
        return
    for k in range(2, min(total, largest) + 1):
        for rest in _partitions(total - k, k):
            yield (k,) + rest


def _combinations(pool: _Lazy, m: int, below=None):
    """Index tuples i1 < ... < im into ``pool``, ordered by largest index."""
    if m == 0:
        yield ()
        return
    top = 0
    while (below is None or top < below) and pool.has(top):
        for rest in _combinations(pool, m - 1, top):
            yield rest + (top,)
        top += 1


def _cnfs_of_size(table: _ClauseTable, size: int):
    """Sets of distinct clauses with sizes summing to ``size``; no clause contains another."""

    def groups(parts):
        if not parts:
            yield ()
            return
        k = parts[0]
        m = sum(1 for p in parts if p == k)
        pool = table.clauses(k)
        for idx in _combinations(pool, m):
            chosen = tuple(pool[i] for i in idx)
            for rest in groups(parts[m:]):
                yield chosen + rest

    for parts in _partitions(size, size):
        for cnf in groups(parts):
            sets = [frozenset(c) for c in cnf]
            if any(a <= b for i, a in enumerate(sets) for j, b in enumerate(sets) if i != j):
                yield None      # subsumed; still a step for the caller's clock
                continue
            yield cnf


def cnf_term(cnf, atoms) -> T.Term:
    from .boolsynth import guarded_literal
    if not cnf:
        return T.TRUE
    return T.conj(*(T.disj(*(guarded_literal(atoms[l.atom], l.negated) for l in c)) for c in cnf))


def search(opt: Optimization, config: InferConfig | None = None, backend=None, log=None) -> InferReport:
    """Enumerate CNF preconditions by nondecreasing size until one is valid and weakest."""
    config = config or InferConfig()
    try:
        run = _Run(opt, config, backend, log)
    except BackendUnknown as exc:
        return InferReport(UNKNOWN, message=str(exc))
    opt = run.opt
    enumerator = Enumerator(opt)
    table = _ClauseTable(enumerator)
    columns = {}
    state = {}

    def rebuild():
        pos, neg = run.examples.positives, run.negatives()
        state["pos"] = ExampleEvaluator(opt, pos) if pos else None
        state["neg"] = ExampleEvaluator(opt, neg) if neg else None
        state["full"] = (1 << len(pos)) - 1
        columns.clear()

    def lit_masks(lit: _Lit):
        key = lit.atom
        if key not in columns:
            cols = []
            for side in ("pos", "neg"):
                ev = state[side]
                if ev is None:
                    cols.append((0, 0))
                    continue
                codes = ev(table.atoms[key])
                acc = sum(1 << i for i in range(len(codes)) if codes[i] == ACCEPT)
                rej = sum(1 << i for i in range(len(codes)) if codes[i] == REJECT)
                cols.append((acc, rej))
            columns[key] = cols
        (pa, pr), (na, nr) = columns[key]
        return (pr, nr) if lit.negated else (pa, na)

    def passes(cnf) -> bool:
        pos_ok, neg_acc = state["full"], -1
        for c in cnf:
            cp, cn = 0, 0
            for lit in c:
                p, n = lit_masks(lit)
                cp |= p
                cn |= n
            pos_ok &= cp
            neg_acc &= cn
            if pos_ok != state["full"]:
                return False
        if state["neg"] is None:
            return True
        return (neg_acc if cnf else -1) & ((1 << len(run.negatives())) - 1) == 0

    rebuild()
    tested = 0
    try:
        for size in itertools.count(0):
            if size == 1:
                continue
            if size > enumerator.max_weight * 2:
                break
            for steps, cnf in enumerate([()] if size == 0 else _cnfs_of_size(table, size)):
                if steps % 512 == 511 and run.expired():
                    return _search_report(run, enumerator, TIMEOUT, None)
                if cnf is None:
                    continue
                tested += 1
                run.stats.candidates_tested = tested
                if tested > config.search_budget:
                    return _search_report(run, enumerator, STALLED, None, "candidate budget exhausted")
                if tested % 512 == 0 and run.expired():
                    return _search_report(run, enumerator, TIMEOUT, None)
                if not passes(cnf):
                    continue
                pre = cnf_term(cnf, table.atoms)
                verdict = run.refine(pre)
                if isinstance(verdict, Unknown):
                    return _search_report(run, enumerator, UNKNOWN, None, verdict.reason)
                if isinstance(verdict, CounterExample):
                    run.add_counterexample(verdict)
                    rebuild()
                    continue
                weak = run.backend.check_weakest(opt, pre)
                if isinstance(weak, MissedPositive):
                    if run.examples.add(weak.example.with_label(Label.POSITIVE)):
                        run.stats.examples_generated += 1
                    rebuild()
                    continue
                if isinstance(weak, Unknown):
                    return _search_report(run, enumerator, UNKNOWN, None, weak.reason)
                return _search_report(run, enumerator, WEAKEST, pre)
        return _search_report(run, enumerator, STALLED, None, "enumeration exhausted")
    except BackendUnknown as exc:
        return _search_report(run, enumerator, UNKNOWN, None, str(exc))


def _search_report(run, enumerator, status, pre, message=""):
    run.stats.predicates_enumerated = enumerator.emitted_total
    return run.finish(InferReport(status, pre, [], message=message))


# -- generalization ------------------------------------------------------------------------

@dataclass
class Generalized:
    opt: Optimization
    values: tuple                 # the concrete literal values, aligned with ``opt.consts``


def generalize_with_values(cr: Optimization) -> Generalized:
    """Replace every source literal by a fresh symbolic constant.

    A target literal equal to some source literal becomes that literal's constant;
    other target literals stay concrete.
    """
    if cr.consts:
        raise ValueError("a concrete rewrite must not contain symbolic constants")
    nodes = list(cr.nodes)
    names, values, by_value = {}, [], {}
    for name, nid in cr.source.items():
        node = cr.nodes[nid]
        if not isinstance(node, Instr):
            continue
        for a in node.args:
            if isinstance(cr.nodes[a], Literal) and a not in names:
                names[a] = f"C{len(names) + 1}"
                values.append(cr.nodes[a].value)
                by_value.setdefault(cr.nodes[a].value, names[a])
    for nid, cname in names.items():
        nodes[nid] = SymConst(cname)
    for name, nid in cr.target.items():
        for a in cr.nodes[nid].args:
            node = cr.nodes[a]
            if isinstance(node, Literal) and node.value in by_value:
                nodes[a] = SymConst(by_value[node.value])
            elif isinstance(node, ConstExpr):
                nodes[a] = ConstExpr(_replace_lits(node.term, by_value))
    tmp = Optimization(**{**vars(cr), "nodes": nodes, "types": None})
    opt = load(show_optimization(tmp))
    order = {c: i for i, c in enumerate(names.values())}
    vals = tuple(values[order[c]] for c in opt.consts)
    return Generalized(opt, vals)


def _replace_lits(t, by_value):
    if isinstance(t, T.Lit) and t.value in by_value:
        return T.Sym(by_value[t.value])
    if isinstance(t, T.Unop):
        return T.Unop(t.op, _replace_lits(t.arg, by_value))
    if isinstance(t, T.Fun):
        return T.Fun(t.name, _replace_lits(t.arg, by_value))
    if isinstance(t, T.Binop):
        return T.Binop(t.op, _replace_lits(t.lhs, by_value), _replace_lits(t.rhs, by_value))
    return t


def generalize(cr: Optimization) -> Optimization:
    return generalize_with_values(cr).opt


def concrete_examples(g: Generalized, widths) -> list:
    """The original valuation encoded at every feasible type assignment."""
    out = []
    for a in g.opt.types.assignments(widths):
        w = g.opt.types.name_widths(a)
        out.append(Example(a, tuple(v & bv.mask(w[c]) for c, v in zip(g.opt.consts, g.values))))
    return out
