"""Basic process algebra: semantics, bounded inclusion, translation, fuzzing.

Surface format::

    % comment
    proc X0 = a . X0 . c + b . X1 ;
    proc X1 = a ;
    root X0

Identifiers that name a ``proc`` are variables, every other identifier is an
action.  ``.`` is sequencing and ``+`` is choice.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

from .syntax import InternalChoice, Named, NestsubError, One, Param, Type, format_type
from .rename import apply_param_subst
from .variance import Definition, check_signature_valid, infer_variances, make_signature


# ---------------------------------------------------------------------------
# Expressions

@dataclass(frozen=True)
class Action:
    label: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Choice:
    left: "BpaExpr"
    right: "BpaExpr"


@dataclass(frozen=True)
class Seq:
    left: "BpaExpr"
    right: "BpaExpr"


@dataclass(frozen=True)
class Epsilon:
    pass


BpaExpr = Union[Action, Var, Choice, Seq, Epsilon]
EPS = Epsilon()


def seq(p: BpaExpr, q: BpaExpr) -> BpaExpr:
    """Sequential composition, kept right-associated and free of ε."""
    if isinstance(p, Epsilon):
        return q
    if isinstance(q, Epsilon):
        return p
    if isinstance(p, Seq):
        return seq(p.left, seq(p.right, q))
    return Seq(p, q)


def seq_all(items: Iterable[BpaExpr]) -> BpaExpr:
    out: BpaExpr = EPS
    for item in reversed(list(items)):
        out = seq(item, out)
    return out


def choice_all(items: Iterable[BpaExpr]) -> BpaExpr:
    items = list(items)
    out = items[-1]
    for item in reversed(items[:-1]):
        out = Choice(item, out)
    return out


class BpaError(NestsubError):
    pass


class UnboundVariable(BpaError):
    pass


class NotGuarded(BpaError):
    pass


class NotDeterministic(BpaError):
    pass


class NotNormed(BpaError):
    pass


@dataclass(frozen=True)
class BpaSystem:
    equations: tuple[tuple[str, BpaExpr], ...]
    root: str

    @property
    def env(self) -> dict[str, BpaExpr]:
        return dict(self.equations)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.equations]


# ---------------------------------------------------------------------------
# Semantics

def bpa_step(sys: BpaSystem, e: BpaExpr, _env: dict | None = None) -> frozenset[tuple[str, BpaExpr]]:
    env = sys.env if _env is None else _env

    def go(e: BpaExpr, unfolding: frozenset[str]) -> set[tuple[str, BpaExpr]]:
        if isinstance(e, Action):
            return {(e.label, EPS)}
        if isinstance(e, Epsilon):
            return set()
        if isinstance(e, Choice):
            return go(e.left, unfolding) | go(e.right, unfolding)
        if isinstance(e, Seq):
            return {(a, seq(p, e.right)) for a, p in go(e.left, unfolding)}
        if isinstance(e, Var):
            if e.name not in env:
                raise UnboundVariable(f"unbound process variable {e.name}")
            if e.name in unfolding:
                raise NotGuarded(f"unguarded recursion through {e.name}")
            return go(env[e.name], unfolding | {e.name})
        raise TypeError(f"not a BPA expression: {e!r}")

    return frozenset(go(e, frozenset()))


def _sorted_steps(sys: BpaSystem, e: BpaExpr, env: dict) -> list[tuple[str, BpaExpr]]:
    return sorted(bpa_step(sys, e, env), key=lambda s: (s[0], format_bpa_expr(s[1])))


def accepted_up_to(sys: BpaSystem, e: BpaExpr, k: int) -> set[str]:
    env = sys.env
    words = set()
    frontier = {(e, "")}
    for n in range(k + 1):
        nxt = set()
        for x, w in frontier:
            if isinstance(x, Epsilon):
                words.add(w)
            elif n < k:
                for a, y in bpa_step(sys, x, env):
                    nxt.add((y, w + a))
        frontier = nxt
    return words


@dataclass(frozen=True)
class Included:
    bound: int
    kind = "included"


@dataclass(frozen=True)
class Witness:
    word: tuple[str, ...]
    kind = "witness"

    @property
    def text(self) -> str:
        return "".join(self.word) if all(len(a) == 1 for a in self.word) else " ".join(self.word)


def bounded_inclusion(sys: BpaSystem, p: str, q: str, k: int) -> Included | Witness:
    """Compare accepted words of length ≤ k; report the shortlex-least counterexample."""
    env = sys.env
    start = (frozenset({Var(p)}), frozenset({Var(q)}))
    level = [((), start)]
    seen = {start}
    for n in range(k + 1):
        nxt = []
        for word, (ps, qs) in level:
            if EPS in ps and EPS not in qs:
                return Witness(word)
            if n == k:
                continue
            moves: dict[str, tuple[set, set]] = {}
            for x in ps:
                for a, y in bpa_step(sys, x, env):
                    moves.setdefault(a, (set(), set()))[0].add(y)
            for x in qs:
                for a, y in bpa_step(sys, x, env):
                    if a in moves:
                        moves[a][1].add(y)
            for a in sorted(moves):
                state = (frozenset(moves[a][0]), frozenset(moves[a][1]))
                if state in seen:
                    continue
                seen.add(state)
                nxt.append((word + (a,), state))
        level = nxt
    return Included(k)


# ---------------------------------------------------------------------------
# Structural properties

def norms(sys: BpaSystem) -> dict[str, float]:
    env = sys.env
    norm = {n: math.inf for n in env}

    def of(e: BpaExpr) -> float:
        if isinstance(e, Action):
            return 1
        if isinstance(e, Epsilon):
            return 0
        if isinstance(e, Var):
            return norm[e.name]
        if isinstance(e, Choice):
            return min(of(e.left), of(e.right))
        return of(e.left) + of(e.right)

    changed = True
    while changed:
        changed = False
        for n, body in env.items():
            v = of(body)
            if v < norm[n]:
                norm[n] = v
                changed = True
    return norm


def expr_norm(sys: BpaSystem, e: BpaExpr, table: dict[str, float] | None = None) -> float:
    table = norms(sys) if table is None else table
    if isinstance(e, Action):
        return 1
    if isinstance(e, Epsilon):
        return 0
    if isinstance(e, Var):
        return table[e.name]
    if isinstance(e, Choice):
        return min(expr_norm(sys, e.left, table), expr_norm(sys, e.right, table))
    return expr_norm(sys, e.left, table) + expr_norm(sys, e.right, table)


def _check_guarded(name: str, e: BpaExpr, guarded: bool) -> None:
    if isinstance(e, Var) and not guarded:
        raise NotGuarded(f"equation {name}: variable {e.name} is not under an action")
    if isinstance(e, Epsilon):
        raise NotGuarded(f"equation {name}: ε inside a body")
    if isinstance(e, Choice):
        _check_guarded(name, e.left, guarded)
        _check_guarded(name, e.right, guarded)
    elif isinstance(e, Seq):
        _check_guarded(name, e.left, guarded)
        _check_guarded(name, e.right, True)


def check_system(sys: BpaSystem) -> None:
    """Raise unless the system is guarded, deterministic and normed."""
    env = sys.env
    if sys.root not in env:
        raise UnboundVariable(f"root {sys.root} has no equation")
    for name, body in sys.equations:
        _check_guarded(name, body, False)
    for name, body in sys.equations:
        labels = [a for a, _ in bpa_step(sys, body, env)]
        dup = sorted({a for a in labels if labels.count(a) > 1})
        if dup:
            raise NotDeterministic(f"equation {name}: label {dup[0]} has two successors")
    for name, v in norms(sys).items():
        if v == math.inf:
            raise NotNormed(f"equation {name} has no terminating trace")


# ---------------------------------------------------------------------------
# Translation to nested session types

ALPHA = "α"


def translate_expr(e: BpaExpr, alpha: Type = Param(ALPHA)) -> Type:
    if isinstance(e, Epsilon):
        return alpha
    if isinstance(e, Action):
        return InternalChoice(((e.label, alpha),))
    if isinstance(e, Var):
        return Named(e.name, (alpha,))
    if isinstance(e, Seq):
        return apply_param_subst(translate_expr(e.left),
                                 {ALPHA: translate_expr(e.right, alpha)})
    raise NotDeterministic("choice below a sequence cannot be translated")


def head_normal_form(sys: BpaSystem, e: BpaExpr) -> list[tuple[str, BpaExpr]]:
    return _sorted_steps(sys, e, sys.env)


def translate(sys: BpaSystem) -> tuple[dict[str, Definition], Named]:
    check_system(sys)
    defs = []
    for name, body in sys.equations:
        branches = tuple((a, translate_expr(p)) for a, p in head_normal_form(sys, body))
        defs.append((name, (ALPHA,), InternalChoice(branches)))
    sig = infer_variances(make_signature(defs))
    errors = check_signature_valid(sig)
    if errors:
        raise BpaError(str(errors[0]))
    return sig, root_type(sys.root)


def root_type(name: str) -> Named:
    return Named(name, (One(),))


def to_surface(sig: dict[str, Definition], checks: Iterable[tuple[str, str]] = ()) -> str:
    lines = []
    for name, d in sig.items():
        head = name + "".join(f"[{p}]" for p in d.params)
        lines.append(f"type {head} = {format_type(d.body)}")
    for lhs, rhs in checks:
        lines.append(f"check {format_type(root_type(lhs))} <= {format_type(root_type(rhs))}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Surface syntax

_BPA_TOKEN = re.compile(r"\s+|%[^\n]*|(?P<tok>[A-Za-z_][\w']*|[=;+.()])")


def parse_bpa(text: str) -> BpaSystem:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _BPA_TOKEN.match(text, pos)
        if m is None:
            line = text.count("\n", 0, pos) + 1
            raise BpaError(f"line {line}: unexpected character {text[pos]!r}")
        if m.group("tok"):
            tokens.append(m.group("tok"))
        pos = m.end()

    i = 0

    def peek() -> str | None:
        return tokens[i] if i < len(tokens) else None

    def take(expected: str | None = None) -> str:
        nonlocal i
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise BpaError(f"expected {expected or 'a token'}, found {tok or 'end of input'}")
        i += 1
        return tok

    def expr() -> list:
        alts = [sequence()]
        while peek() == "+":
            take("+")
            alts.append(sequence())
        return ["+", alts]

    def sequence() -> list:
        items = [atom()]
        while peek() == ".":
            take(".")
            items.append(atom())
        return [".", items]

    def atom():
        if peek() == "(":
            take("(")
            e = expr()
            take(")")
            return e
        tok = take()
        if not re.match(r"[A-Za-z_]", tok):
            raise BpaError(f"unexpected {tok!r}")
        return tok

    raw: list[tuple[str, object]] = []
    root = None
    while peek() is not None:
        kw = take()
        if kw == "proc":
            name = take()
            take("=")
            raw.append((name, expr()))
            take(";")
        elif kw == "root":
            root = take()
        else:
            raise BpaError(f"expected 'proc' or 'root', found {kw!r}")
    if not raw:
        raise BpaError("no equations")
    names = [n for n, _ in raw]
    if len(set(names)) != len(names):
        raise BpaError("variable defined twice")

    def build(node) -> BpaExpr:
        if isinstance(node, str):
            return Var(node) if node in names else Action(node)
        op, parts = node
        built = [build(p) for p in parts]
        if op == "+":
            return choice_all(built)
        return seq_all(built)

    return BpaSystem(tuple((n, build(e)) for n, e in raw), root or names[0])


def format_bpa_expr(e: BpaExpr, prec: int = 0) -> str:
    if isinstance(e, Action):
        return e.label
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Epsilon):
        return "ε"
    if isinstance(e, Choice):
        s = f"{format_bpa_expr(e.left, 0)} + {format_bpa_expr(e.right, 0)}"
        return f"({s})" if prec > 0 else s
    return f"{format_bpa_expr(e.left, 1)} . {format_bpa_expr(e.right, 1)}"


def format_bpa(sys: BpaSystem) -> str:
    lines = [f"proc {n} = {format_bpa_expr(b)} ;" for n, b in sys.equations]
    lines.append(f"root {sys.root}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Random systems

EXIT = "exit"


def gen_random(seed: int, n_vars: int, max_branches: int, max_seq_len: int,
               prefix: str = "X") -> BpaSystem:
    """A guarded, deterministic, normed system in head normal form."""
    rng = random.Random(seed)
    alphabet = [chr(ord("a") + i) for i in range(max(max_branches, 2) + 1)]
    names = [f"{prefix}{i}" for i in range(n_vars)]
    bodies: dict[str, list[tuple[str, list[BpaExpr]]]] = {}
    for name in names:
        labels = sorted(rng.sample(alphabet, rng.randint(1, max_branches)))
        summands = []
        for a in labels:
            rest: list[BpaExpr] = []
            for _ in range(rng.randint(0, max_seq_len - 1)):
                if rng.random() < 0.75:
                    rest.append(Var(rng.choice(names)))
                else:
                    rest.append(Action(rng.choice(alphabet)))
            summands.append((a, rest))
        bodies[name] = summands

    def system() -> BpaSystem:
        eqs = tuple((n, choice_all([seq_all([Action(a)] + rest) for a, rest in bodies[n]]))
                    for n in names)
        return BpaSystem(eqs, names[0])

    sys = system()
    for name, v in norms(sys).items():
        if v == math.inf:
            bodies[name].append((EXIT, []))
    return system()


def restricted_copy(sys: BpaSystem, rng: random.Random, prefix: str = "Y") -> BpaSystem:
    """Add a copy of every variable that keeps a random subset of its branches.

    The branch realizing the norm always survives, so the copy stays normed.
    Copies refer to copies, giving pairs that are often (not always) included.
    """
    table = norms(sys)
    env = sys.env
    rename = {n: prefix + n[1:] if n.startswith("X") else prefix + n for n in env}

    def ren(e: BpaExpr) -> BpaExpr:
        if isinstance(e, Var):
            return Var(rename[e.name])
        if isinstance(e, Seq):
            return Seq(ren(e.left), ren(e.right))
        if isinstance(e, Choice):
            return Choice(ren(e.left), ren(e.right))
        return e

    extra = []
    for name, body in sys.equations:
        hnf = head_normal_form(sys, body)
        best = min(hnf, key=lambda s: (1 + expr_norm(sys, s[1], table), s[0]))
        kept = [s for s in hnf if s == best or rng.random() < 0.6]
        extra.append((rename[name], choice_all([seq(Action(a), ren(p)) for a, p in kept])))
    return BpaSystem(sys.equations + tuple(extra), sys.root)


# ---------------------------------------------------------------------------
# Soundness fuzzing

@dataclass
class FuzzCase:
    index: int
    system: BpaSystem
    lhs: str
    rhs: str
    verdict: str = ""
    inclusion: str = ""
    witness: str = ""
    sim: str = ""


@dataclass
class FuzzReport:
    cases: list[FuzzCase] = field(default_factory=list)
    violations: list[FuzzCase] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.cases:
            out[c.verdict] = out.get(c.verdict, 0) + 1
        return out


def fuzz_cases(n: int, seed: int, max_vars: int = 5, max_branches: int = 3,
               max_seq_len: int = 3) -> list[FuzzCase]:
    rng = random.Random(seed)
    cases = []
    for i in range(n):
        n_vars = rng.randint(1, max_vars)
        base = gen_random(rng.randrange(2**31), n_vars, rng.randint(1, max_branches),
                          rng.randint(1, max_seq_len))
        sys = restricted_copy(base, rng)
        x = rng.randrange(n_vars)
        kind = i % 3
        if kind == 0:
            lhs, rhs = f"Y{x}", f"X{x}"
        elif kind == 1:
            lhs, rhs = f"X{x}", f"Y{x}"
        else:
            lhs, rhs = f"X{x}", f"X{rng.randrange(n_vars)}"
        cases.append(FuzzCase(i, sys, lhs, rhs))
    return cases


def fuzz(n: int, seed: int, bound: int = 10, k: int = 12, depth: int | None = None,
         checker_cls=None, max_goals: int | None = None) -> FuzzReport:
    """Run generated pairs through the checker and both oracles."""
    from .rename import internal_rename
    from .simoracle import RefutedAt, UnsupportedQuantifier, bounded_sim
    from .subtype import YES, Checker
    from .syntax import CheckQuery, Program, TypeDef

    checker_cls = checker_cls or Checker
    report = FuzzReport()
    for case in fuzz_cases(n, seed):
        sig, _ = translate(case.system)
        program = Program([TypeDef(name, d.params, d.body) for name, d in sig.items()]
                          + [CheckQuery(root_type(case.lhs), root_type(case.rhs))])
        renamed = internal_rename(program)
        q = renamed.queries[0]
        kwargs = {} if max_goals is None else {"max_goals": max_goals}
        checker = checker_cls(renamed.sig, renamed.seeds, depth=depth, **kwargs)
        verdict = checker.check(q.lhs, q.rhs)
        case.verdict = verdict.kind
        inc = bounded_inclusion(case.system, case.lhs, case.rhs, bound)
        case.inclusion = inc.kind
        if isinstance(inc, Witness):
            case.witness = inc.text
        try:
            sim = bounded_sim(renamed.sig, q.lhs, q.rhs, k)
            case.sim = sim.kind
        except UnsupportedQuantifier:
            sim = None
            case.sim = "unsupported"
        report.cases.append(case)
        if verdict.kind == YES and (isinstance(inc, Witness) or isinstance(sim, RefutedAt)):
            report.violations.append(case)
    return report
