"""Closure-based subtyping over an internally renamed signature.

Goals are normalized to variance + before any structural rule runs: ⊥ holds
outright, − swaps the sides and ⊤ checks both directions.  Closures are
therefore always stored at +.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .rename import Closure, apply_var_subst, whnf
from .syntax import (
    Exists, ExternalChoice, Forall, InternalChoice, Lolli, Named, NestsubError,
    One, QuantVar, Tensor, Type, format_type,
)
from .variance import BI, CO, CONTRA, NON, Signature, Variance, nest

DEFAULT_DEPTH = 50
DEFAULT_SIDE_DEPTH = 8
DEFAULT_MAX_GOALS = 100_000

YES, NO, UNKNOWN = "subtype", "not_subtype", "unknown"


def default_depth() -> int:
    value = os.environ.get("NESTSUB_DEPTH")
    return int(value) if value else DEFAULT_DEPTH


@dataclass(frozen=True)
class Step:
    """One rule application in a derivation attempt."""

    rule: str
    lhs: str
    rhs: str
    status: str
    children: tuple["Step", ...] = ()
    note: str = ""

    def to_dict(self) -> dict:
        d: dict = {"rule": self.rule, "goal": f"{self.lhs} <= {self.rhs}",
                   "status": self.status}
        if self.note:
            d["note"] = self.note
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


@dataclass(frozen=True)
class Goal:
    lhs: Type
    rhs: Type
    vars: tuple[str, ...] = ()
    variance: Variance = CO
    depth: int = DEFAULT_DEPTH


@dataclass(frozen=True)
class Verdict:
    trace: Step
    depth_used: int = 0
    seeds_used: tuple[str, ...] = ()
    alternation_violations: tuple[str, ...] = ()
    kind = "verdict"

    def __bool__(self) -> bool:
        return self.kind == YES


@dataclass(frozen=True)
class Subtype(Verdict):
    kind = YES


@dataclass(frozen=True)
class NotSubtype(Verdict):
    path: tuple[str, ...] = ()
    reason: str = ""
    kind = NO


@dataclass(frozen=True)
class Unknown(Verdict):
    reason: str = ""
    frontier: str = ""
    kind = UNKNOWN


class InvalidSeed(NestsubError):
    def __init__(self, failures: list[tuple[Closure, Verdict]]):
        lines = [f"{c.origin or c}: {v.kind}" for c, v in failures]
        super().__init__("invalid eqtype declaration(s): " + "; ".join(lines))
        self.failures = failures


def _combine(statuses: Iterable[str]) -> str:
    seen = set(statuses)
    if NO in seen:
        return NO
    if UNKNOWN in seen:
        return UNKNOWN
    return YES


def match_args(pattern: Sequence[Type], subject: Sequence[Type],
               match_vars: Iterable[str]) -> dict[str, Type] | None:
    """First-order matching: find σ with pattern[σ] == subject, or None."""
    mv = frozenset(match_vars)
    sigma: dict[str, Type] = {}

    def go(p: Type, s: Type) -> bool:
        if isinstance(p, QuantVar) and p.name in mv:
            bound = sigma.get(p.name)
            if bound is None:
                sigma[p.name] = s
                return True
            return bound == s
        if type(p) is not type(s):
            return False
        if isinstance(p, (InternalChoice, ExternalChoice)):
            if [l for l, _ in p.branches] != [l for l, _ in s.branches]:
                return False
            return all(go(a, b) for (_, a), (_, b) in zip(p.branches, s.branches))
        if isinstance(p, (Tensor, Lolli)):
            return go(p.left, s.left) and go(p.right, s.right)
        if isinstance(p, (Exists, Forall)):
            return p.var == s.var and p.var not in mv and go(p.body, s.body)
        if isinstance(p, Named):
            return (p.name == s.name and len(p.args) == len(s.args)
                    and all(go(a, b) for a, b in zip(p.args, s.args)))
        return p == s

    if len(pattern) != len(subject):
        return None
    for p, s in zip(pattern, subject):
        if not go(p, s):
            return None
    return sigma


class Checker:
    """Runs the algorithm for one signature and one seed set.

    A fresh counter state is used for every call to :meth:`check`, so
    repeated checks on the same inputs produce identical verdicts.
    """

    def __init__(self, sig: Signature, seeds: Sequence[Closure] = (),
                 depth: int | None = None, side_depth: int = DEFAULT_SIDE_DEPTH,
                 max_goals: int = DEFAULT_MAX_GOALS):
        self.sig = sig
        self.seeds = tuple(seeds)
        self.depth = default_depth() if depth is None else depth
        self.side_depth = side_depth
        self.max_goals = max_goals

    # -- public -------------------------------------------------------------

    def check(self, lhs: Type, rhs: Type, vars: Sequence[str] = (),
              variance: Variance = CO, *, force_expand: bool = False) -> Verdict:
        self._reset()
        gamma = self.seeds
        if force_expand:
            assert isinstance(lhs, Named) and isinstance(rhs, Named)
            step = self._expd(tuple(vars), lhs, rhs, gamma, 0, 0)
        else:
            self._entry(lhs, rhs)
            step = self._goal(tuple(vars), lhs, rhs, variance, gamma, 0, 0)
        return self._verdict(step)

    def check_subst(self, vars: Sequence[str], theta1: Sequence[Type],
                    theta2: Sequence[Type], at: Sequence[tuple[str, Variance]],
                    gamma: Sequence[Closure] | None = None) -> Verdict:
        self._reset()
        g = self.seeds if gamma is None else tuple(gamma)
        children = []
        for (p, v), a, b in zip(at, theta1, theta2):
            self._entry(a, b)
            children.append(self._goal(tuple(vars), a, b, v, g, 0, 0))
            if children[-1].status == NO:
                break
        lhs = "(" + ", ".join(format_type(a) for a in theta1) + ")"
        rhs = "(" + ", ".join(format_type(b) for b in theta2) + ")"
        step = Step("subs", lhs, rhs, _combine(c.status for c in children), tuple(children))
        return self._verdict(step)

    # -- hooks --------------------------------------------------------------

    def _plus_labels(self, lower: list[str], upper: list[str]) -> tuple[bool, list[str]]:
        """Label condition for internal choice at +; returns the labels to descend."""
        return set(lower) <= set(upper), lower

    def _with_labels(self, lower: list[str], upper: list[str]) -> tuple[bool, list[str]]:
        return set(lower) >= set(upper), upper

    # -- internals ----------------------------------------------------------

    def _reset(self) -> None:
        self._fresh = 0
        self._goals = 0
        self._max_depth = 0
        self._seeds_used: list[str] = []
        self._alternation: list[str] = []

    def _verdict(self, step: Step) -> Verdict:
        common = dict(trace=step, depth_used=self._max_depth,
                      seeds_used=tuple(self._seeds_used),
                      alternation_violations=tuple(self._alternation))
        if step.status == YES:
            return Subtype(**common)
        if step.status == NO:
            path, reason = _failure_path(step, NO)
            return NotSubtype(**common, path=path, reason=reason)
        path, reason = _failure_path(step, UNKNOWN)
        return Unknown(**common, reason=reason, frontier=path[-1] if path else "")

    def _entry(self, a: Type, b: Type) -> None:
        named = isinstance(a, Named) + isinstance(b, Named)
        if named == 1 and not (isinstance(a, QuantVar) or isinstance(b, QuantVar)):
            self._alternation.append(f"{format_type(a)} <= {format_type(b)}")

    def _goal(self, vars, a: Type, b: Type, v: Variance, gamma, depth: int, side: int) -> Step:
        self._goals += 1
        if self._goals > self.max_goals:
            return Step("budget", format_type(a), format_type(b), UNKNOWN, note="goals")
        if v is NON:
            return Step("⊥", format_type(a), format_type(b), YES)
        if v is CONTRA:
            child = self._goal(vars, b, a, CO, gamma, depth, side)
            return Step("−", format_type(a), format_type(b), child.status, (child,))
        if v is BI:
            first = self._goal(vars, a, b, CO, gamma, depth, side)
            kids = [first]
            if first.status != NO:
                kids.append(self._goal(vars, b, a, CO, gamma, depth, side))
            return Step("⊤", format_type(a), format_type(b),
                        _combine(k.status for k in kids), tuple(kids))
        if isinstance(a, Named) and isinstance(b, Named):
            return self._names(vars, a, b, gamma, depth, side)
        return self._struct(vars, whnf(self.sig, a), whnf(self.sig, b), gamma, depth, side)

    def _children(self, rule: str, a: Type, b: Type, goals, vars, gamma, depth, side) -> Step:
        kids = []
        for x, y, v, vs in goals:
            if not (isinstance(x, Named) and isinstance(y, Named)):
                self._alternation.append(f"{rule}: {format_type(x)} <= {format_type(y)}")
            kid = self._goal(vs, x, y, v, gamma, depth, side)
            kids.append(kid)
            if kid.status == NO:
                break
        return Step(rule, format_type(a), format_type(b),
                    _combine(k.status for k in kids), tuple(kids))

    def _struct(self, vars, a: Type, b: Type, gamma, depth: int, side: int) -> Step:
        sa, sb = format_type(a), format_type(b)

        def fail(rule: str, reason: str) -> Step:
            return Step(rule, sa, sb, NO, note=reason)

        if isinstance(a, InternalChoice) and isinstance(b, InternalChoice):
            ok, labels = self._plus_labels(a.labels(), b.labels())
            if not ok:
                return fail("⊕", f"labels {{{', '.join(a.labels())}}} not included in "
                                 f"{{{', '.join(b.labels())}}}")
            ta, tb = dict(a.branches), dict(b.branches)
            return self._children("⊕", a, b, [(ta[l], tb[l], CO, vars) for l in labels],
                                  vars, gamma, depth, side)
        if isinstance(a, ExternalChoice) and isinstance(b, ExternalChoice):
            ok, labels = self._with_labels(a.labels(), b.labels())
            if not ok:
                return fail("&", f"labels {{{', '.join(b.labels())}}} not included in "
                                 f"{{{', '.join(a.labels())}}}")
            ta, tb = dict(a.branches), dict(b.branches)
            return self._children("&", a, b, [(ta[l], tb[l], CO, vars) for l in labels],
                                  vars, gamma, depth, side)
        if isinstance(a, Tensor) and isinstance(b, Tensor):
            return self._children("⊗", a, b, [(a.left, b.left, CO, vars),
                                              (a.right, b.right, CO, vars)],
                                  vars, gamma, depth, side)
        if isinstance(a, Lolli) and isinstance(b, Lolli):
            return self._children("⊸", a, b, [(a.left, b.left, CONTRA, vars),
                                              (a.right, b.right, CO, vars)],
                                  vars, gamma, depth, side)
        if isinstance(a, One) and isinstance(b, One):
            return Step("1", sa, sb, YES)
        if (isinstance(a, Exists) and isinstance(b, Exists)) or \
                (isinstance(a, Forall) and isinstance(b, Forall)):
            z = f"%z{self._fresh}"
            self._fresh += 1
            ta = apply_var_subst(a.body, {a.var: QuantVar(z)})
            tb = apply_var_subst(b.body, {b.var: QuantVar(z)})
            rule = "∃" if isinstance(a, Exists) else "∀"
            return self._children(rule, a, b, [(ta, tb, CO, vars + (z,))],
                                  vars, gamma, depth, side)
        if isinstance(a, QuantVar) and isinstance(b, QuantVar):
            if a.name == b.name:
                return Step("var", sa, sb, YES)
            return fail("var", "distinct variables")
        return fail("clash", "constructor mismatch")

    def _names(self, vars, a: Named, b: Named, gamma, depth: int, side: int) -> Step:
        sa, sb = format_type(a), format_type(b)
        # def
        for cl in reversed(gamma):
            if cl.lhs.name != a.name or cl.rhs.name != b.name:
                continue
            for strategy in ("lhs", "rhs"):
                if strategy == "lhs":
                    sigma = match_args(cl.lhs.args, a.args, cl.vars)
                else:
                    sigma = match_args(cl.rhs.args, b.args, cl.vars)
                if sigma is None or any(x not in sigma for x in cl.vars):
                    continue
                note = f"closure {cl}; σ = {_format_sigma(sigma)}"
                if strategy == "lhs":
                    x, y = apply_var_subst(cl.rhs, sigma), b
                else:
                    x, y = a, apply_var_subst(cl.lhs, sigma)
                if x == y:
                    self._use(cl)
                    return Step("def", sa, sb, YES, note=note)
                if side >= self.side_depth:
                    continue
                sub = self._goal(vars, x, y, CO, gamma, depth, side + 1)
                if sub.status == YES:
                    self._use(cl)
                    return Step("def", sa, sb, YES, (sub,), note)
        # refl
        if a.name == b.name:
            d = self.sig[a.name]
            kids = []
            for (p, v), x, y in zip(d.context, a.args, b.args):
                if v is not NON:
                    self._entry(x, y)
                kid = self._goal(vars, x, y, nest(v, CO), gamma, depth, side)
                kids.append(kid)
                if kid.status == NO:
                    break
            return Step("refl", sa, sb, _combine(k.status for k in kids), tuple(kids))
        # expd
        return self._expd(vars, a, b, gamma, depth, side)

    def _expd(self, vars, a: Named, b: Named, gamma, depth: int, side: int) -> Step:
        sa, sb = format_type(a), format_type(b)
        if depth >= self.depth:
            return Step("expd", sa, sb, UNKNOWN, note="depth")
        self._max_depth = max(self._max_depth, depth + 1)
        cl = Closure(tuple(vars), a, b)
        ua, ub = whnf(self.sig, a), whnf(self.sig, b)
        self._entry(ua, ub)
        child = self._struct(vars, ua, ub, gamma + (cl,), depth + 1, side)
        return Step("expd", sa, sb, child.status, (child,))

    def _use(self, cl: Closure) -> None:
        if cl.origin and cl.origin not in self._seeds_used:
            self._seeds_used.append(cl.origin)


def _format_sigma(sigma: Mapping[str, Type]) -> str:
    if not sigma:
        return "{}"
    return "{" + ", ".join(f"{k} ↦ {format_type(v)}" for k, v in sorted(sigma.items())) + "}"


def _failure_path(step: Step, status: str) -> tuple[tuple[str, ...], str]:
    path = []
    node = step
    while True:
        path.append(f"{node.rule}: {node.lhs} <= {node.rhs}")
        nxt = next((c for c in node.children if c.status == status), None)
        if nxt is None:
            return tuple(path), node.note
        node = nxt


# ---------------------------------------------------------------------------
# Functional interface

def check_subtype(sig: Signature, seeds: Sequence[Closure], goal: Goal,
                  checker_cls: type[Checker] = Checker) -> Verdict:
    return checker_cls(sig, seeds, depth=goal.depth).check(
        goal.lhs, goal.rhs, goal.vars, goal.variance)


def check_subst_subtype(sig: Signature, gamma: Sequence[Closure], vars: Sequence[str],
                        theta1: Sequence[Type], theta2: Sequence[Type],
                        at: Sequence[tuple[str, Variance]]) -> Verdict:
    return Checker(sig, gamma).check_subst(vars, theta1, theta2, at)


def validate_eqtypes(sig: Signature, closures: Sequence[Closure],
                     checker_cls: type[Checker] = Checker,
                     depth: int | None = None) -> list[Closure]:
    """Check every seed under the full seed set; return the set or raise.

    Each seed is expanded once before any closure may be used, so a
    declaration can never justify itself without looking at the types.
    """
    checker = checker_cls(sig, closures, depth=depth)
    failures = []
    for cl in closures:
        v = checker.check(cl.lhs, cl.rhs, cl.vars, force_expand=True)
        if v.kind != YES:
            failures.append((cl, v))
    if failures:
        raise InvalidSeed(failures)
    return list(closures)


def format_trace(step: Step, indent: int = 0) -> str:
    mark = {YES: "✓", NO: "✗", UNKNOWN: "?"}[step.status]
    line = f"{'  ' * indent}{mark} [{step.rule}] {step.lhs} <= {step.rhs}"
    if step.note:
        line += f"  ({step.note})"
    return "\n".join([line] + [format_trace(c, indent + 1) for c in step.children])
