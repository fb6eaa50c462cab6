"""Brute-force bounded type simulation for closed, quantifier-free types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .rename import Closure, whnf
from .subtype import YES, Checker, Verdict
from .syntax import (
    Exists, ExternalChoice, Forall, InternalChoice, Lolli, NestsubError, One,
    QuantVar, Tensor, Type, format_type, free_vars,
)
from .variance import Signature

DEFAULT_K = 12
DEFAULT_NODE_CAP = 100_000


class UnsupportedQuantifier(NestsubError):
    pass


@dataclass(frozen=True)
class HoldsUpTo:
    k: int
    kind = "holds"


@dataclass(frozen=True)
class RefutedAt:
    depth: int
    path: tuple[str, ...]
    reason: str = ""
    kind = "refuted"


@dataclass(frozen=True)
class ResourceExceeded:
    nodes: int
    kind = "resource"


SimResult = HoldsUpTo | RefutedAt | ResourceExceeded


def _expand(sig: Signature, a: Type, b: Type):
    """Apply one simulation clause: ``(successor pairs, None)`` or ``(None, reason)``."""
    ua, ub = whnf(sig, a), whnf(sig, b)
    for t in (ua, ub):
        if isinstance(t, (Exists, Forall, QuantVar)):
            raise UnsupportedQuantifier(f"quantified type {format_type(t)} in oracle goal")
        if free_vars(t) != (set(), set()):
            raise UnsupportedQuantifier(f"open type {format_type(t)} in oracle goal")
    if isinstance(ua, InternalChoice) and isinstance(ub, InternalChoice):
        tb = dict(ub.branches)
        missing = [l for l, _ in ua.branches if l not in tb]
        if missing:
            return None, f"label {missing[0]} missing on the right"
        return [(l, c, tb[l]) for l, c in ua.branches], None
    if isinstance(ua, ExternalChoice) and isinstance(ub, ExternalChoice):
        ta = dict(ua.branches)
        missing = [l for l, _ in ub.branches if l not in ta]
        if missing:
            return None, f"label {missing[0]} missing on the left"
        return [(l, ta[l], c) for l, c in ub.branches], None
    if isinstance(ua, Tensor) and isinstance(ub, Tensor):
        return [("⊗1", ua.left, ub.left), ("⊗2", ua.right, ub.right)], None
    if isinstance(ua, Lolli) and isinstance(ub, Lolli):
        return [("⊸1", ub.left, ua.left), ("⊸2", ua.right, ub.right)], None
    if isinstance(ua, One) and isinstance(ub, One):
        return [], None
    return None, f"{type(ua).__name__} vs {type(ub).__name__}"


def bounded_sim(sig: Signature, a: Type, b: Type, k: int = DEFAULT_K,
                node_cap: int = DEFAULT_NODE_CAP) -> SimResult:
    """Depth-k approximation of type simulation.

    Level d holds the pairs reached after d-1 unfoldings; a pair already seen
    at an earlier level needs no re-examination because its own successors
    are already scheduled at least as deep.
    """
    level: list[tuple[Type, Type, tuple[str, ...]]] = [(a, b, ())]
    seen = {(a, b)}
    nodes = 1
    for depth in range(1, k + 1):
        nxt = []
        for x, y, path in level:
            succ, reason = _expand(sig, x, y)
            if succ is None:
                return RefutedAt(depth, path, reason)
            for label, x2, y2 in succ:
                if (x2, y2) in seen:
                    continue
                seen.add((x2, y2))
                nodes += 1
                if nodes > node_cap:
                    return ResourceExceeded(nodes)
                nxt.append((x2, y2, path + (label,)))
        if not nxt:
            break
        level = nxt
    return HoldsUpTo(k)


@dataclass
class CrossCheckReport:
    checked: int = 0
    violations: list[tuple[Type, Type, Verdict, RefutedAt]] = field(default_factory=list)
    inconclusive: list[tuple[Type, Type, str]] = field(default_factory=list)
    verdicts: dict[str, int] = field(default_factory=dict)

    def summary(self) -> str:
        return (f"{self.checked} goals, {len(self.violations)} violations, "
                f"{len(self.inconclusive)} inconclusive oracle runs")


def cross_check(sig: Signature, seeds: Sequence[Closure],
                goals: Sequence[tuple[Type, Type]], k: int = DEFAULT_K,
                node_cap: int = DEFAULT_NODE_CAP,
                checker_cls: type[Checker] = Checker,
                depth: int | None = None) -> CrossCheckReport:
    """Flag every goal the algorithm accepts but the oracle refutes."""
    report = CrossCheckReport()
    checker = checker_cls(sig, seeds, depth=depth)
    for a, b in goals:
        report.checked += 1
        verdict = checker.check(a, b)
        report.verdicts[verdict.kind] = report.verdicts.get(verdict.kind, 0) + 1
        if verdict.kind != YES:
            continue
        try:
            result = bounded_sim(sig, a, b, k, node_cap)
        except UnsupportedQuantifier as e:
            report.inconclusive.append((a, b, str(e)))
            continue
        if isinstance(result, RefutedAt):
            report.violations.append((a, b, verdict, result))
        elif isinstance(result, ResourceExceeded):
            report.inconclusive.append((a, b, f"node cap after {result.nodes} nodes"))
    return report
