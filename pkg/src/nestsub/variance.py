"""Variance lattice, nesting, inference and validity judgments."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .syntax import (
    Exists, ExternalChoice, Forall, InternalChoice, Lolli, Named, NestsubError,
    One, Param, QuantVar, Tensor, Type, format_type,
)


class Variance(Enum):
    CO = "+"
    CONTRA = "-"
    BI = "⊤"
    NON = "⊥"

    def __str__(self) -> str:
        return self.value


CO, CONTRA, BI, NON = Variance.CO, Variance.CONTRA, Variance.BI, Variance.NON
ALL_VARIANCES = (CO, CONTRA, BI, NON)


def variance_leq(a: Variance, b: Variance) -> bool:
    return a is b or a is NON or b is BI


def nest(a: Variance, b: Variance) -> Variance:
    if a is NON or b is NON:
        return NON
    if a is CO:
        return b
    if b is CO:
        return a
    if a is CONTRA and b is CONTRA:
        return CO
    return BI


def neg(a: Variance) -> Variance:
    return nest(CONTRA, a)


def join(a: Variance, b: Variance) -> Variance:
    if variance_leq(a, b):
        return b
    if variance_leq(b, a):
        return a
    return BI


VarianceContext = tuple[tuple[str, Variance], ...]


def nest_context(ctx: VarianceContext, b: Variance) -> VarianceContext:
    return tuple((name, nest(v, b)) for name, v in ctx)


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[str, ...]
    variances: tuple[Variance, ...]
    body: Type

    @property
    def context(self) -> VarianceContext:
        return tuple(zip(self.params, self.variances))

    def with_variances(self, variances: Iterable[Variance]) -> "Definition":
        return Definition(self.name, self.params, tuple(variances), self.body)


Signature = Mapping[str, Definition]


def make_signature(defs: Iterable[tuple[str, tuple[str, ...], Type]]) -> dict[str, Definition]:
    """Build a signature with every variance at ⊥, ready for inference."""
    return {name: Definition(name, tuple(params), (NON,) * len(params), body)
            for name, params, body in defs}


class ValidityError(NestsubError):
    def __init__(self, path: tuple[str, ...], message: str):
        where = "/".join(path) if path else "<root>"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.message = message


# ---------------------------------------------------------------------------
# Inference

def _occurrences(t: Type, at: Variance, sig: Signature,
                 out: dict[str, Variance]) -> None:
    if isinstance(t, Param):
        out[t.name] = join(out.get(t.name, NON), at)
    elif isinstance(t, (InternalChoice, ExternalChoice)):
        for _, b in t.branches:
            _occurrences(b, at, sig, out)
    elif isinstance(t, Tensor):
        _occurrences(t.left, at, sig, out)
        _occurrences(t.right, at, sig, out)
    elif isinstance(t, Lolli):
        _occurrences(t.left, neg(at), sig, out)
        _occurrences(t.right, at, sig, out)
    elif isinstance(t, (Exists, Forall)):
        _occurrences(t.body, at, sig, out)
    elif isinstance(t, Named):
        d = sig[t.name]
        for v, arg in zip(d.variances, t.args):
            _occurrences(arg, nest(v, at), sig, out)


def infer_variances(sig: Signature) -> dict[str, Definition]:
    """Least fixed point of the occurrence-variance equations, starting at ⊥."""
    current = {name: d.with_variances((NON,) * len(d.params)) for name, d in sig.items()}
    changed = True
    while changed:
        changed = False
        for name, d in current.items():
            occ: dict[str, Variance] = {}
            _occurrences(d.body, CO, current, occ)
            new = tuple(join(old, occ.get(p, NON)) for p, old in zip(d.params, d.variances))
            if new != d.variances:
                current[name] = d.with_variances(new)
                changed = True
    return current


# ---------------------------------------------------------------------------
# Validity

def check_type_valid(vars: Iterable[str], ctx: VarianceContext, t: Type,
                     at: Variance, sig: Signature,
                     path: tuple[str, ...] = ()) -> None:
    vs = frozenset(vars)
    ctx_map = dict(ctx)

    def go(t: Type, at: Variance, vs: frozenset[str], path: tuple[str, ...]) -> None:
        if isinstance(t, (InternalChoice, ExternalChoice)):
            if not t.branches:
                raise ValidityError(path, "empty choice")
            for label, b in t.branches:
                go(b, at, vs, path + (label,))
        elif isinstance(t, Tensor):
            go(t.left, at, vs, path + ("*1",))
            go(t.right, at, vs, path + ("*2",))
        elif isinstance(t, Lolli):
            go(t.left, neg(at), vs, path + ("-o1",))
            go(t.right, at, vs, path + ("-o2",))
        elif isinstance(t, (Exists, Forall)):
            go(t.body, at, vs | {t.var}, path + (t.var,))
        elif isinstance(t, One):
            pass
        elif isinstance(t, QuantVar):
            if t.name not in vs:
                raise ValidityError(path, f"unbound variable {t.name}")
        elif isinstance(t, Param):
            if t.name not in ctx_map:
                raise ValidityError(path, f"unbound parameter {t.name}")
            declared = ctx_map[t.name]
            if not variance_leq(at, declared):
                raise ValidityError(path, f"parameter {t.name} # {declared} "
                                          f"used at variance {at}")
        elif isinstance(t, Named):
            if t.name not in sig:
                raise ValidityError(path, f"undefined type name {t.name}")
            d = sig[t.name]
            if len(d.params) != len(t.args):
                raise ValidityError(path, f"{t.name} expects {len(d.params)} arguments")
            for (p, v), arg in zip(d.context, t.args):
                go(arg, nest(v, at), vs, path + (f"{t.name}.{p}",))
        else:
            raise TypeError(f"not a type: {t!r}")

    go(t, at, vs, path)


def check_subst_valid(vars: Iterable[str], ctx: VarianceContext,
                      theta: tuple[Type, ...], target: VarianceContext,
                      sig: Signature, path: tuple[str, ...] = ()) -> None:
    if len(theta) != len(target):
        raise ValidityError(path, "substitution length mismatch")
    for arg, (p, v) in zip(theta, target):
        check_type_valid(vars, ctx, arg, v, sig, path + (p,))


def check_signature_valid(sig: Signature) -> list[ValidityError]:
    errors = []
    for name, d in sig.items():
        if isinstance(d.body, Named):
            errors.append(ValidityError((name,), "definition is not contractive: "
                                                 f"body {format_type(d.body)} is a type name"))
            continue
        if len(set(d.params)) != len(d.params):
            errors.append(ValidityError((name,), "duplicate parameter"))
            continue
        try:
            check_type_valid((), d.context, d.body, CO, sig, (name,))
        except ValidityError as e:
            errors.append(e)
    return errors


def format_definition_header(d: Definition) -> str:
    return d.name + "".join(f"[{p} # {v}]" for p, v in d.context)
