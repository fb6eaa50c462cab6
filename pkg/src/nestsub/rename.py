"""Substitution, unfolding and the internal renaming pass.

After renaming, every continuation position (choice branch, either side of
``*`` or ``-o``, quantifier body) holds a type name, so the subtyping checker
only ever compares two structural types or two names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .syntax import (
    CheckQuery, EqType, Exists, ExternalChoice, Forall, InternalChoice, Lolli,
    Named, NestsubError, Param, ProcDecl, Program, QuantVar, Tensor, Type,
    TypeDef, format_type, free_vars, map_children,
)
from .variance import Definition, Signature, infer_variances, make_signature


class UndefinedName(NestsubError):
    pass


# ---------------------------------------------------------------------------
# Substitution

def _fresh(name: str, avoid: set[str]) -> str:
    while name in avoid:
        name += "'"
    return name


def substitute(t: Type, params: Mapping[str, Type], qvars: Mapping[str, Type]) -> Type:
    """Simultaneously replace parameters and free quantified variables.

    Binders that would capture a free variable of a payload are renamed.
    """
    if not params and not qvars:
        return t
    if isinstance(t, Param):
        return params.get(t.name, t)
    if isinstance(t, QuantVar):
        return qvars.get(t.name, t)
    if isinstance(t, (Exists, Forall)):
        inner = {k: v for k, v in qvars.items() if k != t.var}
        payload_vars: set[str] = set()
        for v in list(inner.values()) + list(params.values()):
            payload_vars |= free_vars(v)[1]
        var = t.var
        if var in payload_vars:
            var = _fresh(var, payload_vars | free_vars(t.body)[1])
            inner[t.var] = QuantVar(var)
        body = substitute(t.body, params, inner)
        return Exists(var, body) if isinstance(t, Exists) else Forall(var, body)
    return map_children(t, lambda c: substitute(c, params, qvars))


def apply_param_subst(t: Type, theta: Mapping[str, Type]) -> Type:
    return substitute(t, theta, {})


def apply_var_subst(t: Type, sigma: Mapping[str, Type]) -> Type:
    return substitute(t, {}, sigma)


def unfold(sig: Signature, t: Type) -> Type:
    if not isinstance(t, Named):
        return t
    d = sig.get(t.name)
    if d is None:
        raise UndefinedName(f"undefined type name {t.name!r}")
    return apply_param_subst(d.body, dict(zip(d.params, t.args)))


def whnf(sig: Signature, t: Type) -> Type:
    """Unfold until the head is not a type name.

    Contractive definitions guarantee progress except for leaf bodies such
    as ``X[a] = a``, which simply pass their argument through.
    """
    while isinstance(t, Named):
        t = unfold(sig, t)
    return t


# ---------------------------------------------------------------------------
# Closures and renamed programs

@dataclass(frozen=True)
class Closure:
    """``<vars> lhs <= rhs`` at variance +, with both sides type names."""

    vars: tuple[str, ...]
    lhs: Named
    rhs: Named
    origin: str = field(default="", compare=False)

    def __str__(self) -> str:
        vs = ", ".join(self.vars)
        return f"<{vs}> {format_type(self.lhs)} <= {format_type(self.rhs)}"


@dataclass(frozen=True)
class RenamedQuery:
    source: CheckQuery
    lhs: Named
    rhs: Named

    @property
    def text(self) -> str:
        return f"{format_type(self.source.lhs)} <= {format_type(self.source.rhs)}"


@dataclass(frozen=True)
class RenamedEqType:
    source: EqType
    closures: tuple[Closure, ...]

    @property
    def text(self) -> str:
        op = "=" if self.source.bidirectional else "<="
        return f"{format_type(self.source.lhs)} {op} {format_type(self.source.rhs)}"


@dataclass
class RenamedProgram:
    sig: dict[str, Definition]
    seeds: list[Closure]
    eqtypes: list[RenamedEqType]
    queries: list[RenamedQuery]
    decls: list[ProcDecl]
    original: dict[str, Definition]

    @property
    def internal_names(self) -> list[str]:
        return [n for n in self.sig if n.startswith("%")]


# ---------------------------------------------------------------------------
# Renaming

def is_internal(name: str) -> bool:
    return name.startswith("%")


class _Renamer:
    def __init__(self) -> None:
        self.defs: list[tuple[str, tuple[str, ...], Type]] = []
        self.cache: dict[Type, str] = {}
        self.n_internal = 0
        self.n_wrapper = 0

    def body(self, t: Type, params: tuple[str, ...], bound: tuple[str, ...]) -> Type:
        """Replace every continuation of a structural body by a type name."""
        def cont(c: Type, bound: tuple[str, ...]) -> Type:
            return self.cont(c, params, bound)

        if isinstance(t, InternalChoice):
            return InternalChoice(tuple((l, cont(b, bound)) for l, b in t.branches))
        if isinstance(t, ExternalChoice):
            return ExternalChoice(tuple((l, cont(b, bound)) for l, b in t.branches))
        if isinstance(t, Tensor):
            return Tensor(cont(t.left, bound), cont(t.right, bound))
        if isinstance(t, Lolli):
            return Lolli(cont(t.left, bound), cont(t.right, bound))
        if isinstance(t, Exists):
            return Exists(t.var, cont(t.body, bound + (t.var,)))
        if isinstance(t, Forall):
            return Forall(t.var, cont(t.body, bound + (t.var,)))
        if isinstance(t, Named):
            return self.cont(t, params, bound)
        return t

    def cont(self, c: Type, params: tuple[str, ...], bound: tuple[str, ...]) -> Named:
        if isinstance(c, Named):
            return Named(c.name, tuple(self.arg(a, params, bound) for a in c.args))
        return self.name_for(c, params, bound)

    def arg(self, a: Type, params: tuple[str, ...], bound: tuple[str, ...]) -> Type:
        if isinstance(a, (Param, QuantVar)):
            return a
        return self.cont(a, params, bound)

    def name_for(self, e: Type, params: tuple[str, ...], bound: tuple[str, ...]) -> Named:
        ps, qs = free_vars(e)
        plist = [p for p in params if p in ps]
        qlist: list[str] = []
        for x in bound:
            if x in qs and x not in qlist:
                qlist.append(x)
        # Quantified variables become parameters of the new name.
        formal = list(plist)
        qmap: dict[str, Type] = {}
        for x in qlist:
            y = _fresh(x, set(formal))
            formal.append(y)
            qmap[x] = Param(y)
        lifted = substitute(e, {}, qmap)
        canon = substitute(lifted, {p: Param(f"#{i}") for i, p in enumerate(formal)}, {})
        name = self.cache.get(canon)
        if name is None:
            self.n_internal += 1
            name = f"%X{self.n_internal}"
            self.cache[canon] = name
            self.defs.append((name, tuple(formal), None))  # placeholder keeps order
            idx = len(self.defs) - 1
            self.defs[idx] = (name, tuple(formal), self.body(lifted, tuple(formal), ()))
        actuals = tuple(Param(p) for p in plist) + tuple(QuantVar(x) for x in qlist)
        return Named(name, actuals)

    def wrap(self, t: Type, vars: tuple[str, ...]) -> Named:
        """Name one side of a query or eqtype.  Named sides keep their head."""
        if isinstance(t, Named):
            return Named(t.name, tuple(self.arg(a, (), vars) for a in t.args))
        qs = free_vars(t)[1]
        formal = [x for x in vars if x in qs]
        lifted = substitute(t, {}, {x: Param(x) for x in formal})
        self.n_wrapper += 1
        name = f"%Q{self.n_wrapper}"
        self.defs.append((name, tuple(formal), self.body(lifted, tuple(formal), ())))
        return Named(name, tuple(QuantVar(x) for x in formal))


def internal_rename(program: Program) -> RenamedProgram:
    r = _Renamer()
    original = infer_variances(make_signature(
        (d.name, d.params, d.body) for d in program.typedefs))
    renamed_bodies = []
    for d in program.typedefs:
        renamed_bodies.append((d.name, d.params, r.body(d.body, d.params, ())))

    eqtypes = []
    seeds: list[Closure] = []
    for e in program.eqtypes:
        lhs = r.wrap(e.lhs, e.vars)
        rhs = r.wrap(e.rhs, e.vars)
        op = "=" if e.bidirectional else "<="
        origin = f"{format_type(e.lhs)} {op} {format_type(e.rhs)}"
        cl = [Closure(e.vars, lhs, rhs, origin)]
        if e.bidirectional:
            cl.append(Closure(e.vars, rhs, lhs, origin))
        seeds.extend(cl)
        eqtypes.append(RenamedEqType(e, tuple(cl)))

    queries = []
    for q in program.checks:
        queries.append(RenamedQuery(q, r.wrap(q.lhs, ()), r.wrap(q.rhs, ())))

    sig = infer_variances(make_signature(renamed_bodies + r.defs))
    return RenamedProgram(sig, seeds, eqtypes, queries, program.decls, original)


def rename_typedefs(defs: list[TypeDef]) -> dict[str, Definition]:
    return internal_rename(Program(list(defs))).sig


# ---------------------------------------------------------------------------
# Helpers

CONTINUATION_TYPES = (InternalChoice, ExternalChoice, Tensor, Lolli, Exists, Forall)


def continuations(t: Type) -> list[Type]:
    if isinstance(t, (InternalChoice, ExternalChoice)):
        return [b for _, b in t.branches]
    if isinstance(t, (Tensor, Lolli)):
        return [t.left, t.right]
    if isinstance(t, (Exists, Forall)):
        return [t.body]
    return []


def alternation_violations(sig: Signature) -> list[str]:
    """Definitions with a continuation that is not a type name."""
    bad = []
    for name, d in sig.items():
        if isinstance(d.body, Named):
            bad.append(f"{name}: body is a type name")
        for c in continuations(d.body):
            if not isinstance(c, Named):
                bad.append(f"{name}: continuation {format_type(c)}")
    return bad


def qualify_type(t: Type, names: set[str], prefix: str) -> Type:
    if isinstance(t, Named):
        name = prefix + t.name if t.name in names else t.name
        return Named(name, tuple(qualify_type(a, names, prefix) for a in t.args))
    return map_children(t, lambda c: qualify_type(c, names, prefix))


def qualify(sig: Signature, prefix: str) -> dict[str, Definition]:
    """Prefix every defined name, so two signatures can be merged."""
    names = set(sig)
    return {prefix + n: Definition(prefix + n, d.params, d.variances,
                                   qualify_type(d.body, names, prefix))
            for n, d in sig.items()}

