"""Surface syntax: type AST, lexer, parser and pretty-printer.

The concrete syntax looks like::

    type nat = +{ z : 1, s : nat }
    type List[a] = +{ nil : 1, cons : a * List[a] }
    type HList = +{ nil : 1, cons : ?x. x * HList }
    eqtype T[x] <= T'[x]
    check List[nat] -o List[nat] <= List[even] -o List[nat]
    decl elem[k] : (x : nat) (t : Stack[k]) |- (s : Stack[Some[Stack[k]]])

``%`` starts a comment running to the end of the line.  Names generated by
the renaming pass start with ``%`` too, so they can never be written by hand.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union


# ---------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class InternalChoice:
    branches: tuple[tuple[str, "Type"], ...]

    def labels(self) -> list[str]:
        return [label for label, _ in self.branches]


@dataclass(frozen=True)
class ExternalChoice:
    branches: tuple[tuple[str, "Type"], ...]

    def labels(self) -> list[str]:
        return [label for label, _ in self.branches]


@dataclass(frozen=True)
class Tensor:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class Lolli:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Type"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Type"


@dataclass(frozen=True)
class QuantVar:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Named:
    """A defined type name applied to positional arguments.

    The arguments line up with the parameter list of the definition, so
    ``Named("List", (nat,))`` is the substitution ``nat/a`` for ``List[a]``.
    """

    name: str
    args: tuple["Type", ...] = ()


Type = Union[InternalChoice, ExternalChoice, Tensor, Lolli, One, Exists,
             Forall, QuantVar, Param, Named]

Choice = (InternalChoice, ExternalChoice)
Quantifier = (Exists, Forall)


def is_structural(t: Type) -> bool:
    return not isinstance(t, Named)


def children(t: Type) -> Iterator[Type]:
    """Immediate subexpressions, including arguments of type names."""
    if isinstance(t, Choice):
        for _, b in t.branches:
            yield b
    elif isinstance(t, (Tensor, Lolli)):
        yield t.left
        yield t.right
    elif isinstance(t, Quantifier):
        yield t.body
    elif isinstance(t, Named):
        yield from t.args


def free_vars(t: Type) -> tuple[set[str], set[str]]:
    """Return ``(free parameters, free quantified variables)`` of ``t``."""
    params: set[str] = set()
    qvars: set[str] = set()

    def walk(t: Type, bound: frozenset[str]) -> None:
        if isinstance(t, Param):
            params.add(t.name)
        elif isinstance(t, QuantVar):
            if t.name not in bound:
                qvars.add(t.name)
        elif isinstance(t, Quantifier):
            walk(t.body, bound | {t.var})
        else:
            for c in children(t):
                walk(c, bound)

    walk(t, frozenset())
    return params, qvars


def mentions_quantifier(t: Type) -> bool:
    if isinstance(t, (Exists, Forall, QuantVar)):
        return True
    return any(mentions_quantifier(c) for c in children(t))


# ---------------------------------------------------------------------------
# Programs

@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class TypeDef:
    name: str
    params: tuple[str, ...]
    body: Type
    pos: Pos = field(default=Pos(0, 0), compare=False)


@dataclass(frozen=True)
class EqType:
    """``eqtype lhs <= rhs`` (or ``=`` when bidirectional).

    Identifiers in an eqtype that are not type names are the variables of the
    declared closure; they appear in the sides as ``QuantVar``.
    """

    lhs: Type
    rhs: Type
    bidirectional: bool = False
    vars: tuple[str, ...] = ()
    pos: Pos = field(default=Pos(0, 0), compare=False)


@dataclass(frozen=True)
class CheckQuery:
    lhs: Type
    rhs: Type
    pos: Pos = field(default=Pos(0, 0), compare=False)


@dataclass(frozen=True)
class ProcDecl:
    name: str
    vars: tuple[str, ...]
    raw: str
    types: tuple[Type, ...]
    pos: Pos = field(default=Pos(0, 0), compare=False)


Item = Union[TypeDef, EqType, CheckQuery, ProcDecl]


@dataclass
class Program:
    items: list[Item] = field(default_factory=list)

    @property
    def typedefs(self) -> list[TypeDef]:
        return [i for i in self.items if isinstance(i, TypeDef)]

    @property
    def eqtypes(self) -> list[EqType]:
        return [i for i in self.items if isinstance(i, EqType)]

    @property
    def checks(self) -> list[CheckQuery]:
        return [i for i in self.items if isinstance(i, CheckQuery)]

    @property
    def decls(self) -> list[ProcDecl]:
        return [i for i in self.items if isinstance(i, ProcDecl)]


# ---------------------------------------------------------------------------
# Errors

class NestsubError(Exception):
    """Base class for every diagnostic raised by this package."""


class ParseError(NestsubError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class ScopeError(NestsubError):
    def __init__(self, pos: Pos, message: str):
        super().__init__(f"{pos}: {message}")
        self.pos = pos


class DuplicateDefinition(ScopeError):
    pass


class UnboundParameter(ScopeError):
    pass


class UnboundQuantVar(ScopeError):
    pass


class UndefinedName(ScopeError):
    pass


class ArityError(ScopeError):
    pass


# ---------------------------------------------------------------------------
# Lexer

KEYWORDS = {"type", "eqtype", "check", "decl"}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<op>-o|<=|\|-|[{}\[\]():,*?!.=+&$])
  | (?P<num>\d+)
  | (?P<ident>[^\W\d_][\w']*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str        # "op", "num", "ident", "kw", "eof"
    text: str
    line: int
    col: int
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(line, i - line_start + 1,
                             f"unexpected character {text[i]!r}")
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            value = m.group()
            if kind == "ident" and value in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, value, line, i - line_start + 1, i))
        i = m.end()
    tokens.append(Token("eof", "", line, i - line_start + 1, i))
    return tokens


# ---------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return ParseError(tok.line, tok.col, f"{message} (found {found!r})")

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "kw", "num") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected an identifier")
        tok = self.tok
        self.i += 1
        return tok

    # -- types ------------------------------------------------------------

    def type_(self, params: frozenset[str], bound: tuple[str, ...]) -> Type:
        left = self.ttype(params, bound)
        if self.accept("-o"):
            return Lolli(left, self.type_(params, bound))
        return left

    def ttype(self, params, bound) -> Type:
        left = self.atype(params, bound)
        if self.accept("*"):
            return Tensor(left, self.ttype(params, bound))
        return left

    def atype(self, params, bound) -> Type:
        tok = self.tok
        if tok.kind == "num":
            if tok.text != "1":
                raise self.error("only the numeral 1 denotes a type")
            self.i += 1
            return One()
        if self.accept("("):
            t = self.type_(params, bound)
            self.expect(")")
            return t
        if self.at("+") or self.at("&"):
            internal = self.tok.text == "+"
            self.i += 1
            self.expect("{")
            branches = self.branches(params, bound)
            self.expect("}")
            return InternalChoice(branches) if internal else ExternalChoice(branches)
        if self.at("?") or self.at("!"):
            existential = self.tok.text == "?"
            self.i += 1
            var = self.ident().text
            self.expect(".")
            body = self.type_(params, bound + (var,))
            return Exists(var, body) if existential else Forall(var, body)
        if tok.kind == "ident":
            self.i += 1
            args = []
            while self.accept("["):
                args.append(self.type_(params, bound))
                self.expect("]")
            if not args:
                if tok.text in bound:
                    return QuantVar(tok.text)
                if tok.text in params:
                    return Param(tok.text)
            return Named(tok.text, tuple(args))
        raise self.error("expected a type")

    def branches(self, params, bound) -> tuple[tuple[str, Type], ...]:
        result: list[tuple[str, Type]] = []
        seen = set()
        while True:
            tok = self.tok
            if tok.kind == "ident" or self.at("$"):
                self.i += 1
            else:
                raise self.error("expected a label")
            if tok.text in seen:
                raise ParseError(tok.line, tok.col,
                                 f"duplicate label {tok.text!r} in choice")
            seen.add(tok.text)
            self.expect(":")
            result.append((tok.text, self.type_(params, bound)))
            if not self.accept(","):
                return tuple(result)

    # -- items ------------------------------------------------------------

    def program(self) -> list[tuple[Item, str]]:
        items = []
        while self.tok.kind != "eof":
            tok = self.tok
            pos = Pos(tok.line, tok.col)
            if self.accept("type"):
                items.append((self.typedef(pos), "type"))
            elif self.accept("eqtype"):
                lhs = self.type_(frozenset(), ())
                if self.accept("<="):
                    bidirectional = False
                elif self.accept("="):
                    bidirectional = True
                else:
                    raise self.error("expected '<=' or '='")
                rhs = self.type_(frozenset(), ())
                items.append((EqType(lhs, rhs, bidirectional, (), pos), "eqtype"))
            elif self.accept("check"):
                lhs = self.type_(frozenset(), ())
                self.expect("<=")
                rhs = self.type_(frozenset(), ())
                items.append((CheckQuery(lhs, rhs, pos), "check"))
            elif self.accept("decl"):
                items.append((self.decl(tok, pos), "decl"))
            else:
                raise self.error("expected 'type', 'eqtype', 'check' or 'decl'")
        return items

    def typedef(self, pos: Pos) -> TypeDef:
        name = self.ident().text
        params: list[str] = []
        while self.accept("["):
            p = self.ident()
            if p.text in params:
                raise ParseError(p.line, p.col, f"duplicate parameter {p.text!r}")
            params.append(p.text)
            self.expect("]")
        self.expect("=")
        body = self.type_(frozenset(params), ())
        return TypeDef(name, tuple(params), body, pos)

    def decl(self, start: Token, pos: Pos) -> ProcDecl:
        name = self.ident().text
        vars_: list[str] = []
        while self.accept("["):
            vars_.append(self.ident().text)
            self.expect("]")
        self.expect(":")
        bound = tuple(vars_)
        types = []
        while not self.at("|-"):
            if self.accept("."):
                continue
            self.expect("(")
            self.ident()
            self.expect(":")
            types.append(self.type_(frozenset(), bound))
            self.expect(")")
        self.expect("|-")
        self.expect("(")
        self.ident()
        self.expect(":")
        types.append(self.type_(frozenset(), bound))
        end = self.expect(")")
        raw = self.text[start.offset:end.offset + 1]
        return ProcDecl(name, tuple(vars_), raw, tuple(types), pos)


def parse_type(text: str, params=(), qvars=()) -> Type:
    """Parse a single type.

    Identifiers listed in ``params`` become parameters and those in ``qvars``
    become quantified variables; every other identifier is a type name.
    """
    p = _Parser(text)
    t = p.type_(frozenset(params), tuple(qvars))
    if p.tok.kind != "eof":
        raise p.error("unexpected input after type")
    return t


def parse_program(text: str) -> Program:
    parsed = _Parser(text).program()
    arities: dict[str, int] = {}
    for item, _ in parsed:
        if isinstance(item, TypeDef):
            if item.name in arities:
                raise DuplicateDefinition(item.pos, f"type {item.name!r} defined twice")
            arities[item.name] = len(item.params)

    items: list[Item] = []
    for item, kind in parsed:
        if isinstance(item, TypeDef):
            body = _resolve(item.body, arities, item.pos, "type")
            items.append(TypeDef(item.name, item.params, body, item.pos))
        elif isinstance(item, EqType):
            free: list[str] = []
            lhs = _resolve(item.lhs, arities, item.pos, "eqtype", free)
            rhs = _resolve(item.rhs, arities, item.pos, "eqtype", free)
            items.append(EqType(lhs, rhs, item.bidirectional, tuple(free), item.pos))
        elif isinstance(item, CheckQuery):
            lhs = _resolve(item.lhs, arities, item.pos, "check")
            rhs = _resolve(item.rhs, arities, item.pos, "check")
            items.append(CheckQuery(lhs, rhs, item.pos))
        else:
            types = tuple(_resolve(t, arities, item.pos, "decl") for t in item.types)
            items.append(ProcDecl(item.name, item.vars, item.raw, types, item.pos))
    return Program(items)


def _resolve(t: Type, arities: dict[str, int], pos: Pos, kind: str,
             free: list[str] | None = None) -> Type:
    """Check every type name against the definitions.

    A bare identifier that names no definition is an unbound parameter in a
    type definition, a closure variable in an eqtype, and an error elsewhere.
    """
    def go(t: Type) -> Type:
        if isinstance(t, Named):
            if t.name not in arities:
                if t.args:
                    raise UndefinedName(pos, f"undefined type name {t.name!r}")
                if kind == "type":
                    raise UnboundParameter(pos, f"unbound type parameter {t.name!r}")
                if kind == "eqtype" and free is not None:
                    if t.name not in free:
                        free.append(t.name)
                    return QuantVar(t.name)
                raise UnboundQuantVar(pos, f"unbound type variable {t.name!r}")
            if len(t.args) != arities[t.name]:
                raise ArityError(pos, f"{t.name!r} expects {arities[t.name]} "
                                      f"argument(s), got {len(t.args)}")
            return Named(t.name, tuple(go(a) for a in t.args))
        return map_children(t, go)

    return go(t)


def map_children(t: Type, f) -> Type:
    if isinstance(t, InternalChoice):
        return InternalChoice(tuple((l, f(b)) for l, b in t.branches))
    if isinstance(t, ExternalChoice):
        return ExternalChoice(tuple((l, f(b)) for l, b in t.branches))
    if isinstance(t, Tensor):
        return Tensor(f(t.left), f(t.right))
    if isinstance(t, Lolli):
        return Lolli(f(t.left), f(t.right))
    if isinstance(t, Exists):
        return Exists(t.var, f(t.body))
    if isinstance(t, Forall):
        return Forall(t.var, f(t.body))
    if isinstance(t, Named):
        return Named(t.name, tuple(f(a) for a in t.args))
    return t


# ---------------------------------------------------------------------------
# Printer

def format_type(t: Type) -> str:
    return _fmt(t, 0, True)


def _fmt(t: Type, prec: int, last: bool) -> str:
    # prec: 0 anything, 1 lolli, 2 tensor, 3 atom.  ``last`` is false when
    # something follows in the same bracket, which a quantifier would swallow.
    if isinstance(t, Lolli):
        wrap = prec > 1
        s = f"{_fmt(t.left, 2, False)} -o {_fmt(t.right, 1, last or wrap)}"
        return f"({s})" if wrap else s
    if isinstance(t, Tensor):
        wrap = prec > 2
        s = f"{_fmt(t.left, 3, False)} * {_fmt(t.right, 2, last or wrap)}"
        return f"({s})" if wrap else s
    if isinstance(t, Quantifier):
        sym = "?" if isinstance(t, Exists) else "!"
        s = f"{sym}{t.var}. {_fmt(t.body, 0, True)}"
        return s if last else f"({s})"
    if isinstance(t, Choice):
        sym = "+" if isinstance(t, InternalChoice) else "&"
        inner = ", ".join(f"{l}: {_fmt(b, 0, True)}" for l, b in t.branches)
        return f"{sym}{{{inner}}}"
    if isinstance(t, One):
        return "1"
    if isinstance(t, (QuantVar, Param)):
        return t.name
    if isinstance(t, Named):
        return t.name + "".join(f"[{_fmt(a, 0, True)}]" for a in t.args)
    raise TypeError(f"not a type: {t!r}")
