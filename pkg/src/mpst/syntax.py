"""Abstract syntax, concrete syntax, and printers for global and session types.

Two small languages live here:

* global types (``.gt`` files): choreographies built from interactions
  ``{p,q} -> r : msg`` with sequencing ``;``, unordered composition ``&``,
  alternatives ``|``, Kleene iteration ``*``, option sugar ``?``, and
  k-exit iteration ``loopk (B1,...,Bk) exit (E1,...,Ek)``;
* session types (``.mps`` files): per-role behaviours built from outputs
  ``q!a.T``, (join) inputs ``{p,q}?a.T``, internal choice ``(+)``, external
  choice ``+``, ``rec X . T`` and ``end``.

Operator tightness in the global grammar, tightest first: postfix ``*``/``?``,
then ``&``, then ``;``, then ``|``.  Binary operators associate to the left.
``A?`` is parsed as ``A | skip``.

Comments run from ``//`` to end of line in both languages.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

Role = str
Message = str


class ParseError(ValueError):
    """Malformed concrete syntax.  Carries the 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class SelfMessageError(ValueError):
    """An interaction whose receiver is also one of its senders."""


class UnguardedRecursionError(ValueError):
    """A recursion variable is reachable from its binder without crossing
    an input or output prefix."""


class DuplicateRoleError(ValueError):
    """The same role is bound twice in one session environment."""


class NotSessionTypeError(ValueError):
    """A term that is not a session type: an internal choice whose branches
    are not all outputs, an external choice whose branches are not all
    inputs, or an ambiguous pair of input branches (one partner set
    contained in the other with the same message)."""


# ---------------------------------------------------------------------------
# Global types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Interaction:
    """One message exchange: every role in `senders` sends `message`, and
    `receiver` consumes one copy from each sender.

    Invariants: `senders` is a non-empty frozenset; `receiver` is not a
    sender (raises SelfMessageError otherwise).
    """

    senders: frozenset[Role]
    receiver: Role
    message: Message

    def __post_init__(self):
        object.__setattr__(self, "senders", frozenset(self.senders))
        if not self.senders:
            raise ValueError("interaction needs at least one sender")
        if self.receiver in self.senders:
            raise SelfMessageError(
                f"role {self.receiver!r} cannot send a message to itself"
            )

    def __str__(self) -> str:
        if len(self.senders) == 1:
            left = next(iter(self.senders))
        else:
            left = "{" + ",".join(sorted(self.senders)) + "}"
        return f"{left} -> {self.receiver} : {self.message}"


@dataclass(frozen=True, slots=True)
class GSkip:
    """The empty choreography (unit of sequencing)."""


@dataclass(frozen=True, slots=True)
class GAction:
    """A single interaction."""

    interaction: Interaction


@dataclass(frozen=True, slots=True)
class GSeq:
    """`left` then `right`."""

    left: GlobalType
    right: GlobalType


@dataclass(frozen=True, slots=True)
class GBoth:
    """Both sides happen, in any interleaving."""

    left: GlobalType
    right: GlobalType


@dataclass(frozen=True, slots=True)
class GEither:
    """Exactly one side happens."""

    left: GlobalType
    right: GlobalType


@dataclass(frozen=True, slots=True)
class GStar:
    """`body` happens zero or more times."""

    body: GlobalType


@dataclass(frozen=True, slots=True)
class GKExit:
    """k-exit iteration: cycle through `bodies` in order, with the option
    before each round of phase i to leave through `exits[i]` instead.

    Invariant: len(bodies) == len(exits) >= 1.
    """

    bodies: tuple[GlobalType, ...]
    exits: tuple[GlobalType, ...]

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        object.__setattr__(self, "exits", tuple(self.exits))
        if not self.bodies or len(self.bodies) != len(self.exits):
            raise ValueError("loopk needs k >= 1 bodies and k exits")


GlobalType = Union[GSkip, GAction, GSeq, GBoth, GEither, GStar, GKExit]


def roles_of(g: GlobalType) -> frozenset[Role]:
    """All roles that take part in some interaction of `g`."""
    out: set[Role] = set()

    def walk(node: GlobalType) -> None:
        match node:
            case GSkip():
                pass
            case GAction(i):
                out.update(i.senders)
                out.add(i.receiver)
            case GSeq(l, r) | GBoth(l, r) | GEither(l, r):
                walk(l)
                walk(r)
            case GStar(b):
                walk(b)
            case GKExit(bodies, exits):
                for b in bodies:
                    walk(b)
                for e in exits:
                    walk(e)

    walk(g)
    return frozenset(out)


def interaction_count(g: GlobalType) -> int:
    """Number of interaction occurrences in `g`."""
    match g:
        case GSkip():
            return 0
        case GAction(_):
            return 1
        case GSeq(l, r) | GBoth(l, r) | GEither(l, r):
            return interaction_count(l) + interaction_count(r)
        case GStar(b):
            return interaction_count(b)
        case GKExit(bodies, exits):
            return sum(interaction_count(x) for x in bodies + exits)
    raise TypeError(f"not a global type: {g!r}")


def default_max_len(g: GlobalType) -> int:
    """Default trace-length bound for bounded checks over `g`."""
    return 2 * interaction_count(g) + 4


# ---------------------------------------------------------------------------
# Session types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TEnd:
    """Successfully terminated behaviour."""


@dataclass(frozen=True, slots=True)
class TVar:
    """A recursion variable."""

    name: str


@dataclass(frozen=True, slots=True)
class TOut:
    """Send `message` to `partner`, then continue as `cont`."""

    partner: Role
    message: Message
    cont: SessionType


@dataclass(frozen=True, slots=True)
class TIn:
    """Receive `message` from every role in `partners` (a join: one copy
    from each), then continue as `cont`."""

    partners: frozenset[Role]
    message: Message
    cont: SessionType

    def __post_init__(self):
        object.__setattr__(self, "partners", frozenset(self.partners))
        if not self.partners:
            raise ValueError("input needs at least one partner")


@dataclass(frozen=True, slots=True)
class TInternal:
    """Internal choice between output-rooted branches (this role decides)."""

    branches: tuple[SessionType, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if len(self.branches) < 2:
            raise ValueError("choice needs at least two branches")


@dataclass(frozen=True, slots=True)
class TExternal:
    """External choice between input-rooted branches (the context decides)."""

    branches: tuple[SessionType, ...]

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if len(self.branches) < 2:
            raise ValueError("choice needs at least two branches")


@dataclass(frozen=True, slots=True)
class TRec:
    """Recursive behaviour: `body` may refer back to this point as `var`."""

    var: str
    body: SessionType


@dataclass(frozen=True, slots=True)
class TMerge:
    """A merge of two behaviours whose resolution is deferred until the
    enclosing recursion is closed.  Produced only by the projector; never
    written in source and never survives normalization."""

    left: SessionType
    right: SessionType


SessionType = Union[TEnd, TVar, TOut, TIn, TInternal, TExternal, TRec, TMerge]

SessionEnv = dict  # dict[Role, SessionType]


def free_type_vars(t: SessionType) -> frozenset[str]:
    """Recursion variables of `t` not bound by an enclosing `rec`."""
    out: set[str] = set()

    def walk(node: SessionType, bound: frozenset[str]) -> None:
        match node:
            case TEnd():
                pass
            case TVar(x):
                if x not in bound:
                    out.add(x)
            case TOut(_, _, c) | TIn(_, _, c):
                walk(c, bound)
            case TInternal(bs) | TExternal(bs):
                for b in bs:
                    walk(b, bound)
            case TRec(x, b):
                walk(b, bound | {x})
            case TMerge(l, r):
                walk(l, bound)
                walk(r, bound)

    walk(t, frozenset())
    return frozenset(out)


def check_guarded(t: SessionType) -> None:
    """Raise UnguardedRecursionError if some recursion variable occurs
    without an input/output prefix between it and its binder."""

    def walk(node: SessionType, exposed: frozenset[str]) -> None:
        match node:
            case TEnd():
                pass
            case TVar(x):
                if x in exposed:
                    raise UnguardedRecursionError(
                        f"recursion variable {x!r} is not guarded by a prefix"
                    )
            case TOut(_, _, c) | TIn(_, _, c):
                walk(c, frozenset())
            case TInternal(bs) | TExternal(bs):
                for b in bs:
                    walk(b, exposed)
            case TRec(x, b):
                walk(b, exposed | {x})
            case TMerge(l, r):
                walk(l, exposed)
                walk(r, exposed)

    walk(t, frozenset())


# ---------------------------------------------------------------------------
# Tokenizer (shared by both languages)
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+|//[^\n]*)
    | (?P<op>\(\+\)|->|[;&|*?(){},:!+.])
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # an operator spelling, "ident", or "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = m.group(0)
        if m.lastgroup == "op":
            toks.append(_Token(lexeme, lexeme, line, col))
        elif m.lastgroup == "ident":
            toks.append(_Token("ident", lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(_Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self) -> _Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def eat(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(f"expected {kind!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def at_ident(self, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == "ident" and (text is None or tok.text == text)

    def fail(self, message: str) -> None:
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)


# ---------------------------------------------------------------------------
# Global-type parsing
# ---------------------------------------------------------------------------

_LOOP_RE = re.compile(r"loop([0-9]+)$")


class _GlobalParser(_Parser):
    def parse(self) -> GlobalType:
        g = self.either()
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r} after global type")
        return g

    def either(self) -> GlobalType:
        g = self.seq()
        while self.peek().kind == "|":
            self.next()
            g = GEither(g, self.seq())
        return g

    def seq(self) -> GlobalType:
        g = self.both()
        while self.peek().kind == ";":
            self.next()
            g = GSeq(g, self.both())
        return g

    def both(self) -> GlobalType:
        g = self.postfix()
        while self.peek().kind == "&":
            self.next()
            g = GBoth(g, self.postfix())
        return g

    def postfix(self) -> GlobalType:
        g = self.atom()
        while True:
            if self.peek().kind == "*":
                self.next()
                g = GStar(g)
            elif self.peek().kind == "?":
                self.next()
                g = GEither(g, GSkip())
            else:
                return g

    def atom(self) -> GlobalType:
        tok = self.peek()
        if tok.kind == "(":
            self.next()
            g = self.either()
            self.eat(")")
            return g
        if tok.kind == "{":
            senders = self.sender_set()
            return self.interaction_tail(senders, tok)
        if tok.kind == "ident":
            if tok.text == "skip":
                self.next()
                return GSkip()
            m = _LOOP_RE.match(tok.text)
            if m and self.peek(1).kind == "(":
                return self.loopk(int(m.group(1)))
            self.next()
            return self.interaction_tail(frozenset({tok.text}), tok)
        self.fail(f"expected a global type, found {tok.text or 'end of input'!r}")
        raise AssertionError  # unreachable

    def sender_set(self) -> frozenset[Role]:
        self.eat("{")
        names = [self.eat("ident").text]
        while self.peek().kind == ",":
            self.next()
            names.append(self.eat("ident").text)
        self.eat("}")
        return frozenset(names)

    def interaction_tail(self, senders: frozenset[Role], at: _Token) -> GAction:
        self.eat("->")
        receiver = self.eat("ident").text
        self.eat(":")
        message = self.eat("ident").text
        try:
            return GAction(Interaction(senders, receiver, message))
        except SelfMessageError as exc:
            raise SelfMessageError(f"{at.line}:{at.col}: {exc}") from None

    def loopk(self, k: int) -> GKExit:
        if k < 1:
            self.fail("loopk needs k >= 1")
        self.next()  # the loopN ident
        bodies = self.group(k, "loop")
        if not self.at_ident("exit"):
            self.fail("expected 'exit'")
        self.next()
        exits = self.group(k, "exit")
        return GKExit(tuple(bodies), tuple(exits))

    def group(self, k: int, what: str) -> list[GlobalType]:
        self.eat("(")
        items = [self.either()]
        while self.peek().kind == ",":
            self.next()
            items.append(self.either())
        self.eat(")")
        if len(items) != k:
            self.fail(f"{what} group has {len(items)} parts, expected {k}")
        return items


def parse_global_type(text: str) -> GlobalType:
    """Parse the body of a ``.gt`` file."""
    return _GlobalParser(text).parse()


# ---------------------------------------------------------------------------
# Session-type parsing
# ---------------------------------------------------------------------------


class _SessionParser(_Parser):
    def parse_type(self) -> SessionType:
        t = self.expr()
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r} after session type")
        return t

    def parse_env(self) -> SessionEnv:
        env: SessionEnv = {}
        while self.peek().kind != "eof":
            at = self.peek()
            role = self.eat("ident").text
            self.eat(":")
            t = self.expr()
            if role in env:
                raise DuplicateRoleError(
                    f"{at.line}:{at.col}: role {role!r} bound twice"
                )
            env[role] = t
        if not env:
            self.fail("expected at least one 'role : type' binding")
        return env

    def expr(self) -> SessionType:
        if self.at_ident("rec"):
            return self.rec()
        first = self.unit()
        op = self.peek().kind
        if op not in ("(+)", "+"):
            return first
        branches = [first]
        while self.peek().kind == op:
            self.next()
            branches.append(self.unit())
        if self.peek().kind in ("(+)", "+"):
            self.fail("cannot mix '(+)' and '+' without parentheses")
        if op == "(+)":
            return TInternal(tuple(branches))
        return TExternal(tuple(branches))

    def rec(self) -> TRec:
        self.next()  # 'rec'
        var = self.eat("ident").text
        self.eat(".")
        return TRec(var, self.expr())

    def unit(self) -> SessionType:
        tok = self.peek()
        if tok.kind == "(":
            self.next()
            t = self.expr()
            self.eat(")")
            return t
        if tok.kind == "{":
            partners = self.partner_set()
            self.eat("?")
            return self.prefix_tail(partners, is_input=True)
        if tok.kind == "ident":
            if tok.text == "end":
                self.next()
                return TEnd()
            if tok.text == "rec":
                return self.rec()
            name = self.next().text
            if self.peek().kind == "!":
                self.next()
                return self.prefix_tail(frozenset({name}), is_input=False)
            if self.peek().kind == "?":
                self.next()
                return self.prefix_tail(frozenset({name}), is_input=True)
            return TVar(name)
        self.fail(f"expected a session type, found {tok.text or 'end of input'!r}")
        raise AssertionError  # unreachable

    def partner_set(self) -> frozenset[Role]:
        self.eat("{")
        names = [self.eat("ident").text]
        while self.peek().kind == ",":
            self.next()
            names.append(self.eat("ident").text)
        self.eat("}")
        return frozenset(names)

    def prefix_tail(self, partners: frozenset[Role], is_input: bool) -> SessionType:
        message = self.eat("ident").text
        self.eat(".")
        cont = self.rec() if self.at_ident("rec") else self.unit()
        if is_input:
            return TIn(partners, message, cont)
        if len(partners) != 1:
            self.fail("an output has exactly one partner")
        return TOut(next(iter(partners)), message, cont)


def parse_session_type(text: str) -> SessionType:
    """Parse a single session type (no role binding)."""
    t = _SessionParser(text).parse_type()
    _validate(t)
    return t


def parse_session_env(text: str) -> SessionEnv:
    """Parse the body of a ``.mps`` file: one or more `role : type` bindings.

    Every parsed type is validated: closed, guarded, and normalizable."""
    env = _SessionParser(text).parse_env()
    for role, t in env.items():
        try:
            _validate(t)
        except ValueError as exc:
            raise type(exc)(f"in binding for role {role!r}: {exc}") from None
    return env


def _validate(t: SessionType) -> None:
    free = free_type_vars(t)
    if free:
        raise ParseError(
            f"unbound recursion variable {sorted(free)[0]!r}", 1, 1
        )
    check_guarded(t)
    from . import machine

    machine.normalize_session_type(t)  # raises NotSessionTypeError on bad choices


# ---------------------------------------------------------------------------
# Printers
# ---------------------------------------------------------------------------

_G_PREC = {GEither: 0, GSeq: 1, GBoth: 2, GStar: 3}
_G_OP = {GEither: "|", GSeq: ";", GBoth: "&"}


def print_global_type(g: GlobalType) -> str:
    """Render `g` so that parse_global_type(print_global_type(g)) == g."""

    def prec(node: GlobalType) -> int:
        return _G_PREC.get(type(node), 4)

    def render(node: GlobalType, level: int, right: bool = False) -> str:
        p = prec(node)
        match node:
            case GSkip():
                s = "skip"
            case GAction(i):
                s = str(i)
            case GSeq(l, r) | GBoth(l, r) | GEither(l, r):
                op = _G_OP[type(node)]
                s = f"{render(l, p)} {op} {render(r, p, right=True)}"
            case GStar(b):
                s = f"{render(b, p)}*"
            case GKExit(bodies, exits):
                bs = ", ".join(render(b, 0) for b in bodies)
                es = ", ".join(render(e, 0) for e in exits)
                s = f"loop{len(bodies)} ({bs}) exit ({es})"
            case _:
                raise TypeError(f"not a global type: {node!r}")
        if p < level or (p == level and right):
            return f"({s})"
        return s

    return render(g, 0)


def print_session_type(t: SessionType) -> str:
    """Render `t`; inverse of parse_session_type up to structural equality."""

    def unit(node: SessionType) -> str:
        if isinstance(node, (TInternal, TExternal, TRec, TMerge)):
            return f"({render(node)})"
        return render(node)

    def render(node: SessionType) -> str:
        match node:
            case TEnd():
                return "end"
            case TVar(x):
                return x
            case TOut(q, a, c):
                return f"{q}!{a}.{unit(c)}"
            case TIn(ps, a, c):
                if len(ps) == 1:
                    left = next(iter(ps))
                else:
                    left = "{" + ",".join(sorted(ps)) + "}"
                return f"{left}?{a}.{unit(c)}"
            case TInternal(bs):
                return " (+) ".join(unit(b) for b in bs)
            case TExternal(bs):
                return " + ".join(unit(b) for b in bs)
            case TRec(x, b):
                return f"rec {x} . {render(b)}"
            case TMerge(l, r):
                return f"merge({render(l)}, {render(r)})"
        raise TypeError(f"not a session type: {node!r}")

    return render(t)


def print_session_env(env: SessionEnv) -> str:
    """Render an environment in ``.mps`` form, one binding per line, roles
    sorted."""
    return "\n".join(
        f"{role} : {print_session_type(env[role])}" for role in sorted(env)
    )
