"""Projection of global types onto per-role session types.

Projection is syntax-directed and runs right-to-left: every rule takes the
environment of continuations describing what each role does *after* the
current subterm, and returns the environment describing what each role does
from the current subterm onward.

Alternatives need one role whose two branch behaviours are both
output-rooted and different — that role's branches are combined into an
internal choice, everyone else's are merged.  Iterations (`*` and `loopk`)
introduce one recursion unknown per decision point and per spectating role;
since a spectator's merge may involve the still-open recursion unknowns,
such merges are deferred (kept as symbolic merge nodes) and resolved by the
state-machine normalizer once the enclosing recursions are closed.

Unordered composition has no projection rule of its own: `project_top`
rewrites `&` away (serializations first, then distributing rewrites
breadth-first, then raw interleavings of action sequences) and projects the
first rewrite that succeeds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import machine
from .syntax import (
    GAction,
    GBoth,
    GEither,
    GKExit,
    GlobalType,
    GSeq,
    GSkip,
    GStar,
    Role,
    SessionEnv,
    SessionType,
    TEnd,
    TExternal,
    TIn,
    TInternal,
    TMerge,
    TOut,
    TRec,
    TVar,
    default_max_len,
    free_type_vars,
    print_global_type,
    roles_of,
)
from .tracelang import (
    BudgetExceededError,
    compile_traces,
    enumerate_traces,
    includes,
    kexit_unfolding,
)

NO_DECISION_MAKER = "NoDecisionMaker"
INCOMPATIBLE_MERGE = "IncompatibleMerge"
OUTPUT_MISMATCH = "OutputMismatch"
UNBOUND_CONTINUATION = "UnboundContinuation"
AND_ELIMINATION_EXHAUSTED = "AndEliminationExhausted"

DEFAULT_AND_BUDGET = 256

_KEXIT_ASSIGNMENT_CAP = 16


class ProjectionError(Exception):
    """A global type (or subterm) that cannot be projected.

    `kind` is one of NoDecisionMaker, IncompatibleMerge, OutputMismatch,
    UnboundContinuation, AndEliminationExhausted; `location` is the subterm
    at fault when known."""

    def __init__(self, kind: str, detail: str, location: GlobalType | None = None):
        self.kind = kind
        self.detail = detail
        self.location = location
        where = f" in: {print_global_type(location)}" if location is not None else ""
        super().__init__(f"{kind}: {detail}{where}")


class _Ctx:
    """Per-projection counter for recursion unknowns.  The '$' prefix keeps
    generated names disjoint from anything the source syntax can produce."""

    def __init__(self) -> None:
        self.counter = 0

    def fresh(self) -> str:
        name = f"${self.counter}"
        self.counter += 1
        return name


def _is_closed(t: SessionType) -> bool:
    return not free_type_vars(t)


def merge(t: SessionType, s: SessionType) -> SessionType:
    """The least behaviour that follows both `t` and `s` (both closed):
    pointwise on outputs, branch-wise on inputs with exclusive branches
    kept when they cannot be confused.  Raises ProjectionError
    (IncompatibleMerge) when no such behaviour exists."""
    try:
        return machine.normalize_session_type(TMerge(t, s))
    except ValueError as exc:
        raise ProjectionError(INCOMPATIBLE_MERGE, str(exc)) from None


def merge_env(e1: SessionEnv, e2: SessionEnv) -> SessionEnv:
    """Pointwise merge; roles bound on one side only keep their type."""
    out: SessionEnv = {}
    for role in sorted(set(e1) | set(e2)):
        if role in e1 and role in e2:
            out[role] = merge(e1[role], e2[role])
        else:
            out[role] = e1.get(role, e2.get(role))
    return out


def compatible_input(partners, message: str, t: SessionType) -> bool:
    """Whether an input of `message` from `partners` may be offered in an
    external choice alongside `t` (see machine.compatible_input)."""
    return machine.compatible_input(partners, message, t)


def _merge_terms(
    t: SessionType,
    s: SessionType,
    role: Role,
    loc: GlobalType | None,
) -> SessionType:
    """Merge two (possibly open) behaviour terms, eagerly when both are
    closed, deferring to a symbolic merge node otherwise."""
    if t == s:
        return t
    kt = machine.root_kind(t)
    ks = machine.root_kind(s)
    if kt is not None and ks is not None and kt != ks:
        raise ProjectionError(
            INCOMPATIBLE_MERGE,
            f"role {role!r} would have to follow both a {kt!r}-rooted and "
            f"a {ks!r}-rooted behaviour",
            loc,
        )
    if _is_closed(t) and _is_closed(s):
        try:
            return machine.normalize_session_type(TMerge(t, s))
        except ValueError as exc:
            raise ProjectionError(
                INCOMPATIBLE_MERGE, f"role {role!r}: {exc}", loc
            ) from None
    return TMerge(t, s)


# ---------------------------------------------------------------------------
# The projection rules
# ---------------------------------------------------------------------------


def _project(g: GlobalType, env: SessionEnv, ctx: _Ctx) -> SessionEnv:
    match g:
        case GSkip():
            return env
        case GAction(i):
            out = dict(env)
            for s in i.senders:
                out[s] = TOut(i.receiver, i.message, env[s])
            out[i.receiver] = TIn(i.senders, i.message, env[i.receiver])
            return out
        case GSeq(l, r):
            return _project(l, _project(r, env, ctx), ctx)
        case GEither(l, r):
            return _alternative(g, _project(l, env, ctx), _project(r, env, ctx))
        case GStar(b):
            return _kexit(g, (b,), (GSkip(),), env, ctx)
        case GKExit(bodies, exits):
            return _kexit(g, bodies, exits, env, ctx)
        case GBoth(_, _):
            raise ProjectionError(
                AND_ELIMINATION_EXHAUSTED,
                "unordered composition has no direct projection rule",
                g,
            )
    raise TypeError(f"not a global type: {g!r}")


def _alternative(g: GlobalType, e1: SessionEnv, e2: SessionEnv) -> SessionEnv:
    roles = sorted(e1)
    diff = [r for r in roles if e1[r] != e2[r]]
    if not diff:
        return e1
    deciders = [
        r
        for r in diff
        if machine.root_kind(e1[r]) == "out" and machine.root_kind(e2[r]) == "out"
    ]
    if len(deciders) > 1:
        raise ProjectionError(
            NO_DECISION_MAKER,
            f"roles {', '.join(map(repr, deciders))} could all signal which "
            "branch was taken; the choice must rest with exactly one role",
            g,
        )
    if not deciders:
        if len(diff) == 1:
            r = diff[0]
            raise ProjectionError(
                OUTPUT_MISMATCH,
                f"role {r!r} behaves differently in the two branches but "
                "does not start with outputs in both, so it cannot signal "
                "the choice",
                g,
            )
        raise ProjectionError(
            NO_DECISION_MAKER,
            f"no role starts with outputs in both branches; differing roles: "
            f"{', '.join(map(repr, diff))}",
            g,
        )
    d = deciders[0]
    out: SessionEnv = {}
    for r in roles:
        if r == d:
            out[r] = TInternal((e1[r], e2[r]))
        else:
            out[r] = _merge_terms(e1[r], e2[r], r, g)
    return out


def _kexit(
    g: GlobalType,
    bodies: tuple[GlobalType, ...],
    exits: tuple[GlobalType, ...],
    env: SessionEnv,
    ctx: _Ctx,
) -> SessionEnv:
    k = len(bodies)
    parts: set[Role] = set()
    for x in bodies + exits:
        parts |= roles_of(x)
    if not parts:
        # no interactions at all: the loop can only be exited immediately
        return _project(exits[0], env, ctx)
    exit_envs = [_project(exits[i], env, ctx) for i in range(k)]

    candidates: list[list[Role]] = []
    for i in range(k):
        diffs = [r for r in sorted(parts) if exit_envs[i][r] != env[r]]
        if diffs:
            outs = [r for r in diffs if machine.root_kind(exit_envs[i][r]) == "out"]
            if not outs:
                raise ProjectionError(
                    NO_DECISION_MAKER,
                    f"no role can signal the exit of phase {i + 1}: roles "
                    f"{', '.join(map(repr, diffs))} act in the exit but none "
                    "starts with an output",
                    g,
                )
            candidates.append(outs)
        else:
            # the exit does not discriminate (e.g. skip): look at who opens
            # the body with outputs
            trial_env = {
                r: TVar(ctx.fresh()) if r in parts else env[r] for r in env
            }
            try:
                trial = _project(bodies[i], trial_env, ctx)
                outs = [
                    r
                    for r in sorted(parts)
                    if machine.root_kind(trial[r]) == "out"
                ]
            except ProjectionError:
                outs = []
            candidates.append(outs if outs else sorted(parts))

    last_error: ProjectionError | None = None
    for assignment in itertools.islice(
        itertools.product(*candidates), _KEXIT_ASSIGNMENT_CAP
    ):
        try:
            return _kexit_build(g, bodies, exits, exit_envs, assignment, env, ctx)
        except ProjectionError as exc:
            last_error = exc
    if last_error is None:
        raise ProjectionError(
            NO_DECISION_MAKER, "no role can decide whether to iterate", g
        )
    raise last_error


def _kexit_build(
    g: GlobalType,
    bodies: tuple[GlobalType, ...],
    exits: tuple[GlobalType, ...],
    exit_envs: list[SessionEnv],
    deciders: tuple[Role, ...],
    env: SessionEnv,
    ctx: _Ctx,
) -> SessionEnv:
    k = len(bodies)
    parts = sorted(set().union(*(roles_of(x) for x in bodies + exits)))
    dvar = [ctx.fresh() for _ in range(k)]
    rvar = {r: ctx.fresh() for r in parts}

    def phase_env(i: int) -> SessionEnv:
        out = dict(env)
        for r in parts:
            out[r] = TVar(rvar[r])
        out[deciders[i]] = TVar(dvar[i])
        return out

    body_envs = [
        _project(bodies[i], phase_env((i + 1) % k), ctx) for i in range(k)
    ]

    defs: dict[str, SessionType] = {}
    for i in range(k):
        p = deciders[i]
        go_on, leave = body_envs[i][p], exit_envs[i][p]
        defs[dvar[i]] = go_on if go_on == leave else TInternal((go_on, leave))
    for r in parts:
        pieces = []
        for i in range(k):
            if deciders[i] != r:
                pieces.extend((exit_envs[i][r], body_envs[i][r]))
        pieces = [t for t in pieces if t != TVar(rvar[r])]
        if not pieces:
            defs[rvar[r]] = TEnd()  # r decides every phase; never referenced
            continue
        combined = pieces[0]
        for t in pieces[1:]:
            combined = _merge_terms(combined, t, r, g)
        defs[rvar[r]] = combined

    def close(name: str, stack: frozenset[str]) -> SessionType:
        body = _subst(defs[name], stack | {name})
        if name in free_type_vars(body):
            return TRec(name, body)
        return body

    def _subst(t: SessionType, stack: frozenset[str]) -> SessionType:
        match t:
            case TVar(x) if x in defs:
                return t if x in stack else close(x, stack)
            case TEnd() | TVar(_):
                return t
            case TOut(q, a, c):
                return TOut(q, a, _subst(c, stack))
            case TIn(ps, a, c):
                return TIn(ps, a, _subst(c, stack))
            case TInternal(bs):
                return TInternal(tuple(_subst(b, stack) for b in bs))
            case TExternal(bs):
                return TExternal(tuple(_subst(b, stack) for b in bs))
            case TRec(x, b):
                return TRec(x, _subst(b, stack))
            case TMerge(l, r):
                return TMerge(_subst(l, stack), _subst(r, stack))
        raise TypeError(f"not a session type: {t!r}")

    result = dict(env)
    for r in parts:
        result[r] = close(rvar[r], frozenset())
    result[deciders[0]] = close(dvar[0], frozenset())

    for r in parts:
        if _is_closed(result[r]):
            try:
                result[r] = machine.normalize_session_type(result[r])
            except ValueError as exc:
                raise ProjectionError(
                    INCOMPATIBLE_MERGE, f"role {r!r}: {exc}", g
                ) from None
    return result


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def project_alg(g: GlobalType, cont: SessionEnv) -> SessionEnv:
    """Project `g` against the continuation environment `cont` (which must
    bind every role of `g` to a closed session type).  Returns one session
    type per role of `cont`, each fully resolved and normalized."""
    missing = sorted(roles_of(g) - set(cont))
    if missing:
        raise ProjectionError(
            UNBOUND_CONTINUATION,
            f"no continuation for roles {', '.join(map(repr, missing))}",
            g,
        )
    env = _project(g, dict(cont), _Ctx())
    out: SessionEnv = {}
    for role in sorted(env):
        t = env[role]
        assert _is_closed(t), f"projection left {role!r} open"
        try:
            out[role] = machine.normalize_session_type(t)
        except ValueError as exc:
            raise ProjectionError(
                INCOMPATIBLE_MERGE, f"role {role!r}: {exc}", g
            ) from None
    return out


def project_k_exit(
    bodies: tuple[GlobalType, ...],
    exits: tuple[GlobalType, ...],
    cont: SessionEnv,
) -> SessionEnv:
    """Project a k-exit iteration given directly by its phases."""
    return project_alg(GKExit(tuple(bodies), tuple(exits)), cont)


def project_top(g: GlobalType, budget: int = DEFAULT_AND_BUDGET) -> SessionEnv:
    """Project `g` with every role ending afterwards.  When `g` contains
    unordered composition, or plain projection fails, rewrite candidates
    from eliminate_and are tried in order and the first success wins."""
    cont = {r: TEnd() for r in sorted(roles_of(g))}
    try:
        return project_alg(g, cont)
    except ProjectionError as exc:
        direct_error = exc
    tried = 0
    for cand in eliminate_and(g, budget):
        if cand == g:
            continue
        tried += 1
        try:
            return project_alg(cand, cont)
        except ProjectionError:
            continue
    if _contains_both(g):
        raise ProjectionError(
            AND_ELIMINATION_EXHAUSTED,
            f"no sequential rewrite projects ({tried} candidates tried); "
            f"plain projection says: {direct_error}",
            g,
        )
    raise direct_error


def _contains_both(g: GlobalType) -> bool:
    match g:
        case GBoth(_, _):
            return True
        case GSeq(l, r) | GEither(l, r):
            return _contains_both(l) or _contains_both(r)
        case GStar(b):
            return _contains_both(b)
        case GKExit(bodies, exits):
            return any(_contains_both(x) for x in bodies + exits)
        case _:
            return False


# ---------------------------------------------------------------------------
# Rewriting unordered composition away
# ---------------------------------------------------------------------------


def eliminate_and(g: GlobalType, budget: int = DEFAULT_AND_BUDGET) -> list[GlobalType]:
    """An ordered list of `&`-free rewrites of `g`, each denoting a sublanguage
    of (or the same language as) `g`'s traces: the two whole-type
    serializations first, then breadth-first closure under the distributing
    rewrites, then (for `&` of plain action sequences) every interleaving.
    Deduplicated by trace-language equality.  At most `budget` types are
    explored."""
    ordered: list[GlobalType] = []
    seen: set[GlobalType] = set()

    def emit(t: GlobalType) -> None:
        if t not in seen and _and_free(t):
            seen.add(t)
            ordered.append(t)

    emit(_serialize_all(g, left_first=True))
    emit(_serialize_all(g, left_first=False))

    frontier = [g]
    visited: set[GlobalType] = {g}
    while frontier and len(visited) < budget:
        nxt: list[GlobalType] = []
        for t in frontier:
            emit(t)
            for t2 in _rewrites(t):
                if t2 not in visited:
                    visited.add(t2)
                    nxt.append(t2)
                    if len(visited) >= budget:
                        break
            if len(visited) >= budget:
                break
        frontier = nxt
    for t in frontier:
        emit(t)

    for t in _action_shuffles(g):
        if len(seen) >= budget:
            break
        emit(t)

    return _dedup_by_language(ordered)


def _and_free(g: GlobalType) -> bool:
    return not _contains_both(g)


def _serialize_all(g: GlobalType, left_first: bool) -> GlobalType:
    def go(t: GlobalType) -> GlobalType:
        match t:
            case GSkip() | GAction(_):
                return t
            case GSeq(l, r):
                return GSeq(go(l), go(r))
            case GEither(l, r):
                return GEither(go(l), go(r))
            case GBoth(l, r):
                a, b = go(l), go(r)
                return GSeq(a, b) if left_first else GSeq(b, a)
            case GStar(b):
                return GStar(go(b))
            case GKExit(bodies, exits):
                return GKExit(
                    tuple(go(x) for x in bodies), tuple(go(x) for x in exits)
                )
        raise TypeError(f"not a global type: {t!r}")

    return go(g)


def _rewrites(g: GlobalType) -> list[GlobalType]:
    """All single-step rewrites of `g`: at the root, the serializations and
    distributions of `&` plus factoring of a common alternative prefix; in
    context, the rewrites of every immediate subterm."""
    out: list[GlobalType] = []
    match g:
        case GBoth(l, r):
            out.append(GSeq(l, r))
            out.append(GSeq(r, l))
            for a, b, flip in ((l, r, False), (r, l, True)):
                def both(x: GlobalType, y: GlobalType) -> GlobalType:
                    return GBoth(y, x) if flip else GBoth(x, y)

                match a:
                    case GSkip():
                        out.append(b)
                    case GEither(x, y):
                        out.append(GEither(both(x, b), both(y, b)))
                    case GSeq(x, y):
                        out.append(GSeq(both(x, b), y))
                        out.append(GSeq(x, both(y, b)))
                    case GStar(x):
                        out.append(GEither(GSeq(both(x, b), GStar(x)), b))
                        out.append(GEither(GSeq(GStar(x), both(x, b)), b))
                    case GKExit(bodies, exits):
                        out.append(both(kexit_unfolding(bodies, exits), b))
        case GEither(l, r) if l == r:
            out.append(l)
        case GEither(GSeq(a, b), GSeq(a2, c)) if a == a2:
            out.append(GSeq(a, GEither(b, c)))
    match g:
        case GSeq(l, r):
            out.extend(GSeq(l2, r) for l2 in _rewrites(l))
            out.extend(GSeq(l, r2) for r2 in _rewrites(r))
        case GEither(l, r):
            out.extend(GEither(l2, r) for l2 in _rewrites(l))
            out.extend(GEither(l, r2) for r2 in _rewrites(r))
        case GBoth(l, r):
            out.extend(GBoth(l2, r) for l2 in _rewrites(l))
            out.extend(GBoth(l, r2) for r2 in _rewrites(r))
        case GStar(b):
            out.extend(GStar(b2) for b2 in _rewrites(b))
        case GKExit(bodies, exits):
            for i, x in enumerate(bodies):
                for x2 in _rewrites(x):
                    out.append(
                        GKExit(bodies[:i] + (x2,) + bodies[i + 1 :], exits)
                    )
            for i, x in enumerate(exits):
                for x2 in _rewrites(x):
                    out.append(
                        GKExit(bodies, exits[:i] + (x2,) + exits[i + 1 :])
                    )
    return out


def _action_sequence(g: GlobalType) -> list[GAction] | None:
    match g:
        case GAction(_):
            return [g]
        case GSeq(l, r):
            a = _action_sequence(l)
            b = _action_sequence(r)
            return a + b if a is not None and b is not None else None
        case _:
            return None


def _action_shuffles(g: GlobalType) -> list[GlobalType]:
    if not isinstance(g, GBoth):
        return []
    left = _action_sequence(g.left)
    right = _action_sequence(g.right)
    if left is None or right is None:
        return []
    out = []

    def weave(u: list[GAction], v: list[GAction], acc: list[GAction]) -> None:
        if not u and not v:
            t: GlobalType = acc[0]
            for x in acc[1:]:
                t = GSeq(t, x)
            out.append(t)
            return
        if u:
            weave(u[1:], v, acc + [u[0]])
        if v:
            weave(u, v[1:], acc + [v[0]])

    weave(left, right, [])
    return out


def _dedup_by_language(candidates: list[GlobalType]) -> list[GlobalType]:
    """Keep the first representative of every trace language, confirmed by
    two-way inclusion within equal bounded fingerprints."""
    kept: list[tuple[GlobalType, object, object]] = []  # (type, fingerprint, nfa)
    out: list[GlobalType] = []
    for cand in candidates:
        bound = min(default_max_len(cand), 6)
        try:
            fp = frozenset(enumerate_traces(cand, bound, cap=5000))
        except BudgetExceededError:
            fp = None
        nfa = compile_traces(cand)
        duplicate = False
        for _, fp2, nfa2 in kept:
            if fp is not None and fp2 is not None and fp != fp2:
                continue
            if includes(nfa, nfa2) is None and includes(nfa2, nfa) is None:
                duplicate = True
                break
        if not duplicate:
            kept.append((cand, fp, nfa))
            out.append(cand)
    return out
