"""Conformance checking and diagnosis of global types.

A session environment implements a global type when it is sound (every
session trace is a trace of the global type) and complete (every trace
of the global type is a permutation of some session trace).  Both checks
are bounded: they compare trace sets up to a length bound, so a passing
report certifies conformance for all behaviours within the bound.

`classify` diagnoses why a global type resists projection, reproducing
the standard failure taxonomy: sequentiality violations (an implicit
ordering between interactions that no participant can enforce), choices
whose outcome some participant cannot learn but could implement by
over-approximation, and choices that admit no covering implementation at
all.  The diagnosis is a bounded search over candidate implementations,
so inconclusive outcomes are reported as Unclassified rather than
guessed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import machine as _machine
from .projector import ProjectionError, project_top
from .runtime import (
    DEFAULT_BUF_BOUND,
    DEFAULT_DEPTH_BOUND,
    NotLive,
    is_live,
    session_traces,
)
from .syntax import (
    GAction,
    GBoth,
    GEither,
    GKExit,
    GSeq,
    GSkip,
    GStar,
    GlobalType,
    Interaction,
    NotSessionTypeError,
    SessionEnv,
    SessionType,
    TEnd,
    TExternal,
    TIn,
    TInternal,
    TOut,
    default_max_len,
)
from .tracelang import (
    BudgetExceededError,
    Word,
    compile_traces,
    enumerate_traces,
    parikh_vector,
    well_formed,
)

PROJECTABLE = "Projectable"
NO_SEQUENTIALITY = "NoSequentiality"
NO_KNOWLEDGE_FOR_CHOICE = "NoKnowledgeForChoice"
NO_KNOWLEDGE_NO_CHOICE = "NoKnowledgeNoChoice"
UNCLASSIFIED = "Unclassified"

FLAW_CATEGORIES = (
    PROJECTABLE,
    NO_SEQUENTIALITY,
    NO_KNOWLEDGE_FOR_CHOICE,
    NO_KNOWLEDGE_NO_CHOICE,
    UNCLASSIFIED,
)

DEFAULT_CANDIDATE_CAP = 64


@dataclass(frozen=True, slots=True)
class ConformanceReport:
    """Outcome of a bounded soundness/completeness check.  The report is
    truthy iff both checks passed within the recorded bounds."""

    sound: bool
    sound_counterexample: Word | None
    complete: bool
    completeness_gap: Word | None
    max_len: int
    buf_bound: int
    basis: str = "bounded"

    def __bool__(self) -> bool:
        return self.sound and self.complete


@dataclass(frozen=True, slots=True)
class Classification:
    category: str
    detail: str


def check_sound(
    g: GlobalType,
    env: SessionEnv,
    max_len: int | None = None,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
) -> tuple[bool, Word | None]:
    """Is every session trace (up to max_len) a trace of `g`?  Returns the
    shortest violating trace otherwise."""
    if max_len is None:
        max_len = default_max_len(g)
    auto = compile_traces(g)
    bad = [
        w
        for w in session_traces(env, max_len, buf_bound, depth_bound)
        if not auto.member(w)
    ]
    if not bad:
        return True, None
    return False, min(bad, key=lambda w: (len(w), tuple(map(str, w))))


def check_complete(
    g: GlobalType,
    env: SessionEnv,
    max_len: int | None = None,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
) -> tuple[bool, Word | None]:
    """Is every trace of `g` (up to max_len) a permutation of some session
    trace?  Permutation equivalence is Parikh-vector equality.  Returns
    the shortest uncovered trace otherwise."""
    if max_len is None:
        max_len = default_max_len(g)
    covered = {
        parikh_vector(w) for w in session_traces(env, max_len, buf_bound, depth_bound)
    }
    missing = [
        w
        for w in enumerate_traces(compile_traces(g), max_len)
        if parikh_vector(w) not in covered
    ]
    if not missing:
        return True, None
    return False, min(missing, key=lambda w: (len(w), tuple(map(str, w))))


def check_preorder(
    g: GlobalType,
    env: SessionEnv,
    max_len: int | None = None,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
) -> ConformanceReport:
    """Bounded check that `env` implements `g`: sound and complete."""
    if max_len is None:
        max_len = default_max_len(g)
    sound, cex = check_sound(g, env, max_len, buf_bound, depth_bound)
    complete, gap = check_complete(g, env, max_len, buf_bound, depth_bound)
    return ConformanceReport(sound, cex, complete, gap, max_len, buf_bound)


# --- candidate implementations for diagnosis --------------------------------


def _out_branches(t: SessionType) -> dict | None:
    """Root output branches as {(partner, message): continuation}, or None
    when `t` is not output-rooted."""
    match t:
        case TOut(partner, msg, cont):
            return {(partner, msg): cont}
        case TInternal(branches):
            out: dict = {}
            for b in branches:
                sub = _out_branches(b)
                if sub is None:
                    return None
                for k, c in sub.items():
                    if k in out and out[k] != c:
                        return None
                    out[k] = c
            return out
        case _:
            return None


def _in_branches(t: SessionType) -> dict | None:
    match t:
        case TIn(partners, msg, cont):
            return {(partners, msg): cont}
        case TExternal(branches):
            out: dict = {}
            for b in branches:
                sub = _in_branches(b)
                if sub is None:
                    return None
                for k, c in sub.items():
                    if k in out and out[k] != c:
                        return None
                    out[k] = c
            return out
        case _:
            return None


def _build_out(branches: dict) -> SessionType:
    terms = [TOut(p, a, c) for (p, a), c in sorted(branches.items())]
    return terms[0] if len(terms) == 1 else TInternal(tuple(terms))


def _build_in(branches: dict) -> SessionType:
    terms = [
        TIn(ps, a, c)
        for (ps, a), c in sorted(branches.items(), key=lambda kv: (sorted(kv[0][0]), kv[0][1]))
    ]
    return terms[0] if len(terms) == 1 else TExternal(tuple(terms))


def forced_join(t: SessionType, s: SessionType) -> SessionType | None:
    """Combine two alternative behaviours of one role into a single type
    covering both, without the compatibility requirements of `merge`.

    Inputs union their branches.  Outputs with a common branch join its
    continuations; an output branch found on one side only first tries to
    continue with the join of its own continuation and the other side's
    continuations (so the choice is announced and both sides converge),
    falling back to its own continuation.  The result over-approximates:
    it can take either alternative's choices but may mix them, so it is a
    candidate implementation to be validated, not a projection."""
    if t == s:
        return t
    t_out, s_out = _out_branches(t), _out_branches(s)
    if t_out is not None and s_out is not None:
        joined: dict = {}
        for k in t_out.keys() | s_out.keys():
            if k in t_out and k in s_out:
                c = forced_join(t_out[k], s_out[k])
                if c is None:
                    return None
            elif k in t_out:
                c = _converge(t_out[k], list(s_out.values()))
            else:
                c = _converge(s_out[k], list(t_out.values()))
            joined[k] = c
        return _build_out(joined)
    t_in, s_in = _in_branches(t), _in_branches(s)
    if t_in is not None and s_in is not None:
        joined = {}
        for k in t_in.keys() | s_in.keys():
            if k in t_in and k in s_in:
                c = forced_join(t_in[k], s_in[k])
                if c is None:
                    return None
                joined[k] = c
            else:
                joined[k] = t_in.get(k, s_in.get(k))
        return _build_in(joined)
    return None


def _converge(cont: SessionType, others: list[SessionType]) -> SessionType:
    """Continuation for an output branch present on one side only: join it
    with every continuation of the other side when possible, else keep it
    as is."""
    acc = cont
    for other in others:
        joined = forced_join(acc, other)
        if joined is None:
            return cont
        acc = joined
    return acc


def _either_branches(g: GlobalType) -> list[GlobalType]:
    match g:
        case GEither(l, r):
            return _either_branches(l) + _either_branches(r)
        case _:
            return [g]


def forced_join_env(envs: list[SessionEnv]) -> SessionEnv | None:
    """Role-wise forced join of alternative environments; roles absent
    from an alternative are taken to be ended there."""
    roles = sorted(set().union(*envs))
    out: dict = {}
    for r in roles:
        acc: SessionType = envs[0].get(r, TEnd())
        for e in envs[1:]:
            joined = forced_join(acc, e.get(r, TEnd()))
            if joined is None:
                return None
            acc = joined
        out[r] = acc
    try:
        return {r: _machine.normalize_session_type(t) for r, t in out.items()}
    except (_machine.MergeError, NotSessionTypeError):
        return None


def _candidate_envs(g: GlobalType, cap: int) -> list[SessionEnv]:
    """Candidate implementations of an alternative whose projection
    failed: each branch's own projection, plus their forced join."""
    branches = _either_branches(g)
    if len(branches) < 2:
        return []
    projections: list[SessionEnv] = []
    for b in branches:
        try:
            projections.append(project_top(b))
        except ProjectionError:
            return []
    out: list[SessionEnv] = []
    joined = forced_join_env(projections)
    if joined is not None:
        out.append(joined)
    out.extend(projections)
    seen: set = set()
    unique = []
    for env in out:
        key = tuple(sorted((r, _machine.normalize_session_type(t)) for r, t in env.items()))
        if key not in seen:
            seen.add(key)
            unique.append(env)
    return unique[:cap]


def _relaxations(g: GlobalType) -> list[GlobalType]:
    """Variants of `g` with sequential compositions relaxed to unordered
    ones: all at once, then one at a time."""

    def rebuild(t: GlobalType, flips: set[int], counter: list[int]) -> GlobalType:
        match t:
            case GSkip() | GAction(_):
                return t
            case GSeq(l, r):
                i = counter[0]
                counter[0] += 1
                left = rebuild(l, flips, counter)
                right = rebuild(r, flips, counter)
                return GBoth(left, right) if i in flips else GSeq(left, right)
            case GBoth(l, r):
                return GBoth(rebuild(l, flips, counter), rebuild(r, flips, counter))
            case GEither(l, r):
                return GEither(rebuild(l, flips, counter), rebuild(r, flips, counter))
            case GStar(b):
                return GStar(rebuild(b, flips, counter))
            case GKExit(bodies, exits):
                return GKExit(
                    tuple(rebuild(b, flips, counter) for b in bodies),
                    tuple(rebuild(e, flips, counter) for e in exits),
                )
        raise AssertionError(f"unhandled global type {t!r}")

    count = [0]
    rebuild(g, set(), count)
    total = count[0]
    if total == 0 or total > 16:
        return []
    variants = [rebuild(g, set(range(total)), [0])]
    for i in range(total):
        variants.append(rebuild(g, {i}, [0]))
    return [v for v in variants if v != g]


def classify(
    g: GlobalType,
    max_len: int | None = None,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
    candidate_cap: int = DEFAULT_CANDIDATE_CAP,
) -> Classification:
    """Diagnose a global type.

    Projectable: well formed and algorithmically projectable.
    NoSequentiality: not well formed, but relaxing sequential composition
      to unordered composition yields a projectable well-formed variant —
      the specified ordering is the only obstacle.
    NoKnowledgeForChoice: some candidate implementation covers all traces
      of `g` but also exhibits extra ones — participants can implement the
      choice only by over-approximating it.
    NoKnowledgeNoChoice: no candidate covers the traces of `g` at all.
    Unclassified: the bounded search was inconclusive (including the case
      of a sound and complete candidate: then `g` is implementable and only
      the projection algorithm falls short).
    """
    if max_len is None:
        max_len = default_max_len(g)
    wf = well_formed(g)
    env = None
    try:
        env = project_top(g)
    except ProjectionError:
        pass
    if wf and env is not None:
        return Classification(PROJECTABLE, "well formed and projectable")
    if not wf:
        for variant in _relaxations(g):
            if not well_formed(variant):
                continue
            try:
                project_top(variant)
            except ProjectionError:
                continue
            return Classification(
                NO_SEQUENTIALITY,
                "the specified ordering of independent interactions cannot be"
                " enforced; the unordered variant is implementable",
            )
        return Classification(
            UNCLASSIFIED,
            "not well formed, and no sequentiality relaxation is implementable",
        )
    candidates = _candidate_envs(g, candidate_cap)
    if not candidates:
        return Classification(
            UNCLASSIFIED, "projection failed and no candidate implementations arise"
        )
    found_complete = False
    for cand in candidates:
        try:
            complete, _ = check_complete(g, cand, max_len, buf_bound, depth_bound)
            if not complete:
                continue
            found_complete = True
            sound, _ = check_sound(g, cand, max_len, buf_bound, depth_bound)
        except BudgetExceededError:
            continue
        if sound:
            return Classification(
                UNCLASSIFIED,
                "a sound and complete implementation exists; only the"
                " projection algorithm falls short",
            )
    if found_complete:
        return Classification(
            NO_KNOWLEDGE_FOR_CHOICE,
            "participants cannot learn the outcome of a choice; covering"
            " implementations exhibit behaviours outside the specification",
        )
    return Classification(
        NO_KNOWLEDGE_NO_CHOICE,
        "no candidate implementation covers the specified behaviours",
    )


# --- random generation and theorem cross-checking ---------------------------

_ROLE_POOL = ("p", "q", "r", "s", "t", "u", "v", "w")
_MESSAGE_POOL = "abcde"


def random_global_type(
    seed: int,
    max_size: int = 8,
    role_count: int = 4,
    star_depth: int = 1,
) -> GlobalType:
    """A deterministic pseudo-random global type with at most `max_size`
    interactions over at most `role_count` roles, star nesting bounded by
    `star_depth`, and no self-messages."""
    rng = random.Random(seed)
    if role_count < 2:
        raise ValueError("need at least two roles")
    roles = (
        _ROLE_POOL[:role_count]
        if role_count <= len(_ROLE_POOL)
        else tuple(f"p{i}" for i in range(role_count))
    )

    def action() -> GlobalType:
        receiver = rng.choice(roles)
        rest = [x for x in roles if x != receiver]
        k = 2 if len(rest) >= 2 and rng.random() < 0.15 else 1
        senders = frozenset(rng.sample(rest, k))
        return GAction(Interaction(senders, receiver, rng.choice(_MESSAGE_POOL)))

    def gen(size: int, depth: int) -> GlobalType:
        if size <= 1:
            return action()
        roll = rng.random()
        if roll < 0.15 and depth > 0:
            return GStar(gen(size - 1, depth - 1))
        if roll < 0.45:
            cut = rng.randint(1, size - 1)
            return GSeq(gen(cut, depth), gen(size - cut, depth))
        if roll < 0.60:
            cut = rng.randint(1, size - 1)
            return GBoth(gen(cut, depth), gen(size - cut, depth))
        if roll < 0.85:
            cut = rng.randint(1, size - 1)
            return GEither(gen(cut, depth), gen(size - cut, depth))
        return action()

    return gen(rng.randint(1, max_size), star_depth)


def _bounded_preorder(
    g: GlobalType, env: SessionEnv, max_len: int, buf_bound: int, depth_bound: int
) -> ConformanceReport:
    """check_preorder, shrinking the length bound on enumeration overflow
    so large random samples still get checked at a smaller, recorded
    bound."""
    length = max_len
    while True:
        try:
            return check_preorder(g, env, length, buf_bound, depth_bound)
        except BudgetExceededError:
            if length <= 4:
                raise
            length = max(4, length // 2)


def cross_check_theorems(
    sample_count: int = 200,
    seed: int = 0,
    max_size: int = 8,
    role_count: int = 4,
    star_depth: int = 1,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
) -> dict:
    """Check, over random samples, that every well-formed projectable
    global type has a live projection that is bounded-sound and
    bounded-complete.  Returns counters and the list of violations (empty
    on success)."""
    report = {
        "samples": sample_count,
        "well_formed": 0,
        "projected": 0,
        "checked": 0,
        "violations": [],
    }
    for i in range(sample_count):
        g = random_global_type(seed + i, max_size, role_count, star_depth)
        wf = bool(well_formed(g))
        if wf:
            report["well_formed"] += 1
        try:
            env = project_top(g)
        except ProjectionError:
            continue
        report["projected"] += 1
        if not wf:
            continue
        report["checked"] += 1
        verdict = is_live(env, buf_bound, depth_bound)
        if isinstance(verdict, NotLive):
            report["violations"].append((i, "liveness", None))
            continue
        conformance = _bounded_preorder(
            g, env, default_max_len(g), buf_bound, depth_bound
        )
        if not conformance.sound:
            report["violations"].append(
                (i, "soundness", conformance.sound_counterexample)
            )
        if not conformance.complete:
            report["violations"].append(
                (i, "completeness", conformance.completeness_gap)
            )
    return report
