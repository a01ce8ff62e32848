"""Asynchronous execution of sessions over buffered point-to-point channels.

A configuration pairs every role's current state in its session-type
machine with one FIFO buffer per (sender, receiver) pair.  Outputs are
internal moves: they append to a buffer (when it has room — outputs that
would overflow the bound are disabled, restricting the semantics to
bounded buffers).  Inputs are the observable moves: an input of message
`a` from partners π fires only when *every* buffer from a partner in π to
the receiver holds `a` at its head, and consumes one copy from each.

A session is live when every reachable configuration can still reach
success: all roles ended with all buffers drained.  The traces of a
session are the sequences of input labels along runs that reach success;
a session that is not live has no traces at all.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import machine as _machine
from .syntax import Interaction, Role, SessionEnv
from .tracelang import TraceAutomaton, Word, enumerate_traces

DEFAULT_BUF_BOUND = 4
DEFAULT_DEPTH_BOUND = 10000

Buffer = tuple  # canonical: sorted tuple of ((sender, receiver), (msg, ...))


def buffer_normalize(buffers: dict) -> Buffer:
    """Canonical form of a buffer map: only non-empty queues, sorted by
    channel, contents as tuples.  Two buffer maps are equal iff their
    canonical forms are."""
    return tuple(
        sorted((chan, tuple(msgs)) for chan, msgs in buffers.items() if msgs)
    )


@dataclass(frozen=True, slots=True)
class Config:
    """A snapshot of a running session: one machine state per role (in the
    session's fixed role order) and the canonical buffer map."""

    locations: tuple[int, ...]
    buffers: Buffer


@dataclass(frozen=True, slots=True)
class Live:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True, slots=True)
class NotLive:
    """`witness` is a replayable run (successive configurations, starting
    at the initial one) ending in a configuration from which success is
    unreachable."""

    witness: tuple[Config, ...]

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True, slots=True)
class Unknown:
    """Exploration hit the configuration bound before the verdict was
    decided."""

    explored: int

    def __bool__(self) -> bool:
        return False


class Session:
    """A session environment compiled to per-role machines, ready to run."""

    def __init__(self, env: SessionEnv, buf_bound: int = DEFAULT_BUF_BOUND):
        self.roles: tuple[Role, ...] = tuple(sorted(env))
        self.machines = [_machine.type_machine(env[r]) for r in self.roles]
        self.buf_bound = buf_bound

    def initial(self) -> Config:
        return Config(tuple(m.root for m in self.machines), ())

    def is_success(self, c: Config) -> bool:
        return not c.buffers and all(
            m.kinds[s] == "end" for m, s in zip(self.machines, c.locations)
        )

    def step(self, c: Config) -> list[tuple[Interaction | None, Config]]:
        """All moves from `c`: (None, c') for outputs, (label, c') for
        inputs."""
        buffers = {chan: list(msgs) for chan, msgs in c.buffers}
        out: list[tuple[Interaction | None, Config]] = []
        for i, (role, m) in enumerate(zip(self.roles, self.machines)):
            state = c.locations[i]
            for bk, target in sorted(
                m.branches[state].items(), key=lambda kv: _machine._bk_order(kv[0])
            ):
                if bk[0] == "out":
                    _, partner, msg = bk
                    chan = (role, partner)
                    queue = buffers.get(chan, [])
                    if len(queue) >= self.buf_bound:
                        continue
                    nb = dict(buffers)
                    nb[chan] = queue + [msg]
                    nxt = Config(
                        c.locations[:i] + (target,) + c.locations[i + 1 :],
                        buffer_normalize(nb),
                    )
                    out.append((None, nxt))
                else:
                    _, partners, msg = bk
                    if all(
                        buffers.get((s, role), [None])[0:1] == [msg]
                        for s in partners
                    ):
                        nb = dict(buffers)
                        for s in partners:
                            nb[(s, role)] = buffers[(s, role)][1:]
                        nxt = Config(
                            c.locations[:i] + (target,) + c.locations[i + 1 :],
                            buffer_normalize(nb),
                        )
                        out.append((Interaction(partners, role, msg), nxt))
        return out


def _explore(
    session: Session, depth_bound: int
) -> tuple[dict[Config, list[tuple[Interaction | None, Config]]], bool]:
    """Breadth-first reachable configuration graph, capped at `depth_bound`
    configurations.  Returns (graph, truncated); configurations discovered
    but not expanded are absent from the graph's key set."""
    init = session.initial()
    graph: dict[Config, list[tuple[Interaction | None, Config]]] = {}
    queue = deque([init])
    seen = {init}
    truncated = False
    while queue:
        c = queue.popleft()
        if len(graph) >= depth_bound:
            truncated = True
            break
        succs = session.step(c)
        graph[c] = succs
        for _, c2 in succs:
            if c2 not in seen:
                seen.add(c2)
                queue.append(c2)
    return graph, truncated


def _can_reach(
    graph: dict[Config, list[tuple[Interaction | None, Config]]],
    targets: set[Config],
) -> set[Config]:
    reverse: dict[Config, list[Config]] = {}
    for c, succs in graph.items():
        for _, c2 in succs:
            reverse.setdefault(c2, []).append(c)
    closure = set(targets)
    work = list(targets)
    while work:
        c = work.pop()
        for p in reverse.get(c, ()):
            if p not in closure:
                closure.add(p)
                work.append(p)
    return closure


def is_live(
    env: SessionEnv,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
) -> Live | NotLive | Unknown:
    """Can every reachable configuration still reach success?  Exact when
    the bounded configuration graph is fully explored; a configuration
    whose whole future was explored and never succeeds yields a definitive
    NotLive even under truncation."""
    session = Session(env, buf_bound)
    graph, truncated = _explore(session, depth_bound)
    success = {c for c in graph if session.is_success(c)}
    frontier: set[Config] = {
        c2 for succs in graph.values() for _, c2 in succs if c2 not in graph
    }
    promising = _can_reach(graph, success | frontier if truncated else success)
    bad = [c for c in graph if c not in promising]
    if not bad:
        return Unknown(len(graph)) if truncated else Live()
    # find a shortest path from the initial configuration to a bad one
    init = session.initial()
    parent: dict[Config, Config | None] = {init: None}
    queue = deque([init])
    while queue:
        c = queue.popleft()
        if c not in promising:
            path = [c]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return NotLive(tuple(reversed(path)))
        for _, c2 in graph.get(c, ()):  # type: ignore[arg-type]
            if c2 not in parent:
                parent[c2] = c
                queue.append(c2)
    raise AssertionError("unreachable: bad configuration not found by BFS")


def session_traces(
    env: SessionEnv,
    max_len: int,
    buf_bound: int = DEFAULT_BUF_BOUND,
    depth_bound: int = DEFAULT_DEPTH_BOUND,
) -> set[Word]:
    """The input-label sequences (length <= max_len) of runs that reach
    success — empty when the session is not live."""
    verdict = is_live(env, buf_bound, depth_bound)
    if isinstance(verdict, NotLive):
        return set()
    session = Session(env, buf_bound)
    graph, _ = _explore(session, depth_bound)
    index = {c: i for i, c in enumerate(graph)}
    delta: list[list[tuple[Interaction | None, int]]] = [[] for _ in graph]
    for c, succs in graph.items():
        for label, c2 in succs:
            if c2 in index:
                delta[index[c]].append((label, index[c2]))
    accepts = frozenset(index[c] for c in graph if session.is_success(c))
    auto = TraceAutomaton(delta, index[session.initial()], accepts)
    return enumerate_traces(auto, max_len)
