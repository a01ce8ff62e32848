"""Trace languages of global types.

A global type denotes a regular language of interactions.  This module
compiles global types to nondeterministic finite automata over interaction
letters, and provides the operations the rest of the package needs:
bounded enumeration, language inclusion with shortest counterexamples,
shuffle products, Parikh vectors, and the well-formedness check.

Automata stay nondeterministic everywhere; subset construction happens
only on the fly, inside `includes` and during enumeration.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .syntax import (
    GAction,
    GBoth,
    GEither,
    GKExit,
    GlobalType,
    GSeq,
    GSkip,
    GStar,
    Interaction,
)

Word = tuple[Interaction, ...]

DEFAULT_ENUM_CAP = 100000


class BudgetExceededError(RuntimeError):
    """An enumeration produced more traces than the allowed budget."""


def _ikey(i: Interaction):
    return (tuple(sorted(i.senders)), i.receiver, i.message)


class TraceAutomaton:
    """A nondeterministic finite automaton over interaction letters.

    `delta[q]` is a list of (label, target) pairs; a label of None is an
    epsilon move.  There is one start state and a set of accepting states.
    """

    def __init__(
        self,
        delta: list[list[tuple[Interaction | None, int]]],
        start: int,
        accepts: frozenset[int],
    ):
        self.delta = delta
        self.start = start
        self.accepts = frozenset(accepts)

    @property
    def n_states(self) -> int:
        return len(self.delta)

    def alphabet(self) -> frozenset[Interaction]:
        return frozenset(
            lab for edges in self.delta for lab, _ in edges if lab is not None
        )

    def epsilon_closure(self, states) -> frozenset[int]:
        seen = set(states)
        work = list(states)
        while work:
            q = work.pop()
            for lab, r in self.delta[q]:
                if lab is None and r not in seen:
                    seen.add(r)
                    work.append(r)
        return frozenset(seen)

    def eliminate_epsilon(self) -> TraceAutomaton:
        """An equivalent automaton with no epsilon moves."""
        closures = [self.epsilon_closure({q}) for q in range(self.n_states)]
        delta: list[list[tuple[Interaction | None, int]]] = []
        accepts = set()
        for q in range(self.n_states):
            edges = []
            for q2 in closures[q]:
                for lab, r in self.delta[q2]:
                    if lab is not None:
                        edges.append((lab, r))
            delta.append(sorted(set(edges), key=lambda e: (_ikey(e[0]), e[1])))
            if closures[q] & self.accepts:
                accepts.add(q)
        return TraceAutomaton(delta, self.start, frozenset(accepts))

    def trim(self) -> TraceAutomaton:
        """Drop states that are unreachable or cannot reach acceptance."""
        fwd = {self.start}
        work = [self.start]
        while work:
            q = work.pop()
            for _, r in self.delta[q]:
                if r not in fwd:
                    fwd.add(r)
                    work.append(r)
        rev: dict[int, set[int]] = {q: set() for q in range(self.n_states)}
        for q in range(self.n_states):
            for _, r in self.delta[q]:
                rev[r].add(q)
        bwd = set(self.accepts)
        work = list(self.accepts)
        while work:
            q = work.pop()
            for p in rev[q]:
                if p not in bwd:
                    bwd.add(p)
                    work.append(p)
        keep = sorted(fwd & bwd)
        if self.start not in keep:
            # empty language
            return TraceAutomaton([[]], 0, frozenset())
        index = {q: i for i, q in enumerate(keep)}
        delta = [
            [
                (lab, index[r])
                for lab, r in self.delta[q]
                if r in index
            ]
            for q in keep
        ]
        accepts = frozenset(index[q] for q in self.accepts if q in index)
        return TraceAutomaton(delta, index[self.start], accepts)

    def step(self, states: frozenset[int], letter: Interaction) -> frozenset[int]:
        """Subset transition of the epsilon-free automaton."""
        return frozenset(
            r for q in states for lab, r in self.delta[q] if lab == letter
        )

    def member(self, word: Word) -> bool:
        a = self.eliminate_epsilon()
        states = frozenset({a.start})
        for letter in word:
            states = a.step(states, letter)
            if not states:
                return False
        return bool(states & a.accepts)

    def to_dot(self) -> str:
        """The automaton in DOT graph format (for debugging dumps)."""
        lines = ["digraph traces {", "  rankdir=LR;", '  hidden [shape=none, label=""];']
        for q in range(self.n_states):
            shape = "doublecircle" if q in self.accepts else "circle"
            lines.append(f"  s{q} [shape={shape}, label=\"{q}\"];")
        lines.append(f"  hidden -> s{self.start};")
        for q in range(self.n_states):
            for lab, r in self.delta[q]:
                text = "ε" if lab is None else str(lab)
                lines.append(f'  s{q} -> s{r} [label="{text}"];')
        lines.append("}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


def _empty_word() -> TraceAutomaton:
    return TraceAutomaton([[]], 0, frozenset({0}))


def _letter(i: Interaction) -> TraceAutomaton:
    return TraceAutomaton([[(i, 1)], []], 0, frozenset({1}))


def _offset(a: TraceAutomaton, by: int):
    return [
        [(lab, r + by) for lab, r in edges] for edges in a.delta
    ]


def _seq(a: TraceAutomaton, b: TraceAutomaton) -> TraceAutomaton:
    delta = [list(e) for e in a.delta] + _offset(b, a.n_states)
    for f in a.accepts:
        delta[f].append((None, b.start + a.n_states))
    accepts = frozenset(f + a.n_states for f in b.accepts)
    return TraceAutomaton(delta, a.start, accepts)


def _alt(a: TraceAutomaton, b: TraceAutomaton) -> TraceAutomaton:
    # state 0 is the new start
    delta: list[list[tuple[Interaction | None, int]]] = [
        [(None, a.start + 1), (None, b.start + 1 + a.n_states)]
    ]
    delta += _offset(a, 1)
    delta += _offset(b, 1 + a.n_states)
    accepts = frozenset(f + 1 for f in a.accepts) | frozenset(
        f + 1 + a.n_states for f in b.accepts
    )
    return TraceAutomaton(delta, 0, accepts)


def _star(a: TraceAutomaton) -> TraceAutomaton:
    # state 0 is the new start and only accepting state
    delta: list[list[tuple[Interaction | None, int]]] = [[(None, a.start + 1)]]
    delta += _offset(a, 1)
    for f in a.accepts:
        delta[f + 1].append((None, 0))
    return TraceAutomaton(delta, 0, frozenset({0}))


def shuffle_automata(a: TraceAutomaton, b: TraceAutomaton) -> TraceAutomaton:
    """The automaton of all interleavings of one trace of `a` with one
    trace of `b`."""
    a = a.eliminate_epsilon().trim()
    b = b.eliminate_epsilon().trim()
    index: dict[tuple[int, int], int] = {}
    delta: list[list[tuple[Interaction | None, int]]] = []

    def state(p: int, q: int) -> int:
        key = (p, q)
        if key not in index:
            index[key] = len(delta)
            delta.append([])
        return index[key]

    start = state(a.start, b.start)
    work = [(a.start, b.start)]
    seen = {(a.start, b.start)}
    while work:
        p, q = work.pop()
        s = state(p, q)
        for lab, r in a.delta[p]:
            t = (r, q)
            delta[s].append((lab, state(*t)))
            if t not in seen:
                seen.add(t)
                work.append(t)
        for lab, r in b.delta[q]:
            t = (p, r)
            delta[s].append((lab, state(*t)))
            if t not in seen:
                seen.add(t)
                work.append(t)
    accepts = frozenset(
        s for (p, q), s in index.items() if p in a.accepts and q in b.accepts
    )
    return TraceAutomaton(delta, start, accepts)


def kexit_unfolding(
    bodies: tuple[GlobalType, ...], exits: tuple[GlobalType, ...]
) -> GlobalType:
    """loopk (B1..Bk) exit (E1..Ek) has the same traces as
    (B1;..;Bk)* ; (E1 | B1;E2 | .. | B1;..;B(k-1);Ek)."""
    chain = bodies[0]
    for b in bodies[1:]:
        chain = GSeq(chain, b)
    alt: GlobalType | None = None
    for i, e in enumerate(exits):
        arm: GlobalType = e
        for b in reversed(bodies[:i]):
            arm = GSeq(b, arm)
        alt = arm if alt is None else GEither(alt, arm)
    assert alt is not None
    return GSeq(GStar(chain), alt)


def compile_traces(g: GlobalType) -> TraceAutomaton:
    """An automaton accepting exactly the traces of `g`."""
    match g:
        case GSkip():
            return _empty_word()
        case GAction(i):
            return _letter(i)
        case GSeq(l, r):
            return _seq(compile_traces(l), compile_traces(r))
        case GEither(l, r):
            return _alt(compile_traces(l), compile_traces(r))
        case GBoth(l, r):
            return shuffle_automata(compile_traces(l), compile_traces(r))
        case GStar(b):
            return _star(compile_traces(b))
        case GKExit(bodies, exits):
            return compile_traces(kexit_unfolding(bodies, exits))
    raise TypeError(f"not a global type: {g!r}")


# ---------------------------------------------------------------------------
# Language operations
# ---------------------------------------------------------------------------


def enumerate_traces(
    source: GlobalType | TraceAutomaton,
    max_len: int,
    cap: int = DEFAULT_ENUM_CAP,
) -> set[Word]:
    """All traces of length <= max_len, as a set of words.  Raises
    BudgetExceededError when more than `cap` traces would be produced."""
    a = compile_traces(source) if not isinstance(source, TraceAutomaton) else source
    a = a.eliminate_epsilon().trim()
    words: set[Word] = set()
    if a.n_states == 1 and not a.accepts and not a.delta[0]:
        return words
    sigma = sorted(a.alphabet(), key=_ikey)
    queue: deque[tuple[frozenset[int], Word]] = deque(
        [(frozenset({a.start}), ())]
    )
    while queue:
        states, word = queue.popleft()
        if states & a.accepts:
            words.add(word)
            if len(words) > cap:
                raise BudgetExceededError(
                    f"more than {cap} traces of length <= {max_len}"
                )
        if len(word) == max_len:
            continue
        for letter in sigma:
            nxt = a.step(states, letter)
            if nxt:
                queue.append((nxt, word + (letter,)))
    return words


def includes(a1: TraceAutomaton, a2: TraceAutomaton) -> Word | None:
    """None if the language of `a1` is included in that of `a2`; otherwise
    a shortest word accepted by `a1` and rejected by `a2`."""
    e1 = a1.eliminate_epsilon().trim()
    e2 = a2.eliminate_epsilon()
    sigma = sorted(e1.alphabet() | e2.alphabet(), key=_ikey)
    start = (frozenset({e1.start}), frozenset({e2.start}))
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        pair = queue.popleft()
        s1, s2 = pair
        if s1 & e1.accepts and not (s2 & e2.accepts):
            word: list[Interaction] = []
            node = pair
            while parent[node] is not None:
                node, letter = parent[node]
                word.append(letter)
            return tuple(reversed(word))
        for letter in sigma:
            n1 = e1.step(s1, letter)
            if not n1:
                continue  # words outside L(a1) can never be counterexamples
            n2 = e2.step(s2, letter)
            nxt = (n1, n2)
            if nxt not in parent:
                parent[nxt] = (pair, letter)
                queue.append(nxt)
    return None


def parikh_vector(word: Word) -> frozenset:
    """The multiset of letters of `word`, as a hashable frozenset of
    (interaction, count) pairs.  Two words are permutations of one another
    iff their Parikh vectors are equal."""
    counts: dict[Interaction, int] = {}
    for letter in word:
        counts[letter] = counts.get(letter, 0) + 1
    return frozenset(counts.items())


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class WellFormed:
    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True, slots=True)
class NotWellFormed:
    """`witness` is a trace of the type whose interactions at `position`
    and `position`+1 are independent, yet the swapped trace is not a trace
    of the type."""

    witness: Word
    position: int

    def __bool__(self) -> bool:
        return False


def _swappable(first: Interaction, second: Interaction) -> bool:
    return first.receiver not in (second.senders | {second.receiver})


def _swap_variants(a: TraceAutomaton) -> TraceAutomaton:
    """Accepts every word obtained from a word of `a` (epsilon-free) by
    swapping exactly one adjacent independent pair."""
    n = a.n_states
    delta: list[list[tuple[Interaction | None, int]]] = [
        [] for _ in range(2 * n)
    ]
    mids: dict[tuple[Interaction, int], int] = {}

    def mid(alpha: Interaction, target: int) -> int:
        key = (alpha, target)
        if key not in mids:
            mids[key] = len(delta)
            delta.append([(alpha, n + target)])
        return mids[key]

    for q in range(n):
        for lab, r in a.delta[q]:
            delta[q].append((lab, r))
            delta[n + q].append((lab, n + r))
    for q in range(n):
        for alpha, r in a.delta[q]:
            for beta, s in a.delta[r]:
                if _swappable(alpha, beta):
                    delta[q].append((beta, mid(alpha, s)))
    accepts = frozenset(n + f for f in a.accepts)
    return TraceAutomaton(delta, a.start, accepts)


def well_formed(g: GlobalType) -> WellFormed | NotWellFormed:
    """Decide whether the traces of `g` are closed under reordering of
    adjacent independent interactions.

    Closure under one swap implies closure under any number of swaps, so
    checking the one-swap variants suffices."""
    a = compile_traces(g).eliminate_epsilon().trim()
    if not a.accepts:
        return WellFormed()
    counterexample = includes(_swap_variants(a), a)
    if counterexample is None:
        return WellFormed()
    w2 = counterexample
    for i in range(len(w2) - 1):
        beta, alpha = w2[i], w2[i + 1]
        if _swappable(alpha, beta):
            witness = w2[:i] + (alpha, beta) + w2[i + 2 :]
            if a.member(witness):
                return NotWellFormed(witness, i)
    raise AssertionError("swap counterexample with no matching source trace")
