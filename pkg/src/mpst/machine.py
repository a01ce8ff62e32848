"""Finite-state resolution of session types.

A closed session type denotes a regular tree of communication actions.  This
module elaborates a type term (possibly containing deferred merges) into a
finite state machine, checks the session-type sanity conditions on it,
minimizes it, and reads back a canonical term.  Everything else in the
package (equality, merging, input-compatibility, the session simulator)
works on top of this.

States of the machine are hash-consed expressions over term nodes:

* ``("p", i)`` — the behaviour of the term node with object id ``i``;
* ``("j", K)`` — the join of the behaviours in the key set ``K``
  (distribution of a prefix over the branches of a choice);
* ``("m", {x, y})`` — the merge of two behaviours: pointwise on outputs
  (which must offer identical choices), pointwise on shared inputs with
  exclusive inputs kept, provided each exclusive input is compatible with
  the other side.

Merges are evaluated coinductively: the memo table realizes the greatest
fixpoint, so recursive types whose merge only closes through a loop (the
deferred merges produced when projecting nested iterations) resolve here.
A merge whose kind depends on itself before crossing a prefix cannot be
resolved and fails conservatively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .syntax import (
    NotSessionTypeError,
    Role,
    SessionType,
    TEnd,
    TExternal,
    TIn,
    TInternal,
    TMerge,
    TOut,
    TRec,
    TVar,
    UnguardedRecursionError,
)

END, OUT, IN = "end", "out", "in"

_STATE_CAP = 20000


class MergeError(NotSessionTypeError):
    """Two behaviours that cannot be merged into one session type."""


@dataclass(frozen=True, slots=True)
class Machine:
    """A minimized session-type automaton.

    `kinds[s]` is one of "end"/"out"/"in"; `branches[s]` maps branch keys
    ``("out", partner, message)`` / ``("in", partners, message)`` to
    successor states.  State 0 is the root.  End states have no branches;
    out/in states have at least one.
    """

    kinds: tuple[str, ...]
    branches: tuple[dict, ...]
    root: int


def _bk_order(bk: tuple):
    if bk[0] == "out":
        return (0, bk[2], (bk[1],))
    return (1, bk[2], tuple(sorted(bk[1])))


@dataclass(slots=True)
class _Closure:
    """What a state offers without crossing a prefix: immediate atoms,
    opaque sub-behaviours (merges), and the choice nodes crossed."""

    atoms: list = field(default_factory=list)
    subs: list = field(default_factory=list)
    flavors: list = field(default_factory=list)


@dataclass(slots=True)
class _State:
    kind: str
    branches: dict


def _freshen(t: SessionType) -> tuple[SessionType, dict]:
    """Rebuild `t` with globally unique recursion-variable names; return the
    new term and the binder map name -> TRec node."""
    binders: dict[str, TRec] = {}
    counter = 0

    def go(node: SessionType, env: dict[str, str]) -> SessionType:
        nonlocal counter
        match node:
            case TEnd():
                return node
            case TVar(x):
                if x not in env:
                    raise ValueError(f"unbound recursion variable {x!r}")
                return TVar(env[x])
            case TOut(q, a, c):
                return TOut(q, a, go(c, env))
            case TIn(ps, a, c):
                return TIn(ps, a, go(c, env))
            case TInternal(bs):
                return TInternal(tuple(go(b, env) for b in bs))
            case TExternal(bs):
                return TExternal(tuple(go(b, env) for b in bs))
            case TRec(x, b):
                fresh = f"r{counter}"
                counter += 1
                body = go(b, env | {x: fresh})
                rec = TRec(fresh, body)
                binders[fresh] = rec
                return rec
            case TMerge(l, r):
                return TMerge(go(l, env), go(r, env))
        raise TypeError(f"not a session type: {node!r}")

    return go(t, {}), binders


class _Resolver:
    def __init__(self, t: SessionType):
        self.term, self.binders = _freshen(t)
        self.nodes: dict[int, SessionType] = {}
        self.closures: dict[tuple, _Closure] = {}
        self.kk: dict[tuple, tuple] = {}  # key -> (kind, frozenset of branch keys)
        self.kk_busy: set[tuple] = set()
        self.mops: dict[tuple, tuple] = {}  # merge key -> (x, y)
        self.states: dict[tuple, _State] = {}
        self.root_key = self._pkey(self.term)

    # -- state expression keys ------------------------------------------

    def _pkey(self, node: SessionType) -> tuple:
        self.nodes[id(node)] = node
        return ("p", id(node))

    def _mkey(self, x: tuple, y: tuple) -> tuple:
        if x == y:
            return x
        key = ("m", frozenset((x, y)))
        self.mops.setdefault(key, (x, y))
        return key

    def _jkey(self, parts: Iterable[tuple]) -> tuple:
        flat: set[tuple] = set()
        for p in parts:
            if p[0] == "j":
                flat |= p[1]
            else:
                flat.add(p)
        if len(flat) == 1:
            return next(iter(flat))
        return ("j", frozenset(flat))

    # -- epsilon closure --------------------------------------------------

    def _close(self, key: tuple) -> _Closure:
        cached = self.closures.get(key)
        if cached is not None:
            return cached
        cl = _Closure()
        seen: set = set()

        def visit_key(k: tuple) -> None:
            if k in seen:
                return
            seen.add(k)
            if k[0] == "m":
                cl.subs.append(k)
            elif k[0] == "j":
                for member in k[1]:
                    visit_key(member)
            else:
                visit_node(self.nodes[k[1]])

        def visit_node(node: SessionType) -> None:
            nid = ("n", id(node))
            if nid in seen:
                return
            seen.add(nid)
            match node:
                case TEnd():
                    cl.atoms.append((END,))
                case TOut(q, a, c):
                    cl.atoms.append((OUT, q, a, c))
                case TIn(ps, a, c):
                    cl.atoms.append((IN, ps, a, c))
                case TInternal(bs):
                    cl.flavors.append((OUT, tuple(self._pkey(b) for b in bs)))
                    for b in bs:
                        visit_node(b)
                case TExternal(bs):
                    cl.flavors.append((IN, tuple(self._pkey(b) for b in bs)))
                    for b in bs:
                        visit_node(b)
                case TRec(_, b):
                    visit_node(b)
                case TVar(x):
                    visit_node(self.binders[x])
                case TMerge(l, r):
                    cl.subs.append(self._mkey(self._pkey(l), self._pkey(r)))
                case _:
                    raise TypeError(f"not a session type: {node!r}")

        visit_key(key)
        self.closures[key] = cl
        return cl

    # -- kinds and branch keys ---------------------------------------------

    def kind_keys(self, key: tuple) -> tuple:
        cached = self.kk.get(key)
        if cached is not None:
            return cached
        if key in self.kk_busy:
            raise MergeError(
                "merge cannot be resolved: its result depends on itself "
                "before any prefix"
            )
        self.kk_busy.add(key)
        try:
            if key[0] == "m":
                x, y = self.mops[key]
                kx, skx = self.kind_keys(x)
                ky, sky = self.kind_keys(y)
                if kx != ky:
                    raise MergeError(
                        f"cannot merge a {kx!r} behaviour with a {ky!r} behaviour"
                    )
                if kx == OUT and skx != sky:
                    raise MergeError(
                        "cannot merge internal choices offering different outputs"
                    )
                result = (kx, skx | sky)
            else:
                cl = self._close(key)
                kinds: set[str] = set()
                keys: set[tuple] = set()
                for atom in cl.atoms:
                    kinds.add(atom[0])
                    if atom[0] == OUT:
                        keys.add((OUT, atom[1], atom[2]))
                    elif atom[0] == IN:
                        keys.add((IN, atom[1], atom[2]))
                for sub in cl.subs:
                    ks, sks = self.kind_keys(sub)
                    kinds.add(ks)
                    keys |= sks
                if not kinds:
                    raise UnguardedRecursionError(
                        "behaviour loops without any input or output"
                    )
                if len(kinds) > 1:
                    raise NotSessionTypeError(
                        f"one state mixes {' and '.join(sorted(kinds))} behaviours"
                    )
                result = (kinds.pop(), frozenset(keys))
        finally:
            self.kk_busy.discard(key)
        self.kk[key] = result
        return result

    # -- successor states ---------------------------------------------------

    def target(self, key: tuple, bk: tuple) -> tuple:
        if key[0] == "m":
            x, y = self.mops[key]
            _, skx = self.kind_keys(x)
            _, sky = self.kind_keys(y)
            if bk in skx and bk in sky:
                return self._mkey(self.target(x, bk), self.target(y, bk))
            if bk in skx:
                return self.target(x, bk)
            return self.target(y, bk)
        cl = self._close(key)
        parts = []
        for atom in cl.atoms:
            if atom[0] == OUT and bk == (OUT, atom[1], atom[2]):
                parts.append(self._pkey(atom[3]))
            elif atom[0] == IN and bk == (IN, atom[1], atom[2]):
                parts.append(self._pkey(atom[3]))
        for sub in cl.subs:
            _, sks = self.kind_keys(sub)
            if bk in sks:
                parts.append(self.target(sub, bk))
        return self._jkey(parts)

    # -- construction ---------------------------------------------------------

    def _build_from(self, key: tuple) -> None:
        work = [key]
        while work:
            k = work.pop()
            if k in self.states:
                continue
            kind, keys = self.kind_keys(k)
            branches = {bk: self.target(k, bk) for bk in keys}
            self.states[k] = _State(kind, branches)
            if len(self.states) > _STATE_CAP:
                raise NotSessionTypeError(
                    "session type is too large to resolve "
                    f"(more than {_STATE_CAP} states)"
                )
            work.extend(branches.values())

    def prepare(self) -> None:
        """Build and validate the full state graph."""
        self._build_from(self.root_key)
        checked: set[tuple] = set()
        while True:
            pending = [
                k for k in self.kk if k[0] == "m" and k not in checked
            ]
            if not pending:
                break
            for mk in pending:
                checked.add(mk)
                x, y = self.mops[mk]
                self._build_from(x)
                self._build_from(y)
                kind, _ = self.kk[mk]
                if kind == IN:
                    self._check_merge_compat(x, y)
                    self._check_merge_compat(y, x)
        for key, st in list(self.states.items()):
            self._check_input_determinism(st)
        for cl in list(self.closures.values()):
            for flavor, opkeys in cl.flavors:
                for ok in opkeys:
                    k, _ = self.kind_keys(ok)
                    if k != flavor:
                        what = (
                            "an internal choice branch must be an output"
                            if flavor == OUT
                            else "an external choice branch must be an input"
                        )
                        raise NotSessionTypeError(what)

    def _check_input_determinism(self, st: _State) -> None:
        ins = [bk for bk in st.branches if bk[0] == IN]
        for i, (_, ps1, a1) in enumerate(ins):
            for _, ps2, a2 in ins[i + 1 :]:
                if a1 == a2 and (ps1 <= ps2 or ps2 <= ps1):
                    raise NotSessionTypeError(
                        f"ambiguous external choice: inputs of {a1!r} from "
                        f"{{{','.join(sorted(ps1))}}} and "
                        f"{{{','.join(sorted(ps2))}}} overlap"
                    )

    # -- input compatibility ---------------------------------------------------

    def _check_merge_compat(self, x: tuple, y: tuple) -> None:
        _, skx = self.kind_keys(x)
        _, sky = self.kind_keys(y)
        for bk in skx - sky:
            _, partners, message = bk
            if not self.compatible_set(partners, message, y):
                raise MergeError(
                    f"input of {message!r} from "
                    f"{{{','.join(sorted(partners))}}} cannot be merged: "
                    "the other behaviour may consume it elsewhere"
                )

    def compatible_set(self, partners: frozenset, message: str, key: tuple) -> bool:
        return any(
            self._compat_one(p, message, key, set()) for p in sorted(partners)
        )

    def _compat_one(self, p: Role, a: str, key: tuple, seen: set) -> bool:
        if key in seen:
            return True
        seen.add(key)
        self._build_from(key)
        if not self._occurs(p, a, key):
            return True
        st = self.states[key]
        if st.kind == OUT:
            return all(
                self._compat_one(p, a, t, seen) for t in st.branches.values()
            )
        if st.kind == IN:
            for bk, t in st.branches.items():
                _, partners, message = bk
                if p in partners:
                    if message == a:
                        return False
                elif not self._compat_one(p, a, t, seen):
                    return False
            return True
        return True

    def _occurs(self, p: Role, a: str, key: tuple) -> bool:
        seen: set = set()
        work = [key]
        while work:
            k = work.pop()
            if k in seen:
                continue
            seen.add(k)
            self._build_from(k)
            st = self.states[k]
            for bk, t in st.branches.items():
                if bk[0] == IN and bk[2] == a and p in bk[1]:
                    return True
                work.append(t)
        return False

    # -- minimization and readback ----------------------------------------------

    def minimized(self) -> Machine:
        reach: list[tuple] = []
        seen: set[tuple] = set()
        work = [self.root_key]
        while work:
            k = work.pop()
            if k in seen:
                continue
            seen.add(k)
            reach.append(k)
            work.extend(self.states[k].branches.values())

        block: dict[tuple, int] = {}
        sig0: dict[tuple, int] = {}
        for k in reach:
            st = self.states[k]
            s = (st.kind, frozenset(st.branches))
            block[k] = sig0.setdefault(s, len(sig0))
        while True:
            sigs: dict[tuple, int] = {}
            nxt: dict[tuple, int] = {}
            for k in reach:
                st = self.states[k]
                s = (
                    block[k],
                    tuple(
                        (bk, block[t])
                        for bk, t in sorted(
                            st.branches.items(), key=lambda kv: _bk_order(kv[0])
                        )
                    ),
                )
                nxt[k] = sigs.setdefault(s, len(sigs))
            if len(sigs) == len(set(block.values())):
                block = nxt
                break
            block = nxt

        # canonical numbering by depth-first order along sorted branches
        order: dict[int, int] = {}
        rep_branches: dict[int, dict] = {}
        for k in reach:
            b = block[k]
            if b not in rep_branches:
                rep_branches[b] = {
                    bk: block[t] for bk, t in self.states[k].branches.items()
                }
        rep_kind = {block[k]: self.states[k].kind for k in reach}

        def number(b: int) -> None:
            if b in order:
                return
            order[b] = len(order)
            for bk in sorted(rep_branches[b], key=_bk_order):
                number(rep_branches[b][bk])

        number(block[self.root_key])
        kinds = [""] * len(order)
        branches: list[dict] = [{} for _ in order]
        for b, idx in order.items():
            kinds[idx] = rep_kind[b]
            branches[idx] = {
                bk: order[t] for bk, t in rep_branches[b].items()
            }
        return Machine(tuple(kinds), tuple(branches), 0)


_NAMES = ("X", "Y", "Z", "W", "V", "U")


def machine_to_type(m: Machine) -> SessionType:
    """Read back the canonical term of a minimized machine.  Recursion
    binders are introduced exactly at states reached by a cycle, named in
    first-use order."""
    counter = 0

    def fresh() -> str:
        nonlocal counter
        name = _NAMES[counter] if counter < len(_NAMES) else f"X{counter}"
        counter += 1
        return name

    def build(s: int, stack: dict[int, str | None]) -> SessionType:
        if s in stack:
            if stack[s] is None:
                stack[s] = fresh()
            return TVar(stack[s])
        stack[s] = None
        kind = m.kinds[s]
        if kind == END:
            body: SessionType = TEnd()
        else:
            parts = []
            for bk in sorted(m.branches[s], key=_bk_order):
                cont = build(m.branches[s][bk], stack)
                if bk[0] == OUT:
                    parts.append(TOut(bk[1], bk[2], cont))
                else:
                    parts.append(TIn(bk[1], bk[2], cont))
            if len(parts) == 1:
                body = parts[0]
            elif kind == OUT:
                body = TInternal(tuple(parts))
            else:
                body = TExternal(tuple(parts))
        name = stack.pop(s)
        if name is not None:
            return TRec(name, body)
        return body

    return build(m.root, {})


def type_machine(t: SessionType) -> Machine:
    """Resolve a closed session type (merges allowed) to its minimized
    machine.  Raises NotSessionTypeError/MergeError/UnguardedRecursionError
    when `t` does not denote a session type."""
    r = _Resolver(t)
    r.prepare()
    return r.minimized()


def normalize_session_type(t: SessionType) -> SessionType:
    """Canonical form of `t`: recursion unfolded to the minimal machine and
    read back with sorted branches and deterministic binder names.  Two
    types denote the same behaviour iff their canonical forms are equal."""
    return machine_to_type(type_machine(t))


def session_type_equal(a: SessionType, b: SessionType) -> bool:
    """Behavioural equality (equality of canonical forms)."""
    return normalize_session_type(a) == normalize_session_type(b)


def compatible_input(partners: Iterable[Role], message: str, t: SessionType) -> bool:
    """Can an input of `message` from `partners` be offered alongside `t`
    in one external choice without stealing messages `t` needs?  True when
    some partner in `partners` never sends `message` to this role at any
    point where `t` could also consume it."""
    r = _Resolver(t)
    r._build_from(r.root_key)
    return r.compatible_set(frozenset(partners), message, r.root_key)


def root_kind(t: SessionType) -> str | None:
    """The definite root kind of a (possibly open) type term, or None when
    it depends on unresolved variables or merges."""
    match t:
        case TEnd():
            return END
        case TOut(_, _, _) | TInternal(_):
            return OUT
        case TIn(_, _, _) | TExternal(_):
            return IN
        case TRec(_, b):
            return root_kind(b)
        case TMerge(l, r):
            kl = root_kind(l)
            return kl if kl == root_kind(r) else None
        case TVar(_):
            return None
    raise TypeError(f"not a session type: {t!r}")
