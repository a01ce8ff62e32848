"""Trace languages of global types, inclusion, and well-formedness."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import parikh, swap_violations, swappable, trace_set
from mpst.syntax import GAction, parse_global_type
from mpst.tracelang import (
    BudgetExceededError,
    NotWellFormed,
    compile_traces,
    enumerate_traces,
    includes,
    parikh_vector,
    shuffle_automata,
    well_formed,
)
from mpst.verifier import random_global_type


def g(src: str):
    return parse_global_type(src)


def letter(src: str):
    action = parse_global_type(src)
    assert isinstance(action, GAction)
    return action.interaction


def word(*srcs: str):
    return tuple(letter(s) for s in srcs)


def lang(src: str, bound: int):
    return enumerate_traces(compile_traces(g(src)), bound)


PINNED = [
    "p -> q : a",
    "skip",
    "p -> q : a ; q -> r : b",
    "p -> q : a | q -> p : a",
    "p -> q : a & r -> s : b",
    "(p -> q : a)* ; p -> q : b",
    "(p -> q : a ; (p -> q : b)*)*",
    "{q1,q2} -> q : b & p -> q1 : a",
    "loop2 (p -> q : h, q -> p : h) exit (p -> q : b, q -> p : b)",
    "(p -> q : a | q -> r : c) ; (r -> s : d & s -> r : e)",
]


@pytest.mark.parametrize("src", PINNED)
@pytest.mark.parametrize("bound", [0, 1, 4, 7])
def test_compiled_traces_match_recursive_semantics(src, bound):
    assert lang(src, bound) == trace_set(g(src), bound)


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_compiled_traces_match_recursive_semantics_randomly(seed):
    sample = random_global_type(seed, max_size=5, role_count=4, star_depth=1)
    assert enumerate_traces(compile_traces(sample), 5) == trace_set(sample, 5)


def test_shuffle_is_commutative_and_preserves_operand_order():
    left = lang("(p -> q : a ; q -> r : b) & r -> s : c", 4)
    right = lang("r -> s : c & (p -> q : a ; q -> r : b)", 4)
    assert left == right
    a, b, c = letter("p -> q : a"), letter("q -> r : b"), letter("r -> s : c")
    assert left == {(a, b, c), (a, c, b), (c, a, b)}


def test_shuffle_automata_agrees_with_language_shuffle():
    auto = shuffle_automata(compile_traces(g("p -> q : a")), compile_traces(g("r -> s : b ; s -> r : c")))
    assert enumerate_traces(auto, 3) == lang("p -> q : a & (r -> s : b ; s -> r : c)", 3)


def test_star_unfolds_once():
    assert lang("(p -> q : a ; q -> p : b)*", 6) == lang(
        "skip | (p -> q : a ; q -> p : b) ; (p -> q : a ; q -> p : b)*", 6
    )


def test_two_exit_loop_matches_its_unfolding():
    looped = "loop2 (p -> q : h, q -> p : h) exit (p -> q : b, q -> p : b)"
    unfolded = "(p -> q : h ; q -> p : h)* ; (p -> q : b | p -> q : h ; q -> p : b)"
    for bound in (0, 3, 7):
        assert lang(looped, bound) == lang(unfolded, bound)


def test_inclusion_is_reflexive_and_detects_gaps():
    a = compile_traces(g("(p -> q : a)* ; p -> q : b"))
    assert includes(a, a) is None
    branch = compile_traces(g("p -> q : a ; p -> q : b"))
    assert includes(branch, a) is None
    cex = includes(a, branch)
    assert cex is not None and cex in lang("(p -> q : a)* ; p -> q : b", 3)


def test_inclusion_counterexample_is_shortest():
    small = compile_traces(g("p -> q : b"))
    big = compile_traces(g("p -> q : b | p -> q : a ; p -> q : b"))
    assert includes(big, small) == word("p -> q : a", "p -> q : b")


def test_enumeration_cap_is_enforced():
    with pytest.raises(BudgetExceededError):
        enumerate_traces(compile_traces(g("(p -> q : a | p -> q : b)*")), 20, cap=100)


def test_parikh_vector_identifies_permutations():
    u = word("p -> q : a", "q -> r : b", "p -> q : a")
    v = word("q -> r : b", "p -> q : a", "p -> q : a")
    w = word("p -> q : a", "q -> r : b")
    assert parikh_vector(u) == parikh_vector(v) == parikh(u) == parikh(v)
    assert parikh_vector(u) != parikh_vector(w)


def test_swappable_requires_independent_receiver():
    first, second = letter("p -> q : a"), letter("r -> s : b")
    assert swappable(first, second)
    assert not swappable(letter("p -> q : a"), letter("q -> r : b"))
    assert not swappable(letter("p -> q : a"), letter("r -> q : b"))


def test_well_formedness_of_pinned_protocols():
    assert well_formed(g("p -> q : a ; q -> r : b"))
    assert well_formed(g("p -> q : a & r -> s : b"))
    assert not well_formed(g("p -> q : a ; r -> s : b"))
    assert well_formed(g("(p -> q : a)* ; p -> q : b"))


def test_not_well_formed_witness_is_a_replayable_violation():
    verdict = well_formed(g("p -> q : a ; r -> s : b"))
    assert isinstance(verdict, NotWellFormed)
    auto = compile_traces(g("p -> q : a ; r -> s : b"))
    trace, pos = verdict.witness, verdict.position
    assert auto.member(trace)
    assert swappable(trace[pos], trace[pos + 1])
    swapped = trace[:pos] + (trace[pos + 1], trace[pos]) + trace[pos + 2 :]
    assert not auto.member(swapped)


@settings(max_examples=120, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_well_formedness_matches_swap_closure_oracle(seed):
    sample = random_global_type(seed, max_size=4, role_count=4, star_depth=0)
    words = enumerate_traces(compile_traces(sample), 4)
    assert bool(well_formed(sample)) == (not swap_violations(words))
