"""Algorithmic projection of global types onto session environments."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpst.machine import session_type_equal
from mpst.projector import (
    AND_ELIMINATION_EXHAUSTED,
    INCOMPATIBLE_MERGE,
    NO_DECISION_MAKER,
    OUTPUT_MISMATCH,
    ProjectionError,
    eliminate_and,
    merge,
    merge_env,
    project_alg,
    project_top,
)
from mpst.syntax import (
    GBoth,
    TEnd,
    parse_global_type,
    parse_session_type,
    print_session_type,
    roles_of,
)
from mpst.tracelang import compile_traces, includes
from mpst.verifier import check_preorder, random_global_type

g = parse_global_type
t = parse_session_type


def project_error(src: str) -> ProjectionError:
    with pytest.raises(ProjectionError) as err:
        project_top(g(src))
    return err.value


def test_sale_choreography_projects_to_dual_types():
    env = project_top(
        g(
            "seller -> buyer : descr ; seller -> buyer : price ;"
            " (buyer -> seller : accept | buyer -> seller : quit)"
        )
    )
    assert print_session_type(env["seller"]) == (
        "buyer!descr.buyer!price.(buyer?accept.end + buyer?quit.end)"
    )
    assert print_session_type(env["buyer"]) == (
        "seller?descr.seller?price.(seller!accept.end (+) seller!quit.end)"
    )


def test_starred_protocol_projects_to_recursive_types():
    env = project_top(g("(p -> q : a)* ; p -> q : b"))
    assert session_type_equal(env["p"], t("rec X . q!a.X (+) q!b.end"))
    assert session_type_equal(env["q"], t("rec Y . p?a.Y + p?b.end"))


def test_two_phase_loop_projects_to_alternating_recursion():
    env = project_top(
        g("loop2 (p -> q : handover, q -> p : handover) exit (p -> q : bailout, q -> p : bailout)")
    )
    assert session_type_equal(
        env["p"],
        t("rec X . (q!handover.(q?handover.X + q?bailout.end) (+) q!bailout.end)"),
    )
    assert session_type_equal(
        env["q"],
        t("rec Y . (p?handover.(p!handover.Y (+) p!bailout.end) + p?bailout.end)"),
    )


def test_nested_star_projection_is_sound_and_complete():
    protocol = g("(p -> q : a ; (p -> q : b)*)* ; p -> q : c")
    env = project_top(protocol)
    assert check_preorder(protocol, env, max_len=8, buf_bound=1)


def test_loop_with_spectator_is_sound_and_complete():
    from mpst.tracelang import well_formed

    protocol = g("loop1 (p -> q : go ; q -> p : ok) exit (p -> q : stop ; q -> r : done)")
    assert well_formed(protocol)
    env = project_top(protocol)
    # r plays no part in the loop body and only learns of the exit
    assert print_session_type(env["r"]) == "q?done.end"
    assert session_type_equal(env["p"], t("rec X . q!go.q?ok.X (+) q!stop.end"))
    assert check_preorder(protocol, env, max_len=10)


def test_shuffle_is_projected_through_a_serialization():
    env = project_top(g("(p -> q : a & p -> q : b) ; p -> q : c"))
    assert print_session_type(env["p"]) == "q!a.q!b.q!c.end"
    assert print_session_type(env["q"]) == "p?a.p?b.p?c.end"


def test_unordered_composition_has_no_direct_projection_rule():
    protocol = g("p -> q : a & r -> s : b")
    with pytest.raises(ProjectionError):
        project_alg(protocol, {r: TEnd() for r in sorted(roles_of(protocol))})
    assert project_top(protocol)  # a serialization projects


def test_merge_keeps_exclusive_input_branches():
    merged = merge(t("p?a.p?b.end"), t("p?b.end"))
    assert session_type_equal(merged, t("p?a.p?b.end + p?b.end"))


def test_merge_rejects_confusable_input_branches():
    with pytest.raises(ProjectionError) as err:
        merge(t("p?a.q?b.end"), t("q?b.end"))
    assert err.value.kind == INCOMPATIBLE_MERGE


def test_merge_env_keeps_one_sided_roles():
    out = merge_env({"p": t("q!a.end")}, {"p": t("q!a.end"), "r": t("q?c.end")})
    assert session_type_equal(out["p"], t("q!a.end"))
    assert session_type_equal(out["r"], t("q?c.end"))


def test_alternative_needs_a_unique_decision_maker():
    assert project_error("{p,q} -> r : a | {p,q} -> r : b").kind == NO_DECISION_MAKER
    assert project_error("p -> q : a | q -> p : a").kind == NO_DECISION_MAKER


def test_alternative_with_input_only_difference_is_rejected():
    err = project_error("{p,q} -> r : a | (p -> r : a ; q -> r : a)")
    assert err.kind == OUTPUT_MISMATCH


def test_alternative_whose_merge_fails_is_rejected():
    err = project_error(
        "(p -> q : a ; q -> r : a ; r -> p : a) | (p -> q : b ; q -> r : a ; r -> p : b)"
    )
    assert err.kind == INCOMPATIBLE_MERGE


def test_covert_channel_protocol_fails_every_rewrite():
    err = project_error(
        "(p -> q : a ; q -> r : b) |"
        " (p -> q : c ; ((q -> p : d ; p -> r : e) & q -> r : b))"
    )
    assert err.kind == AND_ELIMINATION_EXHAUSTED


def test_semantically_implementable_alternative_still_fails_algorithmically():
    err = project_error(
        "(p -> q : a ; q -> r : b) |"
        " (p -> q : c ; q -> p : d ; p -> r : e ; r -> q : f ; q -> r : b)"
    )
    assert err.kind == INCOMPATIBLE_MERGE


def test_projection_requires_bound_continuations():
    with pytest.raises(ProjectionError) as err:
        project_alg(g("p -> q : a"), {"p": TEnd()})
    assert err.value.kind == "UnboundContinuation"


def test_eliminate_and_candidates_stay_within_the_language():
    protocol = g("(p -> q : a ; q -> r : b) & (r -> s : c | s -> r : d)")
    whole = compile_traces(protocol)
    candidates = eliminate_and(protocol)
    assert candidates
    for cand in candidates:
        assert not isinstance(cand, GBoth)
        assert includes(compile_traces(cand), whole) is None


def test_eliminate_and_respects_its_budget():
    protocol = g("(p -> q : a & q -> r : b) & (r -> s : c & s -> p : d)")
    assert len(eliminate_and(protocol, budget=5)) <= 5


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_merge_is_idempotent_on_projected_types(seed):
    sample = random_global_type(seed, max_size=5, role_count=3, star_depth=1)
    try:
        env = project_top(sample)
    except ProjectionError:
        return
    for ty in env.values():
        assert session_type_equal(merge(ty, ty), ty)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_merge_is_commutative_when_defined(seed):
    left = random_global_type(seed, max_size=3, role_count=3, star_depth=0)
    right = random_global_type(seed + 1, max_size=3, role_count=3, star_depth=0)
    try:
        e1, e2 = project_top(left), project_top(right)
    except ProjectionError:
        return
    for role in set(e1) & set(e2):
        try:
            one = merge(e1[role], e2[role])
        except ProjectionError:
            with pytest.raises(ProjectionError):
                merge(e2[role], e1[role])
            continue
        assert session_type_equal(one, merge(e2[role], e1[role]))
