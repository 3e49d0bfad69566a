from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from actualcause.causes import AC, HP, CauseSet, CauseWitnessPair, enumerate_all
from actualcause.engine import Action
from actualcause.micro import build_micro_env
from actualcause.responsibility import (
    ACCS,
    ACW,
    ACW_I,
    AC_W,
    CH,
    METHODS,
    MissingImprovement,
    ResponsibilityProfile,
    WeightVector,
    ch_degree,
    degree,
    impact,
    responsibility_profile,
    weighted_degree,
    weights_for,
)


def sets_for(name, policy="always"):
    env = build_micro_env(name, policy)
    return enumerate_all(env.setting(), 4)


# -- worked examples -------------------------------------------------------------


def test_assassin_ch_depends_on_policy():
    assert ch_degree(sets_for("bogus_single", "once")[HP], 0) == 1
    assert ch_degree(sets_for("bogus_single", "always")[HP], 0) == Fraction(1, 2)


@pytest.mark.parametrize("policy", ["once", "always"])
@pytest.mark.parametrize("method", [AC_W, ACCS, ACW, ACW_I])
def test_assassin_weighted_is_one(policy, method):
    assert degree(sets_for("bogus_single", policy)[HP], method, 0) == 1


def test_example_two_bodyguard():
    out = sets_for("bogus_duo")
    assert ch_degree(out[HP], 0) == Fraction(1, 2)
    assert ch_degree(out[AC], 0) == 0
    prof = responsibility_profile(out[AC], CH, 2)
    assert prof.degrees == (0, 1)


def test_absent_agent_and_empty_set():
    out = sets_for("bogus_duo")
    assert degree(out[AC], ACW, 0) == 0
    empty = CauseSet(AC, ())
    assert ch_degree(empty, 0) == 0
    assert degree(empty, ACW, 0) == 0


# -- weights ---------------------------------------------------------------------

a = [Action(i, t) for t in range(4) for i in range(2)]


def pair(cause, cont=(), cf=None, imp=1):
    cause = tuple((v, 1) for v in cause)
    cont = tuple((v, 2) for v in cont)
    return CauseWitnessPair(cause, cont, cf or tuple(3 for _ in cause), AC, imp)


def test_single_pair_weights():
    cs = CauseSet(AC, (pair([a[0]], [a[2]], imp=3),))
    for m in (AC_W, ACCS, ACW):
        assert weights_for(m, cs, 0).weights == (1,)
    assert weights_for(ACW_I, cs, 0).weights == (3,)
    # one-term sum: m / (k - w) with the agent's own contingency discounted
    assert degree(cs, ACW, 0) == 1
    assert degree(cs, ACW, 1) == 0


def test_missing_improvement_names_pair():
    cs = CauseSet(AC, (pair([a[0]], imp=None),))
    with pytest.raises(MissingImprovement, match="A_"):
        weights_for(ACW_I, cs, 0)


def test_zero_weights_rejected():
    cs = CauseSet(AC, (pair([a[0]]),))
    with pytest.raises(ValueError):
        weighted_degree(cs, WeightVector((Fraction(0),), 0), 0)
    with pytest.raises(ValueError):
        WeightVector((Fraction(-1),), 0)


def test_ac_picks_one_pair_per_cause():
    cs = CauseSet(
        AC,
        (
            pair([a[0]], [a[1]], cf=(2,)),
            pair([a[0]], [a[1], a[3]], cf=(3,)),
            pair([a[1]], cf=(2,)),
        ),
    )
    w = weights_for(AC_W, cs, 0)
    assert sum(w.weights) == len(cs.causes()) == 2
    assert sum(weights_for(ACCS, cs, 0).weights) == 3


def test_impact():
    p = ResponsibilityProfile(CH, (Fraction(1), Fraction(0)))
    q = ResponsibilityProfile(CH, (Fraction(0), Fraction(1)))
    assert impact(p, p) == 0
    assert impact(p, q) == 2
    with pytest.raises(ValueError):
        impact(p, ResponsibilityProfile(CH, (Fraction(1),)))


def test_profile_json():
    out = sets_for("bogus_duo")
    j = responsibility_profile(out[HP], CH, 2).to_json()
    assert j["degrees"] == {"0": "1/2", "1": "1/1"}
    assert j["method"] == CH and len(j["source_causeset_hash"]) == 64
    with pytest.raises(ValueError):
        responsibility_profile(out[HP], "XYZ", 2)


# -- properties over random cause sets ------------------------------------------------


@st.composite
def cause_sets(draw):
    n = draw(st.integers(1, 6))
    pairs = []
    for _ in range(n):
        vs = draw(st.lists(st.sampled_from(a), min_size=1, max_size=4, unique=True))
        k = draw(st.integers(1, len(vs)))
        cf = tuple(draw(st.integers(1, 3)) for _ in range(k))
        pairs.append(
            CauseWitnessPair(
                tuple((v, 4) for v in vs[:k]),
                tuple((v, 4) for v in vs[k:]),
                cf,
                AC,
                draw(st.integers(1, 5)),
            )
        )
    return CauseSet(AC, tuple(pairs))


@settings(max_examples=200)
@given(cs=cause_sets())
def test_degrees_in_unit_interval(cs):
    for m in METHODS:
        for i in range(2):
            d = degree(cs, m, i)
            assert isinstance(d, Fraction)
            assert 0 <= d <= 1
            participates = any(v.agent == i for p in cs.pairs for v in p.cause_vars)
            assert (d == 0) == (not participates)


@settings(max_examples=200)
@given(cs=cause_sets())
def test_full_control(cs):
    only0 = CauseSet(AC, tuple(
        CauseWitnessPair(
            tuple((Action(0, v.t), x) for v, x in p.cause),
            (),
            p.cf,
            AC,
            p.improvement,
        )
        for p in cs.pairs
        if len({v.t for v in p.cause_vars}) == len(p.cause)
    ))
    assume(len(only0))
    for m in METHODS:
        assert degree(only0, m, 0) == 1
        assert degree(only0, m, 1) == 0


@settings(max_examples=200)
@given(cs=cause_sets(), extra=st.integers(1, 3))
def test_own_contingency_does_not_dilute(cs, extra):
    """Adding the agent's own conjuncts to W leaves its per-pair term unchanged."""
    p = cs.pairs[0]
    agent = p.cause_vars[0].agent
    padded = p.contingency + tuple((Action(agent, 20 + j), 4) for j in range(extra))
    q = CauseWitnessPair(p.cause, padded, p.cf, AC, p.improvement)
    one, two = CauseSet(AC, (p,)), CauseSet(AC, (q,))
    assert degree(one, ACW, agent) == degree(two, ACW, agent)


@settings(max_examples=200)
@given(cs=cause_sets())
def test_tie_break_independence(cs):
    """Any maximizing choice per group gives the same degree."""
    for m, group in ((AC_W, lambda p: p.cause), (ACCS, lambda p: (p.cause, p.cf))):
        for i in range(2):
            if not any(v.agent == i for p in cs.pairs for v in p.cause_vars):
                continue
            best = {}
            for p in cs.pairs:
                t = Fraction(sum(v.agent == i for v in p.cause_vars), p.size - sum(v.agent == i for v in p.contingency_vars))
                best[group(p)] = max(best.get(group(p), t), t)
            expected = sum(best.values(), Fraction(0)) / len(best)
            assert degree(cs, m, i) == expected
