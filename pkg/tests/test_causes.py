import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actualcause.causes import (
    AC,
    BF,
    DEFINITIONS,
    HP,
    HP_MIN,
    CausalSetting,
    CauseSet,
    CauseWitnessPair,
    ContingencyNotActual,
    EventNotRealized,
    check_pair,
    enumerate_all,
    enumerate_pairs,
    is_ac_cause,
    is_but_for_cause,
    is_hp_cause,
    parse_var,
    partition_butfor,
    var_label,
)
from actualcause.engine import Action, Context, Primitive, State
from actualcause.goofspiel import cf_improvement, new_game
from actualcause.micro import (
    NOT_POISON,
    POISON,
    WATER,
    WINE,
    brute_force_pairs,
    build_micro_env,
)

from oracles import Oracle


def goof_setting(n, seed, deck=None):
    g = new_game(n, deck)
    return CausalSetting(g.scm, Context(seed), g.event, cf_improvement)


def realized_seeds(n, count, start=1):
    g = new_game(n)
    out, s = [], start
    while len(out) < count:
        st_ = CausalSetting(g.scm, Context(s), g.event)
        if st_.holds(st_.actual):
            out.append(s)
        s += 1
    return out


# -- micro environments ---------------------------------------------------------

A00, A01, A11 = Action(0, 0), Action(0, 1), Action(1, 1)

MICRO_GOLDEN = {
    ("bogus_single", BF): {(((A00, POISON), (A01, NOT_POISON)), (), (NOT_POISON, NOT_POISON))},
    ("bogus_single", HP): {(((A00, POISON),), ((A01, NOT_POISON),), (NOT_POISON,))},
    ("bogus_single", HP_MIN): {(((A00, POISON),), ((A01, NOT_POISON),), (NOT_POISON,))},
    ("bogus_single", AC): {(((A00, POISON),), ((A01, NOT_POISON),), (NOT_POISON,))},
    ("bogus_duo", BF): {(((A11, WINE),), (), (WATER,))},
    ("bogus_duo", AC): {(((A11, WINE),), (), (WATER,))},
    ("bogus_duo", HP): {(((A11, WINE),), (), (WATER,)), (((A00, WATER),), ((A11, WINE),), (WINE,))},
    ("bogus_duo", HP_MIN): {(((A11, WINE),), (), (WATER,)), (((A00, WATER),), ((A11, WINE),), (WINE,))},
}


@pytest.mark.parametrize("name,definition", sorted(MICRO_GOLDEN))
def test_micro_golden_tables(name, definition):
    env = build_micro_env(name)
    got = enumerate_pairs(env.setting(), definition)
    assert got.keys() == MICRO_GOLDEN[name, definition]
    assert brute_force_pairs(name, definition).keys() == MICRO_GOLDEN[name, definition]


@pytest.mark.parametrize("definition", DEFINITIONS)
def test_micro_once_policy_matches_oracle(definition):
    env = build_micro_env("bogus_single", "once")
    assert enumerate_pairs(env.setting(), definition).keys() == brute_force_pairs("bogus_single", definition, "once").keys()


def test_micro_actual_and_counterfactual_outcomes():
    for name in ("bogus_single", "bogus_duo"):
        env = build_micro_env(name)
        assert env.setting().holds(env.setting().actual)
    duo = build_micro_env("bogus_duo").setting()
    assert duo.flips({A11: WATER})


def test_unknown_micro_env():
    with pytest.raises(ValueError):
        build_micro_env("bogus_trio")


# -- checkers -----------------------------------------------------------------


def test_checkers_on_example_two():
    s = build_micro_env("bogus_duo").setting()
    assert is_but_for_cause(s, ((A11, WINE),), (WATER,))
    assert not is_but_for_cause(s, ((A00, WATER),), (WINE,))
    assert is_hp_cause(s, ((A00, WATER),), ((A11, WINE),), (WINE,))
    assert not is_ac_cause(s, ((A00, WATER),), ((A11, WINE),), (WINE,))
    with pytest.raises(ContingencyNotActual):
        is_hp_cause(s, ((A00, WATER),), ((A11, WATER),), (WINE,))


def test_but_for_rejects_non_minimal():
    s = build_micro_env("bogus_duo").setting()
    assert not is_but_for_cause(s, ((A00, WATER), (A11, WINE)), (WATER, WATER))


def test_partition_of_example_one():
    s = build_micro_env("bogus_single").setting()
    q = partition_butfor(s, ((A00, POISON), (A01, NOT_POISON)), (NOT_POISON, NOT_POISON))
    assert q.key == (((A00, POISON),), ((A01, NOT_POISON),), (NOT_POISON,))


def test_event_not_realized():
    env = build_micro_env("bogus_duo")
    alive = CausalSetting(env.scm, env.context, Primitive(State(2), (2, "alive")))
    with pytest.raises(EventNotRealized):
        enumerate_pairs(alive, AC)


def test_bad_budget():
    with pytest.raises(ValueError):
        enumerate_pairs(build_micro_env("bogus_duo").setting(), AC, 0)


# -- goofspiel against the literal oracle ----------------------------------------


@pytest.mark.parametrize("seed", realized_seeds(3, 6))
def test_goofspiel3_matches_oracle(seed):
    s = goof_setting(3, seed)
    out = enumerate_all(s, 4)
    o = Oracle(s, 4)
    bf = o.bf()
    assert out[BF].keys() == bf.keys()
    assert out[HP].keys() == o.hp().keys()
    assert out[AC].keys() == o.ac(bf).keys()


@pytest.mark.parametrize("seed", realized_seeds(4, 2))
def test_goofspiel4_matches_oracle(seed):
    s = goof_setting(4, seed)
    out = enumerate_all(s, 4)
    o = Oracle(s, 4)
    bf = o.bf()
    assert out[BF].keys() == bf.keys()
    assert out[HP].keys() == o.hp().keys()
    assert out[AC].keys() == o.ac(bf).keys()


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**40))
def test_enumerated_pairs_pass_their_checkers(seed):
    s = goof_setting(4, seed)
    if not s.holds(s.actual):
        with pytest.raises(EventNotRealized):
            enumerate_all(s, 4)
        return
    out = enumerate_all(s, 4)
    for d in DEFINITIONS:
        for p in out[d]:
            assert check_pair(s, p, 4), (d, p)
            assert p.size <= 4
            assert p.improvement >= 1
    assert out[HP_MIN].keys() <= out[HP].keys()
    image = {partition_butfor(s, p.cause, p.cf) for p in out[BF]}
    assert out[AC].keys() == {q.key for q in image if q is not None}


def test_budget_restricts_pairs():
    s = goof_setting(5, 0, (5, 4, 3, 2, 1))
    full = enumerate_pairs(s, AC, 4)
    small = enumerate_pairs(s, AC, 2)
    assert small.keys() == {p.key for p in full if p.size <= 2}


# -- serialization --------------------------------------------------------------


def test_labels_roundtrip():
    for v in (Action(0, 0), Action(1, 12)):
        assert parse_var(var_label(v)) == v
    with pytest.raises(ValueError):
        parse_var("S_3")


def test_causeset_json_roundtrip():
    s = goof_setting(4, realized_seeds(4, 1)[0])
    cs = enumerate_pairs(s, HP)
    back = CauseSet.from_json(json.loads(json.dumps(cs.to_json())))
    assert back.keys() == cs.keys()
    assert [p.improvement for p in back] == [p.improvement for p in cs]


def test_pair_validation():
    with pytest.raises(ValueError):
        CauseWitnessPair((), (), ())
    with pytest.raises(ValueError):
        CauseWitnessPair(((A00, 1),), (), (1, 2))
    with pytest.raises(ValueError):
        CauseWitnessPair(((A00, 1),), ((A00, 2),), (3,))
    with pytest.raises(ValueError):
        CauseWitnessPair(((A00, 1),), ((A01, 2),), (3,), BF)


def test_causeset_deduplicates():
    p = CauseWitnessPair(((A00, 1),), (), (2,), BF)
    q = CauseWitnessPair(((A00, 1),), (), (2,), BF, improvement=3)
    assert len(CauseSet(BF, (p, q))) == 1
