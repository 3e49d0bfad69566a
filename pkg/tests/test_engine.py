import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from actualcause.engine import (
    Action,
    AgentModel,
    Context,
    DecPomdpModel,
    DistributionError,
    Info,
    InterventionError,
    Obs,
    Predicate,
    Primitive,
    State,
    UnknownPredicateError,
    build_scm,
    causal_graph_edges,
    check_counterfactual_stability,
    export_causal_graph,
    rollout,
    sample_context,
    satisfies,
)
from actualcause.goofspiel import new_game


def synthetic(policy=None, transition=None, horizon=4, n_states=3):
    """One agent on a small stochastic chain; observes the state exactly."""
    states = tuple(range(n_states))

    def default_transition(s, joint):
        (a,) = joint
        if a == 0:
            return {s: 0.6, (s + 1) % n_states: 0.3, (s + 2) % n_states: 0.1}
        return {(s + 1) % n_states: 0.5, (s + 2) % n_states: 0.5}

    def default_policy(info):
        return {0: 0.7, 1: 0.3} if info % 2 == 0 else {0: 0.2, 1: 0.8}

    model = DecPomdpModel(
        state_space=states,
        n_agents=1,
        action_spaces=[(0, 1)],
        transition=transition or default_transition,
        observation_spaces=[states],
        observation=lambda s: {(s,): 1.0},
        horizon=horizon,
        initial={0: 0.5, 1: 0.25, 2: 0.25},
    )
    agent = AgentModel(
        info_space=states,
        policy=policy or default_policy,
        info_update=lambda i, a, o: {o: 1.0},
        initial_info=lambda o: {o: 1.0},
    )
    return build_scm(model, [agent])


# -- contexts ---------------------------------------------------------------


def test_context_determinism():
    scm = synthetic()
    a, b = sample_context(scm, 7), sample_context(scm, 7)
    assert a == b
    for var in scm.endogenous_variables():
        size = len(scm.space_of(var))
        assert np.array_equal(a.block(var, size), b.block(var, size))


def test_contexts_for_different_seeds_differ():
    scm = synthetic()
    a, b = sample_context(scm, 1), sample_context(scm, 2)
    assert any(
        not np.array_equal(a.block(v, len(scm.space_of(v))), b.block(v, len(scm.space_of(v))))
        for v in scm.endogenous_variables()
    )


def test_gumbel_mean_is_euler_mascheroni():
    draws = [Context(s).gumbel(State(0), 0) for s in range(100_000)]
    assert abs(np.mean(draws) - np.euler_gamma) < 0.01


def test_noise_layout_is_time_major():
    scm = synthetic(horizon=2)
    layout = scm.noise_layout()
    assert [v for v, _ in layout] == [State(0), Obs(0), Info(0, 0), Action(0, 0), State(1), Obs(1), Info(0, 1), Action(0, 1)]
    assert dict(layout)[State(0)] == 3


# -- mechanisms -------------------------------------------------------------


def test_gumbel_max_marginal_chi_square():
    probs = {0: 0.5, 1: 0.3, 2: 0.2}
    model = DecPomdpModel(
        state_space=(0,),
        n_agents=1,
        action_spaces=[(0, 1, 2)],
        transition=lambda s, j: {0: 1.0},
        observation_spaces=[(0,)],
        observation=lambda s: {(0,): 1.0},
        horizon=1,
        initial={0: 1.0},
    )
    agent = AgentModel((0,), lambda i: probs, lambda i, a, o: {0: 1.0}, lambda o: {0: 1.0})
    scm = build_scm(model, [agent])
    n = 100_000
    counts = Counter(scm.g_action(0, 0, 0, Context(s)) for s in range(n))
    observed = [counts[k] for k in (0, 1, 2)]
    expected = [n * probs[k] for k in (0, 1, 2)]
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_uniform_binary_policy_frequency():
    scm = synthetic(policy=lambda i: {0: 0.5, 1: 0.5}, horizon=1)
    n = 100_000
    ones = sum(scm.g_action(0, 0, 0, Context(s)) for s in range(n))
    assert abs(ones / n - 0.5) < 0.01


def test_deterministic_row_ignores_noise():
    scm = synthetic(transition=lambda s, j: {(s + 1) % 3: 1.0})
    assert {scm.g_state(1, 0, (1,), Context(s)) for s in range(1000)} == {1}


def test_unnormalized_distribution_names_table():
    with pytest.raises(DistributionError, match="policy"):
        synthetic(policy=lambda i: {0: 0.7, 1: 0.7})


def test_agent_count_mismatch():
    scm = synthetic()
    with pytest.raises(ValueError):
        build_scm(scm.model, list(scm.agents) * 2)


# -- rollouts and interventions ---------------------------------------------


def test_full_override():
    scm = synthetic()
    forced = {Action(0, t): (t % 2) for t in range(scm.horizon)}
    traj = rollout(scm, Context(3), forced)
    assert traj.actions[0] == tuple(t % 2 for t in range(scm.horizon))


def test_intervention_outside_action_space():
    scm = synthetic()
    with pytest.raises(InterventionError):
        rollout(scm, Context(0), {Action(0, 0): 5})
    with pytest.raises(InterventionError):
        rollout(scm, Context(0), {State(1): 0})


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**63), t=st.integers(0, 2), value=st.integers(0, 1))
def test_intervention_locality(seed, t, value):
    scm = synthetic(horizon=3)
    ctx = Context(seed)
    actual = rollout(scm, ctx)
    cf = rollout(scm, ctx, {Action(0, t): value})
    assert cf.states[: t + 1] == actual.states[: t + 1]
    assert cf.info[0][: t + 1] == actual.info[0][: t + 1]
    assert cf.actions[0][:t] == actual.actions[0][:t]
    if value == actual.actions[0][t]:
        assert cf.states == actual.states and cf.actions == actual.actions


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**63))
def test_rollout_is_pure(seed):
    scm = synthetic()
    a = rollout(scm, Context(seed)).dumps()
    b = rollout(scm, Context(seed)).dumps()
    assert a == b


def test_trajectory_json_schema():
    traj = rollout(synthetic(), Context(11))
    data = json.loads(traj.dumps())
    assert set(data) == {"states", "observations", "info", "actions", "seed"}
    assert data["seed"] == 11
    assert len(data["actions"]) == 1 and len(data["actions"][0]) == 4


# -- events -----------------------------------------------------------------


def test_satisfies_forced_leaf_and_contradiction():
    scm = synthetic()
    ctx = Context(5)
    var = Action(0, 2)
    assert satisfies(scm, ctx, {var: 1}, Primitive(var, 1))
    ev = Primitive(State(0), rollout(scm, ctx).states[0])
    assert satisfies(scm, ctx, {}, ev)
    assert not satisfies(scm, ctx, {}, ev & ~ev)
    assert satisfies(scm, ctx, {}, ev | ~ev)


def test_unknown_predicate():
    with pytest.raises(UnknownPredicateError):
        satisfies(synthetic(), Context(0), {}, Predicate("nope"))


# -- counterfactual stability ------------------------------------------------


def test_stability_synthetic_mdp():
    assert check_counterfactual_stability(synthetic(), 10_000, 0) == 0


def test_stability_goofspiel4():
    assert check_counterfactual_stability(new_game(4).scm, 10_000, 1) == 0


def test_stability_deterministic_model():
    scm = synthetic(transition=lambda s, j: {(s + j[0]) % 3: 1.0})
    assert check_counterfactual_stability(scm, 500, 2) == 0


# -- causal graph -----------------------------------------------------------


def _edges(t, n):
    return {f"{p}->{c}" for p, c in causal_graph_edges(t, n)}


def test_graph_smallest_instance():
    assert _edges(1, 1) == {
        "U_{S_0}->S_0",
        "S_0->O_0",
        "U_{O_0}->O_0",
        "O_0->I_{1,0}",
        "U_{I_{1,0}}->I_{1,0}",
        "I_{1,0}->A_{1,0}",
        "U_{A_{1,0}}->A_{1,0}",
    }


def test_graph_two_steps():
    extra = _edges(2, 1) - _edges(1, 1)
    assert {"I_{1,0}->I_{1,1}", "A_{1,0}->I_{1,1}", "A_{1,0}->S_1", "S_0->S_1"} <= extra


@pytest.mark.parametrize("t,n", [(1, 1), (3, 2), (6, 2), (4, 3)])
def test_graph_endogenous_node_count(t, n):
    nodes = {x for e in causal_graph_edges(t, n) for x in e}
    assert len({x for x in nodes if not x.startswith("U_")}) == t * (2 + 2 * n)


def test_export_goofspiel_graph_parents():
    text = export_causal_graph(new_game(5).scm)
    assert text.endswith("\n") and "\r" not in text
    lines = text.splitlines()
    parents = {}
    for line in lines:
        p, c = line.split(" -> ")
        parents.setdefault(c, set()).add(p)
    assert parents["S_3"] == {"U_{S_3}", "S_2", "A_{1,2}", "A_{2,2}"}
    assert parents["I_{2,3}"] == {"U_{I_{2,3}}", "I_{2,2}", "A_{2,2}", "O_3"}
    assert parents["A_{1,0}"] == {"U_{A_{1,0}}", "I_{1,0}"}
    assert len([x for x in parents if not x.startswith("U_")]) == 6 * 6
