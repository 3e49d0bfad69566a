"""Bogus-prevention micro environments.

``bogus_single``: one assassin can poison the victim's water at t=0 and t=1;
the victim dines at t=2.  Under the default ``"always"`` policy the assassin
poisons unless the water is already poisoned; ``"once"`` poisons at t=0 only.

``bogus_duo``: a bodyguard (agent 0) puts an antidote into the water or the
wine at t=0; an assassin (agent 1) sees where and poisons the other liquid at
t=1; the victim dines at t=2 and dies unless antidote and poison met.

The outcome is a state component, so the event of interest is the primitive
event ``S_2 = (2, "dead")``.  All dynamics are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import chain, combinations, product

from .engine import (
    Action,
    AgentModel,
    Context,
    DecPomdpModel,
    Primitive,
    ScmInstance,
    State,
    Trajectory,
    build_scm,
)
from .causes import AC, BF, HP, HP_MIN, CausalSetting, CauseSet, CauseWitnessPair

POISON, NOT_POISON = "poison", "not_poison"
WATER, WINE = "water", "wine"
DEAD, ALIVE = (2, "dead"), (2, "alive")
MICRO_ENVS = ("bogus_single", "bogus_duo")


@dataclass(frozen=True)
class MicroEnv:
    name: str
    model: DecPomdpModel
    agents: tuple
    scm: ScmInstance
    context: Context
    event: Primitive
    agent_names: tuple

    def setting(self) -> CausalSetting:
        return CausalSetting(self.scm, self.context, self.event, survival_gain)


def survival_gain(actual: Trajectory, counterfactual: Trajectory) -> int:
    """1 when the victim survives in the counterfactual world but not in the actual one."""
    return int(counterfactual.states[-1] == ALIVE) - int(actual.states[-1] == ALIVE)


def _point(x):
    return {x: 1.0}


def _bogus_single(policy: str) -> MicroEnv:
    states = [(0, "clean"), (1, "clean"), (1, "poisoned"), DEAD, ALIVE]

    def transition(s, joint):
        (a,) = joint
        t, label = s
        if t == 0:
            return _point((1, "poisoned" if a == POISON else "clean"))
        if t == 1:
            return _point(DEAD if label == "poisoned" or a == POISON else ALIVE)
        return _point(s)

    def observation(s):
        return _point(((s[0], s[1] == "poisoned"),))

    obs_space = [(t, f) for t in range(3) for f in (False, True)]
    if policy == "always":
        def pi(info):
            return _point(NOT_POISON if info[1] else POISON)
    elif policy == "once":
        def pi(info):
            return _point(POISON if info[0] == 0 else NOT_POISON)
    else:
        raise ValueError(f"unknown assassin policy {policy!r}")

    assassin = AgentModel(
        info_space=obs_space,
        policy=pi,
        info_update=lambda info, a, o: _point(o),
        initial_info=_point,
        name="Assassin",
    )
    model = DecPomdpModel(
        state_space=states,
        n_agents=1,
        action_spaces=[(POISON, NOT_POISON)],
        transition=transition,
        observation_spaces=[obs_space],
        observation=observation,
        horizon=3,
        initial=_point((0, "clean")),
    )
    scm = build_scm(model, [assassin], decision_variables=[Action(0, 0), Action(0, 1)])
    return MicroEnv("bogus_single", model, (assassin,), scm, Context(0), Primitive(State(2), DEAD), ("Assassin",))


def _bogus_duo() -> MicroEnv:
    states = [(0, "empty"), (1, WATER), (1, WINE), DEAD, ALIVE]

    def transition(s, joint):
        b, a = joint
        t, label = s
        if t == 0:
            return _point((1, b))
        if t == 1:
            return _point(ALIVE if a == label else DEAD)
        return _point(s)

    def observation(s):
        return _point((s, s))

    def bodyguard_pi(info):
        return _point(WATER)

    def assassin_pi(info):
        t, label = info
        if t == 1:
            return _point(WINE if label == WATER else WATER)
        return _point(WATER)

    agents = tuple(
        AgentModel(
            info_space=states,
            policy=pi,
            info_update=lambda info, a, o: _point(o),
            initial_info=_point,
            name=name,
        )
        for pi, name in ((bodyguard_pi, "Bodyguard"), (assassin_pi, "Assassin"))
    )
    model = DecPomdpModel(
        state_space=states,
        n_agents=2,
        action_spaces=[(WATER, WINE), (WATER, WINE)],
        transition=transition,
        observation_spaces=[states, states],
        observation=observation,
        horizon=3,
        initial=_point((0, "empty")),
    )
    scm = build_scm(model, agents, decision_variables=[Action(0, 0), Action(1, 1)])
    return MicroEnv("bogus_duo", model, agents, scm, Context(0), Primitive(State(2), DEAD), ("Bodyguard", "Assassin"))


def build_micro_env(name: str, policy: str = "always") -> MicroEnv:
    """Model, agent models and the canonical context of a micro environment.

    ``policy`` selects the assassin's policy in ``bogus_single``.
    """
    if name == "bogus_single":
        return _bogus_single(policy)
    if name == "bogus_duo":
        return _bogus_duo()
    raise ValueError(f"unknown micro environment {name!r}; expected one of {MICRO_ENVS}")


# --------------------------------------------------------------------------
# brute-force oracle: hand-written dynamics, definitions applied literally


def _simulate(name: str, forced: dict, policy: str = "always"):
    """Plain re-implementation of the stories.

    Returns ``(dies, info, natural)`` where ``info``/``natural`` map each
    decision variable to the information state seen and the action the
    policy would pick there.
    """
    a0, a1 = Action(0, 0), Action(0, 1)
    if name == "bogus_single":
        info0 = (0, False)
        nat0 = POISON
        act0 = forced.get(a0, nat0)
        poisoned = act0 == POISON
        info1 = (1, poisoned)
        if policy == "always":
            nat1 = NOT_POISON if poisoned else POISON
        else:
            nat1 = NOT_POISON
        act1 = forced.get(a1, nat1)
        dies = poisoned or act1 == POISON
        return dies, {a0: info0, a1: info1}, {a0: nat0, a1: nat1}
    b, a = Action(0, 0), Action(1, 1)
    info_b = (0, "empty")
    nat_b = WATER
    antidote = forced.get(b, nat_b)
    info_a = (1, antidote)
    nat_a = WINE if antidote == WATER else WATER
    poison = forced.get(a, nat_a)
    return poison != antidote, {b: info_b, a: info_a}, {b: nat_b, a: nat_a}


def _decision_vars(name):
    return [Action(0, 0), Action(0, 1)] if name == "bogus_single" else [Action(0, 0), Action(1, 1)]


def _values(name):
    return (POISON, NOT_POISON) if name == "bogus_single" else (WATER, WINE)


def _all_subsets(xs, lo=0):
    return chain.from_iterable(combinations(xs, k) for k in range(lo, len(xs) + 1))


def brute_force_pairs(name: str, definition: str, policy: str = "always") -> CauseSet:
    """Every cause-witness pair of ``definition``, by enumerating all action profiles."""
    dvars = _decision_vars(name)
    values = _values(name)
    dies, actual_info, actual_nat = _simulate(name, {}, policy)
    actual = dict(actual_nat)
    assert dies

    def flips(forced):
        return not _simulate(name, forced, policy)[0]

    def bf_flippable(vs):
        return any(flips(dict(zip(vs, c))) for c in product(values, repeat=len(vs)))

    def hp_witness(vs, cf, w):
        forced = dict(zip(vs, cf))
        forced.update({v: actual[v] for v in w})
        _, _, nat = _simulate(name, forced, policy)
        return flips(forced) and all(nat[v] != actual[v] for v in w)

    def hp_ok(vs):
        others = [v for v in dvars if v not in vs]
        return any(
            hp_witness(vs, cf, w) for w in _all_subsets(others) for cf in product(values, repeat=len(vs))
        )

    pairs = []
    for vs in _all_subsets(dvars, 1):
        cause = tuple((v, actual[v]) for v in vs)
        strict = list(_all_subsets(vs, 1))[:-1]
        for cf in product(values, repeat=len(vs)):
            if definition == BF:
                if flips(dict(zip(vs, cf))) and not any(bf_flippable(s) for s in strict):
                    pairs.append(CauseWitnessPair(cause, (), cf, BF))
            elif definition in (HP, HP_MIN):
                if any(hp_ok(s) for s in strict):
                    continue
                others = [v for v in dvars if v not in vs]
                for w in _all_subsets(others):
                    if not hp_witness(vs, cf, w):
                        continue
                    if definition == HP_MIN and any(hp_witness(vs, cf, s) for s in list(_all_subsets(w))[:-1]):
                        continue
                    pairs.append(CauseWitnessPair(cause, tuple((v, actual[v]) for v in w), cf, definition))
    if definition == AC:
        # literal AC1-AC3 over every (cause, contingency, a', w') split
        for union in _all_subsets(dvars, 1):
            strict = list(_all_subsets(union, 1))[:-1]
            if any(bf_flippable(s) for s in strict):
                continue
            for setting in product(values, repeat=len(union)):
                forced = dict(zip(union, setting))
                if not flips(forced):
                    continue
                _, info, _ = _simulate(name, forced, policy)
                for cvars in _all_subsets(union, 1):
                    wvars = [v for v in union if v not in cvars]
                    if all(info[v] == actual_info[v] for v in cvars) and all(
                        info[v] != actual_info[v] for v in wvars
                    ):
                        pairs.append(
                            CauseWitnessPair(
                                tuple((v, actual[v]) for v in cvars),
                                tuple((v, forced[v]) for v in wvars),
                                tuple(forced[v] for v in cvars),
                                AC,
                            )
                        )
    return CauseSet(definition, tuple(pairs), "victim dies", 0, len(dvars))
