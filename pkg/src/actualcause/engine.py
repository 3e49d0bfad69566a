"""Dec-POMDP models compiled into Gumbel-Max structural causal models.

A :class:`DecPomdpModel` plus one :class:`AgentModel` per agent is turned into
an :class:`ScmInstance` by :func:`build_scm`.  Every endogenous variable
(``S_t``, ``O_t``, ``I_{i,t}``, ``A_{i,t}``) is computed as

    argmax_v  log p(v | parents) + U[v]

with ``U`` a block of i.i.d. Gumbel(0, 1) noise owned by that variable.  A
:class:`Context` fixes every noise block, so a (scm, context, interventions)
triple determines a unique :class:`Trajectory`.

Noise blocks are generated lazily from a counter-based hash of
``(seed, variable, value index)``.  This keeps blocks for huge implicit state
spaces (card games) cheap while remaining a pure function of the seed.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import struct
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

# Stand-in for log(0).  Any finite log-probability plus any Gumbel draw
# representable from a 64-bit uniform (|g| < 45) is far above this.
LOG_ZERO = -1e300
NORMALIZATION_TOL = 1e-9

Distribution = Mapping[Any, float]


class DistributionError(ValueError):
    """A probability table is malformed (not normalized, negative, empty)."""


class InterventionError(ValueError):
    """An intervention targets a non-action variable or an out-of-space value."""


class UnknownPredicateError(KeyError):
    """An event references a named predicate that was never registered."""


# --------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class FiniteSpace:
    """Explicitly enumerated finite set; noise is indexed by position."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "_pos", {v: k for k, v in enumerate(self.values)})

    def __contains__(self, value) -> bool:
        return value in self._pos

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator:
        return iter(self.values)

    def index(self, value) -> int:
        return self._pos[value]

    @property
    def enumerable(self) -> bool:
        return True


@dataclass(frozen=True)
class ImplicitSpace:
    """Finite set too large to list; membership is a predicate.

    Values must have a stable ``repr`` (ints, strings, tuples thereof), which
    serves as the noise index.
    """

    name: str
    contains: Callable[[Any], bool]
    size: int | None = None

    def __contains__(self, value) -> bool:
        return bool(self.contains(value))

    def __len__(self) -> int:
        if self.size is None:
            raise TypeError(f"implicit space {self.name!r} has no declared size")
        return self.size

    def index(self, value) -> str:
        return repr(value)

    @property
    def enumerable(self) -> bool:
        return False


Space = FiniteSpace | ImplicitSpace


def as_space(values) -> Space:
    if isinstance(values, (FiniteSpace, ImplicitSpace)):
        return values
    return FiniteSpace(tuple(values))


# --------------------------------------------------------------------------
# variables


class VariableId(NamedTuple):
    """Endogenous variable.  ``agent`` is -1 for state and observation kinds."""

    kind: str  # one of "S", "O", "I", "A"
    t: int
    agent: int = -1

    def __str__(self) -> str:
        if self.kind in ("S", "O"):
            return f"{self.kind}_{self.t}"
        return f"{self.kind}_{{{self.agent},{self.t}}}"


KINDS = ("S", "O", "I", "A")


def State(t: int) -> VariableId:
    return VariableId("S", t)


def Obs(t: int) -> VariableId:
    return VariableId("O", t)


def Info(agent: int, t: int) -> VariableId:
    return VariableId("I", t, agent)


def Action(agent: int, t: int) -> VariableId:
    return VariableId("A", t, agent)


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class DecPomdpModel:
    """Environment tuple (S, n, A, P, O, Omega, T, sigma).

    ``transition(s, joint_action)`` and ``observation(s)`` return dicts mapping
    values to probabilities; ``observation`` is over joint observations
    (tuples with one component per agent).
    """

    state_space: Space
    n_agents: int
    action_spaces: tuple
    transition: Callable[[Any, tuple], Distribution]
    observation_spaces: tuple
    observation: Callable[[Any], Distribution]
    horizon: int
    initial: Distribution
    joint_observation_space: Space | None = None

    def __post_init__(self):
        object.__setattr__(self, "state_space", as_space(self.state_space))
        object.__setattr__(self, "action_spaces", tuple(as_space(a) for a in self.action_spaces))
        object.__setattr__(
            self, "observation_spaces", tuple(as_space(o) for o in self.observation_spaces)
        )
        if self.joint_observation_space is None:
            spaces = self.observation_spaces
            if all(s.enumerable for s in spaces):
                joint = FiniteSpace(tuple(product(*(s.values for s in spaces))))
            else:
                joint = ImplicitSpace(
                    "joint_obs",
                    lambda o, spaces=spaces: len(o) == len(spaces)
                    and all(x in s for x, s in zip(o, spaces)),
                )
            object.__setattr__(self, "joint_observation_space", joint)
        else:
            object.__setattr__(self, "joint_observation_space", as_space(self.joint_observation_space))
        if self.n_agents < 1:
            raise ValueError("n_agents must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.action_spaces) != self.n_agents:
            raise ValueError("need one action space per agent")
        if len(self.observation_spaces) != self.n_agents:
            raise ValueError("need one observation space per agent")


@dataclass(frozen=True)
class AgentModel:
    """Agent model (info space, policy, info update, initial info).

    ``valid_actions(info)`` optionally restricts which actions are physically
    available in an information state (e.g. cards still in hand).  A
    trajectory in which an intervention forces an unavailable action is
    marked invalid rather than rejected.
    """

    info_space: Space
    policy: Callable[[Any], Distribution]
    info_update: Callable[[Any, Any, Any], Distribution]
    initial_info: Callable[[Any], Distribution]
    valid_actions: Callable[[Any], Iterable] | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "info_space", as_space(self.info_space))


def check_distribution(dist: Distribution, space: Space, table: str) -> None:
    if not dist:
        raise DistributionError(f"{table}: empty distribution")
    total = 0.0
    for value, p in dist.items():
        if p < 0:
            raise DistributionError(f"{table}: negative probability {p} for {value!r}")
        if value not in space:
            raise DistributionError(f"{table}: value {value!r} outside its declared space")
        total += p
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise DistributionError(f"{table}: probabilities sum to {total!r}, not 1")


# --------------------------------------------------------------------------
# contexts


def _gumbel_from_key(seed: int, key: str) -> float:
    digest = hashlib.blake2b(f"{seed}|{key}".encode(), digest_size=8).digest()
    (bits,) = struct.unpack("<Q", digest)
    u = (bits + 0.5) / 18446744073709551616.0
    return -math.log(-math.log(u))


class Context:
    """One setting of all exogenous noise variables.

    ``gumbel(var, index)`` returns component ``index`` of the noise block
    ``U_var``.  Components are counter-based draws keyed by
    ``(seed, var, index)``, so the value of any entry never depends on which
    other entries were requested before.  Materialized blocks
    (:meth:`block`) follow the documented time-major layout of
    :meth:`ScmInstance.noise_layout`.
    """

    __slots__ = ("seed", "_cache")

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._cache: dict = {}

    def gumbel(self, var: VariableId, index) -> float:
        key = (var, index)
        g = self._cache.get(key)
        if g is None:
            g = _gumbel_from_key(self.seed, f"{var.kind}:{var.t}:{var.agent}:{index!r}")
            self._cache[key] = g
        return g

    def block(self, var: VariableId, size: int) -> np.ndarray:
        return np.array([self.gumbel(var, k) for k in range(size)])

    def __eq__(self, other) -> bool:
        return isinstance(other, Context) and other.seed == self.seed

    def __hash__(self) -> int:
        return hash(("Context", self.seed))

    def __repr__(self) -> str:
        return f"Context(seed={self.seed})"


# --------------------------------------------------------------------------
# events


class Event:
    """Boolean formula over primitive events and named trajectory predicates."""

    def __and__(self, other: "Event") -> "Event":
        return And((self, other))

    def __or__(self, other: "Event") -> "Event":
        return Or((self, other))

    def __invert__(self) -> "Event":
        return Not(self)


@dataclass(frozen=True)
class Primitive(Event):
    var: VariableId
    value: Hashable

    def __str__(self):
        return f"{self.var}={self.value}"


@dataclass(frozen=True)
class Predicate(Event):
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not(Event):
    operand: Event

    def __str__(self):
        return f"not ({self.operand})"


@dataclass(frozen=True)
class And(Event):
    operands: tuple

    def __str__(self):
        return " and ".join(f"({o})" for o in self.operands)


@dataclass(frozen=True)
class Or(Event):
    operands: tuple

    def __str__(self):
        return " or ".join(f"({o})" for o in self.operands)


def eval_event(event: Event, trajectory: "Trajectory", predicates: Mapping[str, Callable] = None) -> bool:
    predicates = predicates or {}
    if isinstance(event, Primitive):
        return trajectory.value(event.var) == event.value
    if isinstance(event, Predicate):
        if event.name not in predicates:
            raise UnknownPredicateError(event.name)
        return bool(predicates[event.name](trajectory))
    if isinstance(event, Not):
        return not eval_event(event.operand, trajectory, predicates)
    if isinstance(event, And):
        return all(eval_event(o, trajectory, predicates) for o in event.operands)
    if isinstance(event, Or):
        return any(eval_event(o, trajectory, predicates) for o in event.operands)
    raise TypeError(f"not an event: {event!r}")


def event_predicates(event: Event) -> set:
    if isinstance(event, Predicate):
        return {event.name}
    if isinstance(event, Not):
        return event_predicates(event.operand)
    if isinstance(event, (And, Or)):
        return set().union(*(event_predicates(o) for o in event.operands))
    return set()


# --------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    observations: tuple
    info: tuple  # [agent][t]
    actions: tuple  # [agent][t]
    natural_actions: tuple  # [agent][t]: mechanism output, even where intervened
    interventions: tuple = ()
    valid: bool = True
    seed: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.states)

    def value(self, var: VariableId):
        if var.kind == "S":
            return self.states[var.t]
        if var.kind == "O":
            return self.observations[var.t]
        if var.kind == "I":
            return self.info[var.agent][var.t]
        if var.kind == "A":
            return self.actions[var.agent][var.t]
        raise ValueError(f"unknown variable kind {var.kind!r}")

    def joint_action(self, t: int) -> tuple:
        return tuple(a[t] for a in self.actions)

    def to_json(self) -> dict:
        return {
            "states": [_jsonable(s) for s in self.states],
            "observations": [_jsonable(o) for o in self.observations],
            "info": [[_jsonable(x) for x in row] for row in self.info],
            "actions": [[_jsonable(x) for x in row] for row in self.actions],
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def _jsonable(value):
    if isinstance(value, (tuple, list, frozenset, set)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [_jsonable(v) for v in items]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return value


# --------------------------------------------------------------------------
# the SCM


def gumbel_argmax(dist: Distribution, space: Space, var: VariableId, context: Context, table: str):
    check_distribution(dist, space, table)
    if len(dist) == 1:
        # degenerate row: every other entry sits at LOG_ZERO, noise cannot matter
        (value,) = dist
        return value
    best, best_score = None, -math.inf
    for value, p in dist.items():
        if p <= 0.0:
            score = LOG_ZERO
        else:
            score = math.log(p) + context.gumbel(var, space.index(value))
        if score > best_score:
            best, best_score = value, score
    return best


@dataclass(frozen=True)
class ScmInstance:
    """Gumbel-Max SCM of a Dec-POMDP under fixed agent models.

    ``decision_variables`` lists the action variables that count as choices
    for cause search (default: every action variable); ``intervention_values``
    optionally narrows the candidate counterfactual values per variable.
    ``predicates`` maps names to trajectory predicates usable in events.
    """

    model: DecPomdpModel
    agents: tuple
    decision_variables: tuple = ()
    predicates: Mapping[str, Callable] = field(default_factory=dict)
    intervention_values: Callable[[VariableId], Sequence] | None = None

    @property
    def horizon(self) -> int:
        return self.model.horizon

    @property
    def n_agents(self) -> int:
        return self.model.n_agents

    def candidate_values(self, var: VariableId) -> tuple:
        if self.intervention_values is not None:
            return tuple(self.intervention_values(var))
        return tuple(self.model.action_spaces[var.agent])

    # documented layout of exogenous noise
    def endogenous_variables(self) -> list:
        out = []
        for t in range(self.horizon):
            out.append(State(t))
            out.append(Obs(t))
            out.extend(Info(i, t) for i in range(self.n_agents))
            out.extend(Action(i, t) for i in range(self.n_agents))
        return out

    def space_of(self, var: VariableId) -> Space:
        if var.kind == "S":
            return self.model.state_space
        if var.kind == "O":
            return self.model.joint_observation_space
        if var.kind == "I":
            return self.agents[var.agent].info_space
        return self.model.action_spaces[var.agent]

    def noise_layout(self) -> list:
        """``[(U_var, dimension)]`` in time-major order; dimension None if not enumerable."""
        layout = []
        for var in self.endogenous_variables():
            space = self.space_of(var)
            layout.append((var, len(space) if space.enumerable else None))
        return layout

    # structural equations
    def g_state(self, t: int, prev_state, prev_joint_action, context: Context):
        var = State(t)
        if t == 0:
            dist = self.model.initial
            table = "initial state distribution"
        else:
            dist = self.model.transition(prev_state, prev_joint_action)
            table = f"transition P({prev_state!r}, {prev_joint_action!r})"
        return gumbel_argmax(dist, self.model.state_space, var, context, table)

    def g_obs(self, t: int, state, context: Context):
        dist = self.model.observation(state)
        return gumbel_argmax(
            dist, self.model.joint_observation_space, Obs(t), context, f"observation Omega({state!r})"
        )

    def g_info(self, agent: int, t: int, prev_info, prev_action, own_obs, context: Context):
        model = self.agents[agent]
        if t == 0:
            dist = model.initial_info(own_obs)
            table = f"initial info Z_{agent},0({own_obs!r})"
        else:
            dist = model.info_update(prev_info, prev_action, own_obs)
            table = f"info update Z_{agent}({prev_info!r}, {prev_action!r}, {own_obs!r})"
        return gumbel_argmax(dist, model.info_space, Info(agent, t), context, table)

    def g_action(self, agent: int, t: int, info, context: Context):
        dist = self.agents[agent].policy(info)
        return gumbel_argmax(
            dist, self.model.action_spaces[agent], Action(agent, t), context, f"policy pi_{agent}({info!r})"
        )

    def action_available(self, agent: int, info, action) -> bool:
        check = self.agents[agent].valid_actions
        return True if check is None else action in set(check(info))


def build_scm(
    model: DecPomdpModel,
    agents: Sequence[AgentModel],
    decision_variables: Iterable[VariableId] | None = None,
    predicates: Mapping[str, Callable] | None = None,
    intervention_values: Callable[[VariableId], Sequence] | None = None,
) -> ScmInstance:
    """Compile a Dec-POMDP and agent models into a Gumbel-Max SCM.

    Tables over enumerable spaces are validated eagerly; rows over implicit
    spaces are validated whenever a mechanism reads them.
    """
    agents = tuple(agents)
    if len(agents) != model.n_agents:
        raise ValueError(f"model declares {model.n_agents} agents but {len(agents)} agent models given")
    check_distribution(model.initial, model.state_space, "initial state distribution")
    if model.state_space.enumerable and all(a.enumerable for a in model.action_spaces):
        for s in model.state_space:
            for joint in product(*(a.values for a in model.action_spaces)):
                check_distribution(model.transition(s, joint), model.state_space, f"transition P({s!r}, {joint!r})")
    if model.state_space.enumerable:
        for s in model.state_space:
            check_distribution(model.observation(s), model.joint_observation_space, f"observation Omega({s!r})")
    for i, agent in enumerate(agents):
        if agent.info_space.enumerable:
            for info in agent.info_space:
                check_distribution(agent.policy(info), model.action_spaces[i], f"policy pi_{i}({info!r})")
    if decision_variables is None:
        decision_variables = [Action(i, t) for t in range(model.horizon) for i in range(model.n_agents)]
    decision_variables = tuple(sorted(decision_variables))
    for var in decision_variables:
        if var.kind != "A" or not (0 <= var.agent < model.n_agents) or not (0 <= var.t < model.horizon):
            raise ValueError(f"decision variable {var} is not an in-range action variable")
    return ScmInstance(model, agents, decision_variables, dict(predicates or {}), intervention_values)


def sample_context(scm: ScmInstance, seed: int) -> Context:
    """Context whose noise blocks are i.i.d. Gumbel(0, 1), determined by ``seed``."""
    return Context(seed)


def _check_interventions(scm: ScmInstance, interventions: Mapping[VariableId, Any]) -> None:
    for var, value in interventions.items():
        if var.kind != "A":
            raise InterventionError(f"only action variables can be intervened on, got {var}")
        if not (0 <= var.agent < scm.n_agents and 0 <= var.t < scm.horizon):
            raise InterventionError(f"{var} is out of range")
        if value not in scm.model.action_spaces[var.agent]:
            raise InterventionError(f"{value!r} is not in the action space of agent {var.agent}")


def rollout(scm: ScmInstance, context: Context, interventions: Mapping[VariableId, Any] | None = None) -> Trajectory:
    """Solve the structural equations forward in time under ``interventions``."""
    interventions = dict(interventions or {})
    _check_interventions(scm, interventions)
    n, T = scm.n_agents, scm.horizon
    states, observations = [], []
    info = [[] for _ in range(n)]
    actions = [[] for _ in range(n)]
    natural = [[] for _ in range(n)]
    valid = True
    state = joint = None
    for t in range(T):
        state = scm.g_state(t, state, joint, context)
        obs = scm.g_obs(t, state, context)
        states.append(state)
        observations.append(obs)
        joint = []
        for i in range(n):
            prev_info = info[i][-1] if t else None
            prev_action = actions[i][-1] if t else None
            ii = scm.g_info(i, t, prev_info, prev_action, obs[i], context)
            info[i].append(ii)
            nat = scm.g_action(i, t, ii, context)
            natural[i].append(nat)
            forced = interventions.get(Action(i, t), nat)
            if forced != nat and not scm.action_available(i, ii, forced):
                valid = False
            actions[i].append(forced)
            joint.append(forced)
        joint = tuple(joint)
    return Trajectory(
        tuple(states),
        tuple(observations),
        tuple(tuple(r) for r in info),
        tuple(tuple(r) for r in actions),
        tuple(tuple(r) for r in natural),
        tuple(sorted(interventions.items())),
        valid,
        context.seed,
    )


def satisfies(scm: ScmInstance, context: Context, interventions: Mapping[VariableId, Any] | None, event: Event) -> bool:
    """``(C, u) |= [interventions] event``."""
    missing = event_predicates(event) - set(scm.predicates)
    if missing:
        raise UnknownPredicateError(sorted(missing)[0])
    return eval_event(event, rollout(scm, context, interventions), scm.predicates)


# --------------------------------------------------------------------------
# diagnostics


def check_counterfactual_stability(scm: ScmInstance, trials: int, seed: int) -> int:
    """Count counterfactual-stability violations of the state mechanisms.

    Each trial draws a context, picks one action variable ``A_{i,t}`` with
    ``t < T-1`` and an alternative value, and compares the actual next state
    ``s_{t+1}`` with the counterfactual next state ``s'``.  A violation is
    ``s' != s_{t+1}`` although ``P'(s_{t+1})/P(s_{t+1}) >= P'(s')/P(s')``
    (cross-multiplied so zero probabilities need no special case).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    T, n = scm.horizon, scm.n_agents
    if T < 2:
        return 0
    rng = random.Random(seed)
    violations = 0
    for _ in range(trials):
        context = Context(rng.getrandbits(64))
        actual = rollout(scm, context)
        t = rng.randrange(T - 1)
        i = rng.randrange(n)
        values = [v for v in scm.model.action_spaces[i] if v != actual.actions[i][t]]
        if not values:
            continue
        alt = rng.choice(values)
        cf = rollout(scm, context, {Action(i, t): alt})
        s_t = actual.states[t]
        a_joint, b_joint = actual.joint_action(t), cf.joint_action(t)
        s_next, s_cf = actual.states[t + 1], cf.states[t + 1]
        if s_cf == s_next:
            continue
        p = scm.model.transition(s_t, a_joint)
        q = scm.model.transition(s_t, b_joint)
        if q.get(s_next, 0.0) * p.get(s_cf, 0.0) >= q.get(s_cf, 0.0) * p.get(s_next, 0.0):
            violations += 1
    return violations


def causal_graph_edges(horizon: int, n_agents: int, agent_offset: int = 1) -> list:
    """Parent edges of the structural equations, as ``(parent, child)`` labels.

    Agent indices in labels start at ``agent_offset`` (1 matches the usual
    drawing of the graph with agents ``1..n``).
    """

    def lab(kind, t, i=None):
        return f"{kind}_{t}" if i is None else f"{kind}_{{{i + agent_offset},{t}}}"

    edges = []
    for t in range(horizon):
        s, o = lab("S", t), lab("O", t)
        edges.append((f"U_{{{s}}}", s))
        if t > 0:
            edges.append((lab("S", t - 1), s))
            edges.extend((lab("A", t - 1, i), s) for i in range(n_agents))
        edges.append((s, o))
        edges.append((f"U_{{{o}}}", o))
        for i in range(n_agents):
            info, act = lab("I", t, i), lab("A", t, i)
            if t > 0:
                edges.append((lab("I", t - 1, i), info))
                edges.append((lab("A", t - 1, i), info))
            edges.append((o, info))
            edges.append((f"U_{{{info}}}", info))
            edges.append((info, act))
            edges.append((f"U_{{{act}}}", act))
    return edges


def export_causal_graph(scm: ScmInstance, agent_offset: int = 1) -> str:
    """Plain-text DAG: one ``parent -> child`` edge per line, LF endings."""
    edges = causal_graph_edges(scm.horizon, scm.n_agents, agent_offset)
    return "".join(f"{p} -> {c}\n" for p, c in edges)
