"""Actual-cause definitions (BF, HP, HP-MIN, AC) and exhaustive enumeration.

Two independent routes are provided:

* checkers (``is_but_for_cause`` and friends) decide a single candidate pair
  by direct rollouts and brute-force minimality searches;
* :func:`enumerate_all` walks the tree of *canonical* intervention sets once
  and derives every definition's pair set from the flipping worlds it finds.

An intervention set is canonical when every forced action differs from the
action the agent's mechanism would have produced in that same world.  Any
other intervention set reaches the same world as one of its canonical
subsets, so minimal causes and effective contingencies only ever arise from
canonical sets.

HP contingencies must be *effective*: each frozen variable's forced (actual)
value must differ from the value its mechanism produces in the witness
world.  Freezing a variable to the value it would take anyway changes
nothing and is not reported as a separate witness.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from itertools import chain, combinations, product
from typing import Any, Callable, Iterable, Mapping, Sequence

from .engine import (
    Action,
    Context,
    Event,
    ScmInstance,
    Trajectory,
    VariableId,
    eval_event,
    rollout,
)

log = logging.getLogger(__name__)

BF, HP, HP_MIN, AC = "BF", "HP", "HP-MIN", "AC"
DEFINITIONS = (BF, HP, HP_MIN, AC)
DEFAULT_MAX_SIZE = 4


class EventNotRealized(Exception):
    """The event of interest does not hold in the actual world."""


class ContingencyNotActual(ValueError):
    """An HP contingency sets a variable to something other than its actual value."""


Assignment = tuple  # ((VariableId, value), ...)


def _sorted_assignment(items: Iterable) -> Assignment:
    return tuple(sorted(items, key=lambda kv: kv[0]))


def var_label(var: VariableId) -> str:
    return str(var)


_VAR_RE = re.compile(r"^A_\{(\d+),(\d+)\}$")


def parse_var(label: str) -> VariableId:
    m = _VAR_RE.match(label)
    if not m:
        raise ValueError(f"not an action variable label: {label!r}")
    return Action(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class CauseWitnessPair:
    """``(A = a, (W, w', a'))`` tagged with the definition that produced it."""

    cause: Assignment
    contingency: Assignment = ()
    cf: tuple = ()
    definition: str = AC
    improvement: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.cause:
            raise ValueError("cause must be nonempty")
        if len(self.cf) != len(self.cause):
            raise ValueError("cf setting must align with cause variables")
        cause_vars = {v for v, _ in self.cause}
        if cause_vars & {v for v, _ in self.contingency}:
            raise ValueError("cause and contingency variables overlap")
        if self.definition == BF and self.contingency:
            raise ValueError("but-for pairs have no contingency")

    @property
    def key(self) -> tuple:
        return (self.cause, self.contingency, self.cf)

    @property
    def cause_vars(self) -> tuple:
        return tuple(v for v, _ in self.cause)

    @property
    def contingency_vars(self) -> tuple:
        return tuple(v for v, _ in self.contingency)

    @property
    def size(self) -> int:
        return len(self.cause) + len(self.contingency)

    def interventions(self) -> dict:
        """The witness world ``[A <- a', W <- w']``."""
        out = {v: x for (v, _), x in zip(self.cause, self.cf)}
        out.update(dict(self.contingency))
        return out

    def sort_key(self):
        return (self.cause_vars, tuple(x for _, x in self.cause), self.cf, self.contingency)

    def to_json(self) -> dict:
        out = {
            "cause": [[var_label(v), x] for v, x in self.cause],
            "contingency": [[var_label(v), x] for v, x in self.contingency],
            "cf": list(self.cf),
        }
        if self.improvement is not None:
            out["improvement"] = self.improvement
        return out

    @classmethod
    def from_json(cls, data: Mapping, definition: str) -> "CauseWitnessPair":
        return cls(
            cause=tuple((parse_var(v), x) for v, x in data["cause"]),
            contingency=tuple((parse_var(v), x) for v, x in data["contingency"]),
            cf=tuple(data["cf"]),
            definition=definition,
            improvement=data.get("improvement"),
        )


@dataclass(frozen=True)
class CauseSet:
    definition: str
    pairs: tuple
    event: str = ""
    seed: int | None = None
    max_size: int = DEFAULT_MAX_SIZE
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        seen = {}
        for p in self.pairs:
            seen.setdefault(p.key, p)
        pairs = tuple(sorted(seen.values(), key=CauseWitnessPair.sort_key))
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def keys(self) -> set:
        return {p.key for p in self.pairs}

    def causes(self) -> list:
        """Distinct cause conjunctions, in canonical order."""
        return list(dict.fromkeys(p.cause for p in self.pairs))

    def replace(self, pairs: Iterable, definition: str | None = None) -> "CauseSet":
        return CauseSet(definition or self.definition, tuple(pairs), self.event, self.seed, self.max_size, dict(self.meta))

    def to_json(self) -> dict:
        return {
            "definition": self.definition,
            "event": self.event,
            "seed": self.seed,
            "max_size": self.max_size,
            "pairs": [p.to_json() for p in self.pairs],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "CauseSet":
        d = data["definition"]
        return cls(
            d,
            tuple(CauseWitnessPair.from_json(p, d) for p in data["pairs"]),
            data.get("event", ""),
            data.get("seed"),
            data.get("max_size", DEFAULT_MAX_SIZE),
        )


class CausalSetting:
    """A causal setting (SCM, context) with an event, memoizing rollouts.

    ``improvement(actual, counterfactual)`` is an optional environment
    functional attached to every enumerated pair.
    """

    def __init__(
        self,
        scm: ScmInstance,
        context: Context,
        event: Event,
        improvement: Callable[[Trajectory, Trajectory], int] | None = None,
    ):
        self.scm = scm
        self.context = context
        self.event = event
        self.improvement = improvement
        self._worlds: dict = {}
        self.actual = self.world({})

    def world(self, interventions: Mapping[VariableId, Any]) -> Trajectory:
        key = tuple(sorted(interventions.items()))
        traj = self._worlds.get(key)
        if traj is None:
            traj = rollout(self.scm, self.context, dict(key))
            self._worlds[key] = traj
        return traj

    def holds(self, traj: Trajectory) -> bool:
        return eval_event(self.event, traj, self.scm.predicates)

    def flips(self, interventions: Mapping[VariableId, Any]) -> bool:
        """``[interventions] not event`` in a physically valid world."""
        traj = self.world(interventions)
        return traj.valid and not self.holds(traj)

    def require_event(self) -> None:
        if not self.holds(self.actual):
            raise EventNotRealized(str(self.event))

    def actual_value(self, var: VariableId):
        return self.actual.value(var)

    def info_unchanged(self, traj: Trajectory, var: VariableId) -> bool:
        return traj.info[var.agent][var.t] == self.actual.info[var.agent][var.t]


def _subsets(items: Sequence, min_size: int = 1, max_size: int | None = None):
    hi = len(items) if max_size is None else min(max_size, len(items))
    return chain.from_iterable(combinations(items, k) for k in range(min_size, hi + 1))


def _realized(setting: CausalSetting, assignment: Assignment) -> bool:
    return all(setting.actual_value(v) == x for v, x in assignment)


def _effective(traj: Trajectory, frozen: Assignment) -> bool:
    return all(traj.natural_actions[v.agent][v.t] != x for v, x in frozen)


# --------------------------------------------------------------------------
# checkers


def _flippable(setting: CausalSetting, variables: Sequence[VariableId]) -> bool:
    values = [setting.scm.candidate_values(v) for v in variables]
    return any(setting.flips(dict(zip(variables, combo))) for combo in product(*values))


def is_but_for_cause(setting: CausalSetting, cause: Assignment, cf_setting: Sequence) -> bool:
    """BFC1-BFC3, with minimality searched over every strict subset and setting."""
    setting.require_event()
    cause = tuple(cause)
    if not cause or not _realized(setting, cause):
        return False
    variables = [v for v, _ in cause]
    if not setting.flips(dict(zip(variables, cf_setting))):
        return False
    for sub in _subsets(variables, 1, len(variables) - 1):
        if _flippable(setting, sub):
            return False
    return True


def _hp_witness(setting: CausalSetting, cause_vars, cf, contingency: Assignment) -> bool:
    iv = dict(zip(cause_vars, cf))
    iv.update(dict(contingency))
    traj = setting.world(iv)
    return traj.valid and not setting.holds(traj) and _effective(traj, contingency)


def _hp_satisfiable(setting: CausalSetting, cause_vars: Sequence[VariableId], max_size: int) -> bool:
    """Some witness (W frozen to actual values, a') flips the event for ``cause_vars``."""
    others = [v for v in setting.scm.decision_variables if v not in cause_vars]
    values = [setting.scm.candidate_values(v) for v in cause_vars]
    for w_vars in _subsets(others, 0, max_size - len(cause_vars)):
        contingency = tuple((v, setting.actual_value(v)) for v in w_vars)
        for combo in product(*values):
            if _hp_witness(setting, cause_vars, combo, contingency):
                return True
    return False


def _check_contingency_actual(setting: CausalSetting, contingency: Assignment) -> None:
    for v, x in contingency:
        if setting.actual_value(v) != x:
            raise ContingencyNotActual(f"{v}={x!r} but actual value is {setting.actual_value(v)!r}")


def is_hp_cause(
    setting: CausalSetting,
    cause: Assignment,
    contingency: Assignment,
    cf_setting: Sequence,
    max_size: int = DEFAULT_MAX_SIZE,
) -> bool:
    """Modified HP: HPC1, HPC2 with effective actual-valued contingency, HPC3 within budget."""
    _check_contingency_actual(setting, contingency)
    if not setting.holds(setting.actual):
        return False
    if not cause or not _realized(setting, cause):
        return False
    cause_vars = [v for v, _ in cause]
    if not _hp_witness(setting, cause_vars, tuple(cf_setting), tuple(contingency)):
        return False
    for sub in _subsets(cause_vars, 1, len(cause_vars) - 1):
        if _hp_satisfiable(setting, sub, max_size):
            return False
    return True


def is_hp_min_cause(
    setting: CausalSetting,
    cause: Assignment,
    contingency: Assignment,
    cf_setting: Sequence,
    max_size: int = DEFAULT_MAX_SIZE,
) -> bool:
    """HP plus minimality of the contingency for the same cause and cf setting."""
    if not is_hp_cause(setting, cause, contingency, cf_setting, max_size):
        return False
    cause_vars = [v for v, _ in cause]
    contingency = tuple(contingency)
    for sub in _subsets(contingency, 0, len(contingency) - 1):
        if _hp_witness(setting, cause_vars, tuple(cf_setting), sub):
            return False
    return True


def is_ac_cause(
    setting: CausalSetting,
    cause: Assignment,
    contingency: Assignment,
    cf_setting: Sequence,
) -> bool:
    """AC1 (cause and contingency jointly a but-for cause), AC2, AC3."""
    setting.require_event()
    if not cause:
        raise ValueError("cause must be nonempty")
    joint = sorted(
        [(v, setting.actual_value(v), x) for (v, _), x in zip(cause, cf_setting)]
        + [(v, setting.actual_value(v), x) for v, x in contingency],
        key=lambda r: r[0],
    )
    if not _realized(setting, cause):
        return False
    if not is_but_for_cause(setting, tuple((v, a) for v, a, _ in joint), tuple(x for _, _, x in joint)):
        return False
    iv = dict(zip([v for v, _ in cause], cf_setting))
    iv.update(dict(contingency))
    traj = setting.world(iv)
    if not all(setting.info_unchanged(traj, v) for v, _ in cause):
        return False
    return not any(setting.info_unchanged(traj, v) for v, _ in contingency)


def check_pair(setting: CausalSetting, pair: CauseWitnessPair, max_size: int = DEFAULT_MAX_SIZE) -> bool:
    """Dispatch to the checker of ``pair.definition``."""
    if pair.definition == BF:
        return not pair.contingency and is_but_for_cause(setting, pair.cause, pair.cf)
    if pair.definition == HP:
        return is_hp_cause(setting, pair.cause, pair.contingency, pair.cf, max_size)
    if pair.definition == HP_MIN:
        return is_hp_min_cause(setting, pair.cause, pair.contingency, pair.cf, max_size)
    if pair.definition == AC:
        return is_ac_cause(setting, pair.cause, pair.contingency, pair.cf)
    raise ValueError(f"unknown definition {pair.definition!r}")


def partition_butfor(
    setting: CausalSetting, butfor_cause: Assignment, cf_setting: Sequence
) -> CauseWitnessPair | None:
    """Split a but-for cause by whether each conjunct's information state survives."""
    iv = dict(zip([v for v, _ in butfor_cause], cf_setting))
    traj = setting.world(iv)
    stable, changed, cf = [], [], []
    for (v, a), x in zip(butfor_cause, cf_setting):
        if setting.info_unchanged(traj, v):
            stable.append((v, a))
            cf.append(x)
        else:
            changed.append((v, x))
    if not stable:
        log.info("but-for cause %s with setting %s has no stable part; no AC pair", butfor_cause, cf_setting)
        return None
    return CauseWitnessPair(tuple(stable), tuple(changed), tuple(cf), AC, _improvement(setting, traj))


def _improvement(setting: CausalSetting, traj: Trajectory):
    return None if setting.improvement is None else setting.improvement(setting.actual, traj)


# --------------------------------------------------------------------------
# enumeration


def canonical_flips(setting: CausalSetting, max_size: int) -> list:
    """All canonical intervention sets of size <= ``max_size`` that flip the event.

    Returns ``[(interventions, trajectory)]`` with interventions as a sorted
    tuple of ``(VariableId, value)``.  The search runs forward in time and
    branches at each decision variable into "follow the mechanism" or "force
    one of the other available values".
    """
    scm, ctx = setting.scm, setting.context
    n, T = scm.n_agents, scm.horizon
    decision = set(scm.decision_variables)
    cands = {v: scm.candidate_values(v) for v in decision}
    memo_s, memo_i, memo_a = {}, {}, {}
    states, observations = [], []
    info = [[] for _ in range(n)]
    actions = [[] for _ in range(n)]
    natural = [[] for _ in range(n)]
    forced: list = []
    found = []

    def g_state(t, prev, joint):
        key = (t, prev, joint)
        if key not in memo_s:
            memo_s[key] = scm.g_state(t, prev, joint, ctx)
        return memo_s[key]

    def g_info(i, t, prev_i, prev_a, o):
        key = (i, t, prev_i, prev_a, o)
        if key not in memo_i:
            memo_i[key] = scm.g_info(i, t, prev_i, prev_a, o, ctx)
        return memo_i[key]

    def g_action(i, t, ii):
        key = (i, t, ii)
        if key not in memo_a:
            memo_a[key] = scm.g_action(i, t, ii, ctx)
        return memo_a[key]

    def leaf():
        traj = Trajectory(
            tuple(states),
            tuple(observations),
            tuple(tuple(r) for r in info),
            tuple(tuple(r) for r in actions),
            tuple(tuple(r) for r in natural),
            tuple(sorted(forced)),
            True,
            ctx.seed,
        )
        if not setting.holds(traj):
            found.append((traj.interventions, traj))

    def step(t, prev_state, prev_joint, budget):
        if t == T:
            if forced:
                leaf()
            return
        s = g_state(t, prev_state, prev_joint)
        o = scm.g_obs(t, s, ctx)
        states.append(s)
        observations.append(o)
        options = []
        for i in range(n):
            ii = g_info(i, t, info[i][-1] if t else None, actions[i][-1] if t else None, o[i])
            nat = g_action(i, t, ii)
            info[i].append(ii)
            natural[i].append(nat)
            var = Action(i, t)
            opts = [(nat, False)]
            if var in decision and budget > 0:
                opts += [(v, True) for v in cands[var] if v != nat and scm.action_available(i, ii, v)]
            options.append(opts)
        for combo in product(*options):
            used = sum(f for _, f in combo)
            if used > budget:
                continue
            for i, (a, f) in enumerate(combo):
                actions[i].append(a)
                if f:
                    forced.append((Action(i, t), a))
            step(t + 1, s, tuple(a for a, _ in combo), budget - used)
            for i, (a, f) in enumerate(combo):
                actions[i].pop()
                if f:
                    forced.pop()
        for i in range(n):
            info[i].pop()
            natural[i].pop()
        states.pop()
        observations.pop()

    step(0, None, None, max_size)
    return found


def _minimal(var_sets: set) -> set:
    return {s for s in var_sets if not any(frozenset(sub) in var_sets for sub in _subsets(sorted(s), 1, len(s) - 1))}


def enumerate_all(setting: CausalSetting, max_size: int = DEFAULT_MAX_SIZE, definitions=DEFINITIONS) -> dict:
    """Pair sets for several definitions from a single canonical search."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    setting.require_event()
    flips = canonical_flips(setting, max_size)
    actual = setting.actual
    meta = {"hpc3_budget_bounded": True}
    out = {}

    def make(definition, pairs):
        return CauseSet(definition, tuple(pairs), str(setting.event), setting.context.seed, max_size, dict(meta))

    # but-for: minimal flipping variable sets, every flipping setting
    flip_sets = {frozenset(v for v, _ in iv) for iv, _ in flips}
    bf_min = _minimal(flip_sets)
    bf_pairs = []
    for iv, traj in flips:
        if frozenset(v for v, _ in iv) in bf_min:
            cause = tuple((v, actual.value(v)) for v, _ in iv)
            bf_pairs.append(CauseWitnessPair(cause, (), tuple(x for _, x in iv), BF, _improvement(setting, traj)))
    if BF in definitions:
        out[BF] = make(BF, bf_pairs)

    if HP in definitions or HP_MIN in definitions:
        candidates = []
        for iv, traj in flips:
            at_actual = [(v, x) for v, x in iv if actual.value(v) == x]
            for w in _subsets(at_actual, 0, len(iv) - 1):
                wset = set(w)
                a_part = [(v, x) for v, x in iv if (v, x) not in wset]
                cause = tuple((v, actual.value(v)) for v, _ in a_part)
                candidates.append((cause, tuple(w), tuple(x for _, x in a_part), traj))
        g_min = _minimal({frozenset(v for v, _ in c[0]) for c in candidates})
        hp_pairs = [
            CauseWitnessPair(cause, w, cf, HP, _improvement(setting, traj))
            for cause, w, cf, traj in candidates
            if frozenset(v for v, _ in cause) in g_min
        ]
        hp = make(HP, hp_pairs)
        if HP in definitions:
            out[HP] = hp
        if HP_MIN in definitions:
            keys = hp.keys()
            kept = [
                CauseWitnessPair(p.cause, p.contingency, p.cf, HP_MIN, p.improvement)
                for p in hp
                if not any((p.cause, sub, p.cf) in keys for sub in _subsets(p.contingency, 0, len(p.contingency) - 1))
            ]
            out[HP_MIN] = make(HP_MIN, kept)

    if AC in definitions:
        ac_pairs = []
        for p in bf_pairs:
            q = partition_butfor(setting, p.cause, p.cf)
            if q is not None:
                ac_pairs.append(q)
        out[AC] = make(AC, ac_pairs)
    return out


def enumerate_pairs(setting: CausalSetting, definition: str, max_size: int = DEFAULT_MAX_SIZE) -> CauseSet:
    """``H_D`` restricted to pairs with ``|A| + |W| <= max_size``."""
    if definition not in DEFINITIONS:
        raise ValueError(f"unknown definition {definition!r}")
    return enumerate_all(setting, max_size, (definition,))[definition]
