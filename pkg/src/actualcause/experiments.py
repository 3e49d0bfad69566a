"""Experiment harness: demo tables, property statistics and cause metrics.

Trajectories are identified by a context seed.  A batch is sampled
deterministically from a master seed; samples in which the agents win are
redrawn (and counted), since only the agents-do-not-win event is analyzed.
Per-trajectory work runs in a process pool; results come back in sampling
order so outputs are byte-stable.
"""

from __future__ import annotations

import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .causes import (
    AC,
    BF,
    DEFAULT_MAX_SIZE,
    DEFINITIONS,
    HP,
    CausalSetting,
    CauseSet,
    enumerate_all,
)
from .engine import Context, rollout
from .goofspiel import cf_improvement, game_log, new_game
from .micro import build_micro_env
from .properties import audit_property1, audit_property2, correct_property1, correct_property2
from .responsibility import METHODS, fraction_str, impact, responsibility_profile

GOOFSPIEL = "goofspiel"
ENVS = (GOOFSPIEL, "bogus-single", "bogus-duo")
DEMO_N = 5
DEMO_DECK = (5, 4, 3, 2, 1)
DEMO_SEED = 344
DEFAULT_NS = (4, 5, 6, 7, 8)
DEMO_DEFINITIONS = (AC, BF, HP)


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = GOOFSPIEL
    n: int = DEMO_N
    trajectories: int = 50
    seed: int = 0
    definitions: tuple = DEFINITIONS
    max_size: int = DEFAULT_MAX_SIZE
    methods: tuple = METHODS
    deck: tuple | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.env not in ENVS:
            raise ValueError(f"unknown env {self.env!r}")
        if self.trajectories < 0:
            raise ValueError("trajectory count must be nonnegative")
        if self.max_size < 1:
            raise ValueError("max_size must be at least 1")


def make_setting(env: str, n: int = DEMO_N, deck=None, seed: int = 0) -> CausalSetting:
    """Causal setting of one trajectory; micro environments ignore ``n``/``deck``/``seed``."""
    if env == GOOFSPIEL:
        g = new_game(n, deck)
        return CausalSetting(g.scm, Context(seed), g.event, cf_improvement)
    return build_micro_env(env.replace("-", "_")).setting()


def agent_count(env: str) -> int:
    return 1 if env == "bogus-single" else 2


def sample_seeds(n: int, count: int, seed: int, deck=None) -> tuple:
    """``count`` context seeds whose trajectories realize the event, plus the redraw count."""
    game = new_game(n, deck)
    rng = np.random.default_rng(seed)
    seeds, redraws = [], 0
    while len(seeds) < count:
        s = int(rng.integers(0, 2**62))
        setting = CausalSetting(game.scm, Context(s), game.event)
        if setting.holds(setting.actual):
            seeds.append(s)
        else:
            redraws += 1
    return seeds, redraws


def _pmap(fn, items, workers):
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------
# per-trajectory analyses (module-level so they pickle)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _median(xs):
    return statistics.median(xs) if xs else 0


def analyze_properties(job) -> list:
    """CSV rows for one trajectory: violation counts and correction impacts."""
    n, seed, deck, max_size, definitions, methods = job
    setting = make_setting(GOOFSPIEL, n, deck, seed)
    sets = enumerate_all(setting, max_size, tuple(definitions))
    rows = []
    for d in definitions:
        cs = sets[d]
        ce = audit_property1(setting, cs)
        acwm = audit_property2(setting, cs, cs)
        for rep in (ce, acwm):
            rows += [(n, seed, d, rep.prop, k, v) for k, v in rep.counts().items()]
        rows.append((n, seed, d, "CE", "violating_actions_pct", _fmt(100 * ce.n_violating_actions / (2 * n))))
        fixed = {"CE": correct_property1(setting, cs), "ACWM": correct_property2(setting, cs, cs)}
        for m in methods:
            before = responsibility_profile(cs, m, 2)
            for prop, after_set in fixed.items():
                after = responsibility_profile(after_set, m, 2)
                rows.append((n, seed, d, f"{prop}-impact", m, _fmt(impact(before, after))))
    return rows


def analyze_metrics(job) -> list:
    """CSV rows for one trajectory: distinct causes, cause sizes, improvements."""
    n, seed, deck, max_size, definitions, _ = job
    setting = make_setting(GOOFSPIEL, n, deck, seed)
    sets = enumerate_all(setting, max_size, tuple(definitions))
    rows = []
    for d in definitions:
        cs = sets[d]
        causes = cs.causes()
        sizes = [len(c) for c in causes]
        imps = [p.improvement for p in cs.pairs if p.improvement is not None]
        rows += [
            (n, seed, d, "metrics", "pairs", len(cs)),
            (n, seed, d, "metrics", "distinct_causes", len(causes)),
            (n, seed, d, "metrics", "median_cause_size", _fmt(float(_median(sizes)))),
            (n, seed, d, "metrics", "max_cause_size", max(sizes, default=0)),
            (n, seed, d, "metrics", "median_improvement", _fmt(float(_median(imps)))),
            (n, seed, d, "metrics", "min_improvement", min(imps, default=0)),
        ]
        for s in sizes:
            rows.append((n, seed, d, "cause_size", "size", s))
        for i in imps:
            rows.append((n, seed, d, "improvement", "value", i))
    return rows


def _jobs(cfg: ExperimentConfig, n: int):
    seeds, redraws = sample_seeds(n, cfg.trajectories, cfg.seed + n, cfg.deck)
    return [(n, s, cfg.deck, cfg.max_size, tuple(cfg.definitions), tuple(cfg.methods)) for s in seeds], redraws


def _run(cfg: ExperimentConfig, ns, fn) -> list:
    rows = []
    for n in ns:
        jobs, redraws = _jobs(cfg, n)
        rows.append((n, cfg.seed + n, "-", "sampling", "redraws", redraws))
        for r in _pmap(fn, jobs, cfg.workers):
            rows += r
    return rows


def cmd_properties(cfg: ExperimentConfig, ns=None) -> list:
    if cfg.env != GOOFSPIEL:
        raise ValueError("property statistics are defined for goofspiel only")
    return _run(cfg, ns or (cfg.n,), analyze_properties)


def cmd_metrics(cfg: ExperimentConfig, ns=None) -> list:
    if cfg.env != GOOFSPIEL:
        raise ValueError("metrics are defined for goofspiel only")
    return _run(cfg, ns or (cfg.n,), analyze_metrics)


def rows_where(rows, **match) -> list:
    """Values of the CSV rows whose named columns equal ``match``."""
    cols = ("N", "seed", "definition", "prop", "metric")
    out = []
    for r in rows:
        if all(r[cols.index(k)] == v for k, v in match.items()):
            out.append(float(r[5]))
    return out


# --------------------------------------------------------------------------
# single-trajectory commands


def cmd_causes(env: str, definition: str, n: int = DEMO_N, deck=None, seed: int = DEMO_SEED, max_size: int = DEFAULT_MAX_SIZE) -> CauseSet:
    setting = make_setting(env, n, deck, seed)
    setting.require_event()
    return enumerate_all(setting, max_size, (definition,))[definition]


def cmd_responsibility(env: str, definition: str, methods, n: int = DEMO_N, deck=None, seed: int = DEMO_SEED, max_size: int = DEFAULT_MAX_SIZE) -> list:
    cs = cmd_causes(env, definition, n, deck, seed, max_size)
    return [responsibility_profile(cs, m, agent_count(env)) for m in methods]


@dataclass
class DemoResult:
    seed: int
    deck: tuple
    log: dict
    tables: dict
    profiles: dict = field(default_factory=dict)
    impacts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "deck": list(self.deck),
            "game": self.log,
            "tables": {d: cs.to_json() for d, cs in self.tables.items()},
            "responsibility": {d: [p.to_json() for p in ps] for d, ps in self.profiles.items()},
            "correction_impact": {
                d: {prop: {m: fraction_str(v) for m, v in by_m.items()} for prop, by_m in per.items()}
                for d, per in self.impacts.items()
            },
        }

    def csv_rows(self) -> list:
        rows = [("definition", "row", "cause", "cf", "contingency", "improvement")]
        for d, cs in self.tables.items():
            for k, p in enumerate(cs.pairs):
                j = p.to_json()
                rows.append(
                    (
                        d,
                        k + 1,
                        " & ".join(f"{v}={x}" for v, x in j["cause"]),
                        ",".join(map(str, j["cf"])),
                        " & ".join(f"{v}={x}" for v, x in j["contingency"]),
                        j.get("improvement", ""),
                    )
                )
        return rows


def cmd_demo(seed: int = DEMO_SEED, n: int = DEMO_N, deck=DEMO_DECK, max_size: int = DEFAULT_MAX_SIZE, definitions=DEMO_DEFINITIONS) -> DemoResult:
    """The demo trajectory's cause tables and responsibility profiles."""
    deck = tuple(deck) if deck is not None else tuple(range(n, 0, -1))
    setting = make_setting(GOOFSPIEL, n, deck, seed)
    setting.require_event()
    sets = enumerate_all(setting, max_size, tuple(definitions))
    tables = {d: sets[d] for d in definitions}
    profiles = {d: [responsibility_profile(cs, m, 2) for m in METHODS] for d, cs in tables.items()}
    impacts = {}
    for d, cs in tables.items():
        fixed = {"CE": correct_property1(setting, cs), "ACWM": correct_property2(setting, cs, cs)}
        impacts[d] = {
            prop: {m: impact(responsibility_profile(cs, m, 2), responsibility_profile(f, m, 2)) for m in METHODS}
            for prop, f in fixed.items()
        }
    return DemoResult(seed, deck, game_log(setting.actual), tables, profiles, impacts)


def cmd_simulate(env: str, n: int, seed: int, count: int, deck=None) -> list:
    """Trajectory JSON strings for ``count`` contexts drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s = int(rng.integers(0, 2**62))
        setting = make_setting(env, n, deck, s)
        traj = rollout(setting.scm, Context(s) if env == GOOFSPIEL else setting.context)
        out.append(traj.dumps())
    return out


__all__ = [
    "BF",
    "DEMO_DECK",
    "DEMO_N",
    "DEMO_SEED",
    "DemoResult",
    "ENVS",
    "ExperimentConfig",
    "analyze_metrics",
    "analyze_properties",
    "cmd_causes",
    "cmd_demo",
    "cmd_metrics",
    "cmd_properties",
    "cmd_responsibility",
    "cmd_simulate",
    "make_setting",
    "rows_where",
    "sample_seeds",
]
