"""Degrees of responsibility from cause-witness pair sets.

CH takes, over all pairs, the best ratio ``m / k`` of the agent's cause
conjuncts to the pair's total size.  The weighted family averages
``m_c / k_c`` with weights ``b_c``, where ``k_c`` discounts the agent's own
contingency conjuncts so that an agent cannot dilute its share by making
extra actions necessary.  All arithmetic is exact.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from fractions import Fraction

from .causes import CauseSet, CauseWitnessPair, var_label

log = logging.getLogger(__name__)

CH, AC_W, ACCS, ACW, ACW_I = "CH", "AC", "ACCS", "ACW", "ACW-I"
METHODS = (CH, AC_W, ACCS, ACW, ACW_I)
WEIGHT_METHODS = (AC_W, ACCS, ACW, ACW_I)


class MissingImprovement(ValueError):
    pass


def _m(pair: CauseWitnessPair, agent: int) -> int:
    return sum(1 for v in pair.cause_vars if v.agent == agent)


def _w(pair: CauseWitnessPair, agent: int) -> int:
    return sum(1 for v in pair.contingency_vars if v.agent == agent)


def term(pair: CauseWitnessPair, agent: int) -> Fraction:
    """``m_c / k_c`` with ``k_c = |A| + |W| - w_c``."""
    return Fraction(_m(pair, agent), pair.size - _w(pair, agent))


def participates(cause_set: CauseSet, agent: int) -> bool:
    return any(_m(p, agent) for p in cause_set.pairs)


def ch_degree(cause_set: CauseSet, agent: int) -> Fraction:
    if not cause_set.pairs:
        log.warning("empty cause set: degree 0")
        return Fraction(0)
    return max(Fraction(_m(p, agent), p.size) for p in cause_set.pairs)


@dataclass(frozen=True)
class WeightVector:
    """Weights aligned with ``cause_set.pairs``."""

    weights: tuple
    owner: int

    def __post_init__(self):
        if any(b < 0 for b in self.weights):
            raise ValueError("weights must be nonnegative")


def weighted_degree(cause_set: CauseSet, weights: WeightVector, agent: int) -> Fraction:
    if len(weights.weights) != len(cause_set.pairs):
        raise ValueError("weight vector length does not match the cause set")
    total = sum(weights.weights, Fraction(0))
    if total == 0:
        raise ValueError("all-zero weight vector")
    if not participates(cause_set, agent):
        return Fraction(0)
    num = sum((Fraction(b) * term(p, agent) for b, p in zip(weights.weights, cause_set.pairs) if b), Fraction(0))
    return num / total


def _one_per_group(cause_set: CauseSet, agent: int, group) -> tuple:
    best: dict = {}
    for k, p in enumerate(cause_set.pairs):
        g = group(p)
        if g not in best or term(p, agent) > term(cause_set.pairs[best[g]], agent):
            best[g] = k
    chosen = set(best.values())
    return tuple(Fraction(int(k in chosen)) for k in range(len(cause_set.pairs)))


def weights_for(method: str, cause_set: CauseSet, agent: int) -> WeightVector:
    """``AC``: one maximizing pair per distinct cause; ``ACCS``: one per
    (cause, cf setting); ``ACW``: all ones; ``ACW-I``: the improvements."""
    if method == AC_W:
        b = _one_per_group(cause_set, agent, lambda p: p.cause)
    elif method == ACCS:
        b = _one_per_group(cause_set, agent, lambda p: (p.cause, p.cf))
    elif method == ACW:
        b = tuple(Fraction(1) for _ in cause_set.pairs)
    elif method == ACW_I:
        for p in cause_set.pairs:
            if p.improvement is None or p.improvement <= 0:
                raise MissingImprovement(f"pair {p.to_json()} has no positive improvement annotation")
        b = tuple(Fraction(p.improvement) for p in cause_set.pairs)
    else:
        raise ValueError(f"unknown weighting method {method!r}")
    return WeightVector(b, agent)


def degree(cause_set: CauseSet, method: str, agent: int) -> Fraction:
    if method == CH:
        return ch_degree(cause_set, agent)
    if not cause_set.pairs:
        log.warning("empty cause set: degree 0")
        return Fraction(0)
    return weighted_degree(cause_set, weights_for(method, cause_set, agent), agent)


def causeset_hash(cause_set: CauseSet) -> str:
    blob = json.dumps(cause_set.to_json(), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ResponsibilityProfile:
    method: str
    degrees: tuple
    source: str = ""

    def __post_init__(self):
        for d in self.degrees:
            if not 0 <= d <= 1:
                raise ValueError(f"degree {d} outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "degrees": {str(i): fraction_str(d) for i, d in enumerate(self.degrees)},
            "source_causeset_hash": self.source,
        }


def responsibility_profile(cause_set: CauseSet, method: str, n_agents: int) -> ResponsibilityProfile:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return ResponsibilityProfile(
        method,
        tuple(degree(cause_set, method, i) for i in range(n_agents)),
        causeset_hash(cause_set),
    )


def impact(before: ResponsibilityProfile, after: ResponsibilityProfile) -> Fraction:
    """Total absolute change of the agents' degrees."""
    if len(before.degrees) != len(after.degrees):
        raise ValueError("profiles cover different numbers of agents")
    return sum((abs(a - b) for a, b in zip(before.degrees, after.degrees)), Fraction(0))


def agent_labels(cause_set: CauseSet) -> list:
    return sorted({var_label(v) for p in cause_set.pairs for v in p.cause_vars})


__all__ = [
    "ACCS",
    "ACW",
    "ACW_I",
    "AC_W",
    "CH",
    "METHODS",
    "MissingImprovement",
    "ResponsibilityProfile",
    "WeightVector",
    "causeset_hash",
    "ch_degree",
    "degree",
    "fraction_str",
    "impact",
    "responsibility_profile",
    "term",
    "weighted_degree",
    "weights_for",
]
