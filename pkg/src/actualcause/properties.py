"""Audits for Counterfactual Eligibility (CE) and Actual Cause-Witness
Minimality (ACWM), plus the two correction procedures.

CE: every cause conjunct's agent must see the same information state in the
witness world as in the actual world.  ACWM: no other pair of the same
definition may use a strictly smaller set of cause-plus-contingency
variables.  Since cause values are always the realized ones, comparing
variable sets is enough.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

from .causes import (
    DEFAULT_MAX_SIZE,
    CausalSetting,
    CauseSet,
    CauseWitnessPair,
    enumerate_pairs,
    var_label,
)

log = logging.getLogger(__name__)

CE, ACWM = "CE", "ACWM"
CE_SUFFIX = "+CE"
CSV_COLUMNS = ("N", "seed", "definition", "prop", "metric", "value")


def property1_violations(setting: CausalSetting, pair: CauseWitnessPair) -> list:
    """Cause conjuncts whose information state changes in the witness world."""
    world = setting.world(pair.interventions())
    return [(v, x) for v, x in pair.cause if not setting.info_unchanged(world, v)]


def union_vars(pair: CauseWitnessPair) -> frozenset:
    return frozenset(pair.cause_vars) | frozenset(pair.contingency_vars)


def cause_contingency(pair: CauseWitnessPair) -> tuple:
    """The pair without its witness values: ``(A = a, W)``."""
    return (pair.cause, pair.contingency_vars)


def _reference(setting, cause_set, reference, max_size):
    if reference is not None:
        return reference
    return enumerate_pairs(setting, cause_set.definition, cause_set.max_size if max_size is None else max_size)


def _acwm_flags(cause_set: CauseSet, reference: CauseSet) -> list:
    ref = [(union_vars(q), i) for i, q in enumerate(reference.pairs)]
    out = []
    for p in cause_set.pairs:
        u = union_vars(p)
        out.append(tuple(i for uq, i in ref if uq < u))
    return out


@dataclass(frozen=True)
class ViolationReport:
    """Per-pair violations of one property over one cause set.

    ``violations[k]`` belongs to ``cause_set.pairs[k]``; for CE it lists the
    offending conjuncts, for ACWM indices into ``reference`` of pairs with a
    strictly smaller variable union.
    """

    prop: str
    cause_set: CauseSet
    violations: tuple
    reference: CauseSet | None = None

    @property
    def violating_pairs(self) -> list:
        return [p for p, v in zip(self.cause_set.pairs, self.violations) if v]

    @property
    def n_violating_pairs(self) -> int:
        return len(self.violating_pairs)

    @property
    def violating_actions(self) -> set:
        """Distinct action variables flagged (CE) or used by flagged pairs (ACWM)."""
        if self.prop == CE:
            return {v for vs in self.violations for v, _ in vs}
        return {v for p in self.violating_pairs for v in union_vars(p)}

    @property
    def n_violating_actions(self) -> int:
        return len(self.violating_actions)

    @property
    def n_cause_contingency(self) -> int:
        return len({cause_contingency(p) for p in self.cause_set.pairs})

    @property
    def n_violating_cause_contingency(self) -> int:
        return len({cause_contingency(p) for p in self.violating_pairs})

    def to_json(self) -> dict:
        out = self.cause_set.to_json()
        out["property"] = self.prop
        if self.prop == CE:
            out["violations"] = [[[var_label(v), x] for v, x in vs] for vs in self.violations]
        else:
            out["violations"] = [
                [self.reference.pairs[i].to_json() for i in idx] for idx in self.violations
            ]
        out["counts"] = self.counts()
        return out

    def counts(self) -> dict:
        return {
            "pairs": len(self.cause_set),
            "violating_pairs": self.n_violating_pairs,
            "violating_actions": self.n_violating_actions,
            "cause_contingency_pairs": self.n_cause_contingency,
            "violating_cause_contingency_pairs": self.n_violating_cause_contingency,
        }

    def csv_rows(self, n: int, seed) -> list:
        return [(n, seed, self.cause_set.definition, self.prop, k, v) for k, v in self.counts().items()]


def audit_property1(setting: CausalSetting, cause_set: CauseSet) -> ViolationReport:
    return ViolationReport(CE, cause_set, tuple(tuple(property1_violations(setting, p)) for p in cause_set.pairs))


def property2_violations(
    setting: CausalSetting,
    cause_set: CauseSet,
    reference: CauseSet | None = None,
    max_size: int | None = None,
) -> list:
    """Pairs of ``cause_set`` that some pair of ``reference`` undercuts.

    ``reference`` defaults to the full enumeration of the set's definition.
    """
    ref = _reference(setting, cause_set, reference, max_size)
    flags = _acwm_flags(cause_set, ref)
    return [p for p, f in zip(cause_set.pairs, flags) if f]


def audit_property2(
    setting: CausalSetting,
    cause_set: CauseSet,
    reference: CauseSet | None = None,
    max_size: int | None = None,
) -> ViolationReport:
    ref = _reference(setting, cause_set, reference, max_size)
    return ViolationReport(ACWM, cause_set, tuple(_acwm_flags(cause_set, ref)), ref)


def correct_property1(setting: CausalSetting, cause_set: CauseSet) -> CauseSet:
    """Move ineligible conjuncts into the contingency, keeping their cf value.

    Pairs left with an empty cause are dropped; the number dropped is kept
    in ``meta["ce_dropped"]``.
    """
    definition = cause_set.definition
    if not definition.endswith(CE_SUFFIX):
        definition += CE_SUFFIX
    out, dropped = [], 0
    for p in cause_set.pairs:
        bad = {v for v, _ in property1_violations(setting, p)}
        if not bad:
            out.append(CauseWitnessPair(p.cause, p.contingency, p.cf, definition, p.improvement))
            continue
        keep = [(c, x) for c, x in zip(p.cause, p.cf) if c[0] not in bad]
        if not keep:
            dropped += 1
            continue
        contingency = dict(p.contingency)
        for (v, _), x in zip(p.cause, p.cf):
            if v in bad:
                if v in contingency and contingency[v] != x:
                    log.info("moved conjunct %s overrides contingency value", var_label(v))
                contingency[v] = x
        out.append(
            CauseWitnessPair(
                tuple(c for c, _ in keep),
                tuple(sorted(contingency.items())),
                tuple(x for _, x in keep),
                definition,
                p.improvement,
            )
        )
    res = cause_set.replace(out, definition)
    res.meta["ce_dropped"] = dropped + cause_set.meta.get("ce_dropped", 0)
    return res


def correct_property2(
    setting: CausalSetting,
    cause_set: CauseSet,
    reference: CauseSet | None = None,
    max_size: int | None = None,
) -> CauseSet:
    """Drop every pair whose cause-plus-contingency variables are not minimal."""
    bad = {p.key for p in property2_violations(setting, cause_set, reference, max_size)}
    return cause_set.replace([p for p in cause_set.pairs if p.key not in bad])


def reports_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


__all__ = [
    "ACWM",
    "CE",
    "CSV_COLUMNS",
    "DEFAULT_MAX_SIZE",
    "ViolationReport",
    "audit_property1",
    "audit_property2",
    "correct_property1",
    "correct_property2",
    "property1_violations",
    "property2_violations",
    "reports_to_csv",
]
