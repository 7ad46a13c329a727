"""Utility, explanation quality and demographic-parity evaluation."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from statistics import fmean
from typing import Any, Collection, Mapping, Sequence

from .errors import ConfigError, DataError
from .kg import InteractionLog
from .props import EtdContext, etd
from .rerank import ExplainedList

METRICS = ("ndcg", "lir", "sep", "etd", "eq")
FAIRNESS_METRICS = ("ndcg", "lir", "sep", "etd")
SIGNIFICANCE_LEVEL = 0.05


def ndcg_at_k(recommended: Sequence[str], test_items: Collection[str], k: int) -> float:
    """Binary-relevance NDCG with a log2 position discount."""
    if not test_items:
        return 0.0
    test = set(test_items)
    dcg = sum(1.0 / math.log2(i + 2) for i, p in enumerate(recommended[:k]) if p in test)
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, len(test))))
    return dcg / idcg


def list_explanation_metrics(lst: ExplainedList, ctx: EtdContext) -> tuple[float, float, float]:
    """Mean recency, mean popularity and type diversity of one explained list."""
    if not lst.items:
        return 0.0, 0.0, 0.0
    return fmean(it.lir for it in lst), fmean(it.sep for it in lst), etd(lst.types, ctx)


@dataclass(frozen=True)
class GroupSpec:
    """Binary sensitive attribute. ``order`` fixes which label is the first group."""

    attribute: str
    labels: Mapping[str, str]
    order: tuple[str, str] | None = None

    def __post_init__(self):
        found = sorted(set(self.labels.values()))
        order = tuple(self.order) if self.order else tuple(found)
        if len(order) != 2 or len(set(order)) != 2:
            raise ConfigError(f"attribute {self.attribute!r} needs exactly two group labels, got {list(order)}")
        extra = set(found) - set(order)
        if extra:
            raise ConfigError(f"labels {sorted(extra)} not in group order {list(order)}")
        object.__setattr__(self, "order", order)

    def members(self, label: str, users: Collection[str]) -> list[str]:
        return [u for u in users if self.labels.get(u) == label]

    def swapped(self) -> "GroupSpec":
        return GroupSpec(self.attribute, self.labels, (self.order[1], self.order[0]))


def group_delta(per_user_values: Mapping[str, float], groups: GroupSpec) -> float:
    """Mean over the first group minus mean over the second (sign kept)."""
    means = []
    for label in groups.order:
        vals = [v for u, v in per_user_values.items() if groups.labels.get(u) == label]
        if not vals:
            raise DataError(f"group {label!r} of {groups.attribute!r} has no evaluated users")
        means.append(fmean(vals))
    return means[0] - means[1]


def _average_ranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for m in range(i, j + 1):
            ranks[order[m]] = avg
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def chi2_sf_1df(x: float) -> float:
    """Survival function of a chi-square variable with one degree of freedom."""
    if x <= 0:
        return 1.0
    return math.erfc(math.sqrt(x / 2.0))


def kruskal_wallis(values_g1: Sequence[float], values_g2: Sequence[float]) -> tuple[float, float]:
    """Tie-corrected Kruskal-Wallis H for two groups and its chi-square p-value."""
    n1, n2 = len(values_g1), len(values_g2)
    if n1 == 0 or n2 == 0:
        raise DataError("Kruskal-Wallis needs at least one value per group")
    pooled = [float(v) for v in values_g1] + [float(v) for v in values_g2]
    n = n1 + n2
    ranks, ties = _average_ranks(pooled)
    correction = 1.0 - sum(t ** 3 - t for t in ties) / (n ** 3 - n)
    if correction <= 0:
        return 0.0, 1.0
    mid = (n + 1) / 2.0
    r1 = fmean(ranks[:n1])
    r2 = fmean(ranks[n1:])
    h = 12.0 / (n * (n + 1)) * (n1 * (r1 - mid) ** 2 + n2 * (r2 - mid) ** 2) / correction
    h = max(h, 0.0)
    p = max(chi2_sf_1df(h), sys.float_info.min)
    return h, p


@dataclass
class UserRecord:
    user: str
    group: str
    ndcg: float
    lir: float
    sep: float
    etd: float
    eq: float


@dataclass
class EvaluationReport:
    setting: str
    config: dict[str, Any]
    users: list[UserRecord]
    means: dict[str, float]
    group_means: dict[str, dict[str, float]] = field(default_factory=dict)
    deltas: dict[str, dict[str, Any]] = field(default_factory=dict)
    counts: dict[str, Any] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)

    def metric(self, name: str) -> dict[str, float]:
        return {r.user: getattr(r, name) for r in self.users}

    def to_dict(self) -> dict[str, Any]:
        return {
            "setting": self.setting,
            "config": self.config,
            "global": self.means,
            "groups": self.group_means,
            "deltas": self.deltas,
            "counts": self.counts,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["user", "group", *METRICS])
        for r in self.users:
            w.writerow([r.user, r.group, *(repr(getattr(r, m)) for m in METRICS)])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "EvaluationReport":
        return cls(
            setting=doc["setting"],
            config=dict(doc["config"]),
            users=[],
            means=dict(doc["global"]),
            group_means=dict(doc.get("groups", {})),
            deltas=dict(doc.get("deltas", {})),
            counts=dict(doc.get("counts", {})),
            metadata=dict(doc.get("metadata", {})),
        )


def build_report(
    lists: Mapping[str, ExplainedList],
    test: InteractionLog,
    groups: GroupSpec | None,
    ctx: EtdContext,
    setting: str,
    config: Mapping[str, Any] | None = None,
    metadata: Mapping[str, Any] | None = None,
) -> EvaluationReport:
    """Per-user metrics, global and per-group means, and group deltas with significance."""
    records: list[UserRecord] = []
    no_test = no_list = 0
    for user in sorted(lists):
        lst = lists[user]
        if not lst.items:
            no_list += 1
            continue
        held_out = test.products_of(user)
        if not held_out:
            no_test += 1
            continue
        lir, sep, div = list_explanation_metrics(lst, ctx)
        group = groups.labels.get(user, "") if groups else ""
        records.append(UserRecord(user, group, ndcg_at_k(lst.products, held_out, ctx.k), lir, sep, div, lir + sep + div))
    if not records:
        raise DataError(f"{setting}: no evaluable users (empty lists: {no_list}, empty test sets: {no_test})")

    means = {m: fmean(getattr(r, m) for r in records) for m in METRICS}
    counts: dict[str, Any] = {
        "evaluated": len(records),
        "excluded_empty_list": no_list,
        "excluded_empty_test": no_test,
    }
    report = EvaluationReport(setting, dict(config or {}), records, means, counts=counts, metadata=dict(metadata or {}))

    if groups is not None:
        grouped = [r for r in records if r.group in groups.order]
        counts["ungrouped"] = len(records) - len(grouped)
        counts["group_sizes"] = {g: sum(r.group == g for r in grouped) for g in groups.order}
        counts["group_order"] = list(groups.order)
        counts["attribute"] = groups.attribute
        for g in groups.order:
            members = [r for r in grouped if r.group == g]
            if not members:
                raise DataError(f"{setting}: group {g!r} has no evaluated users")
            report.group_means[g] = {m: fmean(getattr(r, m) for r in members) for m in METRICS}
        for m in FAIRNESS_METRICS:
            values = {r.user: getattr(r, m) for r in grouped}
            delta = group_delta(values, groups)
            h, p = kruskal_wallis(
                [getattr(r, m) for r in grouped if r.group == groups.order[0]],
                [getattr(r, m) for r in grouped if r.group == groups.order[1]],
            )
            report.deltas[m] = {"delta": delta, "H": h, "p": p, "significant": p < SIGNIFICANCE_LEVEL}
    return report
