"""Similarity between expected (input) and observed (synthesized) distributions."""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import AgePyramid, HouseholdMarginal, PersonMarginal
from .schema import (
    MAX_AGE,
    VALID_HOUSEHOLD_CATEGORIES,
    VALID_PERSON_CATEGORIES,
    HouseholdCategory,
    HouseholdRecord,
    PersonRecord,
)

THRESHOLDS = (0.90, 0.99)
SPACES = ("person", "household", "age")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class CategoricalVector:
    labels: tuple
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) != len(self.values):
            raise MetricError(f"{len(self.labels)} labels for {len(self.values)} values")

    @classmethod
    def of(cls, labels: Sequence, values: Sequence[float]) -> CategoricalVector:
        return cls(tuple(labels), tuple(float(v) for v in values))

    @property
    def total(self) -> float:
        return sum(self.values)


def _aligned(o: CategoricalVector, e: CategoricalVector) -> None:
    if o.labels != e.labels:
        raise MetricError("observed and expected vectors have different labels")


def cosine_similarity(o: CategoricalVector, e: CategoricalVector) -> float:
    _aligned(o, e)
    if o.values == e.values and any(o.values):
        return 1.0
    no = math.sqrt(math.fsum(v * v for v in o.values))
    ne = math.sqrt(math.fsum(v * v for v in e.values))
    if no == 0.0 or ne == 0.0:
        raise MetricError("cosine similarity is undefined for a zero vector")
    cs = math.fsum(a * b for a, b in zip(o.values, e.values)) / (no * ne)
    return min(1.0, max(0.0, cs))


def freeman_tukey(o: CategoricalVector, e: CategoricalVector) -> tuple[float, int]:
    """Freeman-Tukey statistic 4 * sum (sqrt O - sqrt E)^2 with categories - 1 dof."""
    _aligned(o, e)
    stat = 4.0 * math.fsum((math.sqrt(a) - math.sqrt(b)) ** 2 for a, b in zip(o.values, e.values))
    return stat, len(o.values) - 1


def build_comparison(expected, observed, space: str
                     ) -> tuple[CategoricalVector, CategoricalVector]:
    """Observed and expected vectors over the valid categories of ``space``.

    ``expected`` is the input marginal for the space (a PersonMarginal,
    HouseholdMarginal or AgePyramid). ``observed`` is the synthesized persons
    (person and age spaces) or households (household space). Returns
    ``(observed, expected)``.
    """
    if space == "person":
        labels = VALID_PERSON_CATEGORIES
        got = Counter(p.category for p in observed)
        exp = [expected.get(c) for c in labels]
    elif space == "household":
        labels = VALID_HOUSEHOLD_CATEGORIES
        got = Counter(_household_category(h) for h in observed)
        exp = [expected.get(c) for c in labels]
    elif space == "age":
        labels = tuple(range(MAX_AGE + 1))
        got = Counter(p.age_years for p in observed)
        exp = list(expected.counts)
    else:
        raise MetricError(f"unknown space {space!r}")
    return (CategoricalVector.of(labels, [got.get(c, 0) for c in labels]),
            CategoricalVector.of(labels, exp))


def _household_category(h) -> HouseholdCategory:
    return h.category if isinstance(h, HouseholdRecord) else h


@dataclass
class SpaceResult:
    sa2: str
    space: str
    categories: int
    cosine: float | None  # None when either vector is empty
    ft_statistic: float
    expected_total: float
    observed_total: float

    @property
    def skipped(self) -> bool:
        return self.cosine is None


def compare(sa2: str, expected, observed, space: str) -> SpaceResult:
    o, e = build_comparison(expected, observed, space)
    ft, _ = freeman_tukey(o, e)
    try:
        cs = cosine_similarity(o, e)
    except MetricError:
        cs = None
    return SpaceResult(sa2, space, len(o.labels), cs, ft, e.total, o.total)


def compare_sa2(sa2: str, p: PersonMarginal, h: HouseholdMarginal, a: AgePyramid,
                persons: Iterable[PersonRecord], households: Iterable[HouseholdRecord]
                ) -> list[SpaceResult]:
    persons = list(persons)
    return [compare(sa2, p, persons, "person"), compare(sa2, h, list(households), "household"),
            compare(sa2, a, persons, "age")]


REPORT_HEADER = ["sa2", "space", "categories", "cosine", "ft_statistic", "expected_total",
                 "observed_total"]


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)


def write_report(path, results: Iterable[SpaceResult]) -> list[dict]:
    """Write per-SA2 results and a summary next to them; returns the summary rows.

    The summary goes to ``<stem>_summary.csv`` and counts, per space, the
    SA2s at or above each cosine threshold.
    """
    results = sorted(results, key=lambda r: (r.sa2, SPACES.index(r.space)))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in results:
            w.writerow([r.sa2, r.space, r.categories,
                        "skipped" if r.skipped else f"{r.cosine:.12f}",
                        f"{r.ft_statistic:.6f}", _num(r.expected_total), _num(r.observed_total)])
    summary = summarize(results)
    path = Path(path)
    with open(path.with_name(path.stem + "_summary.csv"), "w", newline="",
              encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(summary[0]) if summary else ["space"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(summary)
    return summary


def summarize(results: Iterable[SpaceResult]) -> list[dict]:
    results = list(results)
    rows = []
    for space in SPACES:
        rs = [r for r in results if r.space == space]
        scored = [r for r in rs if not r.skipped]
        row = {"space": space, "sa2s": len(rs), "skipped": len(rs) - len(scored)}
        for t in THRESHOLDS:
            row[f"cosine_ge_{t:.2f}"] = sum(1 for r in scored if r.cosine >= t)
        row["expected_total"] = _num(sum(r.expected_total for r in rs))
        row["observed_total"] = _num(sum(r.observed_total for r in rs))
        rows.append(row)
    return rows
