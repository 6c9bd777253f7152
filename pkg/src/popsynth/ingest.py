"""Marginal-distribution input files and the person/household reconciliation.

Household-level data is treated as authoritative: :func:`clean` rewrites the
person marginal and age pyramid so that the persons implied by the household
table can actually be assembled into those households.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .apportion import bounded_allocation, largest_remainder
from .schema import (
    AGE_BIN_LABELS,
    AGE_RANGES,
    CHILD_RELS,
    COMPOSITIONS,
    MAX_AGE,
    MAX_SIZE,
    N_AGE_BINS,
    VALID_PERSON_CATEGORIES,
    FamilyType,
    HouseholdCategory,
    HouseholdComposition,
    HouseholdKind,
    PersonCategory,
    Rel,
    Sex,
    is_valid_household_category,
    is_valid_person_category,
    parse_age_bin,
    parse_size,
)

log = logging.getLogger(__name__)

PERSON_HEADER = ["sa2", "sex", "age_bin", "rel_status", "count"]
HOUSEHOLD_HEADER = ["sa2", "size", "composition", "count"]
AGE_HEADER = ["sa2", "age", "count"]

PERSON_FILE = "person_marginal.csv"
HOUSEHOLD_FILE = "household_marginal.csv"
AGE_FILE = "age_pyramid.csv"


class InputError(ValueError):
    """Base class for problems with input files or inconsistent inputs."""


class ParseError(InputError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ValidationError(InputError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class InconsistentInputError(InputError):
    pass


@dataclass
class PersonMarginal:
    sa2: str
    counts: dict[PersonCategory, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def get(self, cat: PersonCategory) -> int:
        return self.counts.get(cat, 0)

    def rel_total(self, rel: Rel, sex: Sex | None = None) -> int:
        return sum(n for c, n in self.counts.items()
                   if c.rel is rel and (sex is None or c.sex is sex))

    def bin_totals(self) -> list[int]:
        out = [0] * N_AGE_BINS
        for c, n in self.counts.items():
            out[c.age_bin] += n
        return out


@dataclass
class HouseholdMarginal:
    sa2: str
    counts: dict[HouseholdCategory, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def get(self, cat: HouseholdCategory) -> int:
        return self.counts.get(cat, 0)

    def count_kind(self, kind: HouseholdKind) -> int:
        return sum(n for c, n in self.counts.items() if c.composition.kind is kind)

    def primary_counts(self) -> dict[FamilyType, int]:
        out = {ft: 0 for ft in FamilyType}
        for c, n in self.counts.items():
            if c.composition.kind is HouseholdKind.FAMILY:
                out[c.composition.primary] += n
        return out


@dataclass
class AgePyramid:
    sa2: str
    counts: list[int] = field(default_factory=lambda: [0] * (MAX_AGE + 1))

    @property
    def total(self) -> int:
        return sum(self.counts)

    def bin_totals(self) -> list[int]:
        return [sum(self.counts[lo:hi + 1]) for lo, hi in AGE_RANGES]


@dataclass
class CleanReport:
    sa2: str
    person_total_before: int = 0
    person_total_after: int = 0
    implied_total: int = 0
    deltas: dict[PersonCategory, int] = field(default_factory=dict)
    age_deltas: dict[int, int] = field(default_factory=dict)
    rules: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.deltas and not self.age_deltas and not self.rules


# -- parsing -----------------------------------------------------------------

def _rows(path, header: list[str]) -> Iterable[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            log.warning("%s is empty", path)
            return
        if [h.strip() for h in first] != header:
            raise ParseError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, reader.line_num,
                                 f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [x.strip() for x in row]


def _count(path, line: int, text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise ParseError(path, line, f"count {text!r} is not an integer") from None
    if n < 0:
        raise ValidationError(path, line, f"negative count {n}")
    return n


def parse_person_marginal(path) -> dict[str, PersonMarginal]:
    out: dict[str, PersonMarginal] = {}
    for line, (sa2, sex, age_bin, rel, count) in _rows(path, PERSON_HEADER):
        try:
            cat = PersonCategory(Sex(sex), parse_age_bin(age_bin), Rel(rel))
        except ValueError as e:
            raise ParseError(path, line, str(e)) from None
        n = _count(path, line, count)
        if not is_valid_person_category(cat):
            if n:
                raise ValidationError(path, line, f"invalid person category {cat.label} "
                                                  f"has count {n}")
            continue
        m = out.setdefault(sa2, PersonMarginal(sa2))
        if n:
            m.counts[cat] = m.counts.get(cat, 0) + n
    return out


def parse_household_marginal(path) -> dict[str, HouseholdMarginal]:
    out: dict[str, HouseholdMarginal] = {}
    for line, (sa2, size, comp, count) in _rows(path, HOUSEHOLD_HEADER):
        try:
            cat = HouseholdCategory(parse_size(size), HouseholdComposition.parse(comp))
        except ValueError as e:
            raise ParseError(path, line, str(e)) from None
        n = _count(path, line, count)
        if not is_valid_household_category(cat):
            if n:
                raise ValidationError(path, line, f"invalid household category {cat.label} "
                                                  f"has count {n}")
            continue
        m = out.setdefault(sa2, HouseholdMarginal(sa2))
        if n:
            m.counts[cat] = m.counts.get(cat, 0) + n
    return out


def parse_age_pyramid(path) -> dict[str, AgePyramid]:
    out: dict[str, AgePyramid] = {}
    for line, (sa2, age, count) in _rows(path, AGE_HEADER):
        try:
            a = 100 if age == "100+" else int(age)
        except ValueError:
            raise ParseError(path, line, f"age {age!r} is not an integer") from None
        if not 0 <= a <= MAX_AGE:
            raise ValidationError(path, line, f"age {a} outside 0-{MAX_AGE}")
        n = _count(path, line, count)
        pyr = out.setdefault(sa2, AgePyramid(sa2))
        pyr.counts[a] += n
    return out


def write_person_marginals(path, marginals: Iterable[PersonMarginal]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERSON_HEADER)
        for m in sorted(marginals, key=lambda m: m.sa2):
            for cat in VALID_PERSON_CATEGORIES:
                n = m.counts.get(cat, 0)
                if n:
                    w.writerow([m.sa2, cat.sex.value, AGE_BIN_LABELS[cat.age_bin],
                                cat.rel.value, n])


def write_household_marginals(path, marginals: Iterable[HouseholdMarginal]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HOUSEHOLD_HEADER)
        for m in sorted(marginals, key=lambda m: m.sa2):
            for cat in sorted(m.counts, key=_household_sort_key):
                if m.counts[cat]:
                    w.writerow([m.sa2, cat.size_label, cat.composition.label, m.counts[cat]])


def write_age_pyramids(path, pyramids: Iterable[AgePyramid]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGE_HEADER)
        for p in sorted(pyramids, key=lambda p: p.sa2):
            for age, n in enumerate(p.counts):
                w.writerow([p.sa2, age, n])


def read_input_dir(directory) -> tuple[dict[str, PersonMarginal], dict[str, HouseholdMarginal],
                                       dict[str, AgePyramid]]:
    d = Path(directory)
    return (parse_person_marginal(d / PERSON_FILE), parse_household_marginal(d / HOUSEHOLD_FILE),
            parse_age_pyramid(d / AGE_FILE))


# -- reconciliation ----------------------------------------------------------

def _household_sort_key(cat: HouseholdCategory):
    return COMPOSITIONS.index(cat.composition), cat.size


def household_target_sizes(h: HouseholdMarginal, eight_plus_surplus: int = 0
                           ) -> list[tuple[HouseholdCategory, int]]:
    """Expand a household marginal into (category, member count) per household.

    Households come out in canonical category order. 8+ households hold 8
    persons each; ``eight_plus_surplus`` extra persons are dealt to them
    round-robin.
    """
    out = []
    for cat in sorted(h.counts, key=_household_sort_key):
        out.extend([(cat, cat.size)] * h.counts[cat])
    if eight_plus_surplus:
        big = [i for i, (cat, _) in enumerate(out) if cat.size >= MAX_SIZE]
        if big:
            for k in range(eight_plus_surplus):
                i = big[k % len(big)]
                out[i] = (out[i][0], out[i][1] + 1)
    return out


def implied_person_total(h: HouseholdMarginal, eight_plus_surplus: int = 0) -> int:
    total = sum(cat.size * n for cat, n in h.counts.items())
    if eight_plus_surplus and any(cat.size >= MAX_SIZE and n for cat, n in h.counts.items()):
        total += eight_plus_surplus
    return total


@dataclass(frozen=True)
class Requirements:
    """Person counts that a household marginal forces on the person marginal."""

    total: int
    lone: int
    group: int
    couples: int  # per sex
    one_parent: int
    couple_with_children: int
    other: int

    @classmethod
    def of(cls, h: HouseholdMarginal, eight_plus_surplus: int = 0) -> Requirements:
        lone = group = 0
        for cat, size in household_target_sizes(h, eight_plus_surplus):
            kind = cat.composition.kind
            if kind is HouseholdKind.LONE_PERSON:
                lone += 1
            elif kind is HouseholdKind.GROUP:
                group += size
        prim = h.primary_counts()
        return cls(
            total=implied_person_total(h, eight_plus_surplus),
            lone=lone,
            group=group,
            couples=prim[FamilyType.COUPLE_ONLY] + prim[FamilyType.COUPLE_WITH_CHILDREN],
            one_parent=prim[FamilyType.ONE_PARENT],
            couple_with_children=prim[FamilyType.COUPLE_WITH_CHILDREN],
            other=prim[FamilyType.OTHER_FAMILY],
        )


def clean_postcondition_violations(p: PersonMarginal, h: HouseholdMarginal,
                                   a: AgePyramid | None = None,
                                   eight_plus_surplus: int = 0) -> list[str]:
    """Names of the reconciliation constraints that ``p`` (and ``a``) break."""
    req = Requirements.of(h, eight_plus_surplus)
    males = p.rel_total(Rel.MARRIED, Sex.MALE)
    females = p.rel_total(Rel.MARRIED, Sex.FEMALE)
    lone_parents = p.rel_total(Rel.LONE_PARENT)
    children = sum(n for c, n in p.counts.items() if c.rel in CHILD_RELS)
    out = []
    if p.total != req.total:
        out.append("total_matches_households")
    if males != females:
        out.append("married_balanced")
    if males < req.couples:
        out.append("enough_couples")
    if p.rel_total(Rel.LONE_PERSON) != req.lone:
        out.append("lone_persons_match")
    if p.rel_total(Rel.GROUP_HOUSEHOLD) != req.group:
        out.append("group_members_match")
    if lone_parents < req.one_parent:
        out.append("enough_lone_parents")
    if children < req.couple_with_children + max(lone_parents, req.one_parent):
        out.append("enough_children")
    if p.rel_total(Rel.RELATIVE) < 2 * req.other:
        out.append("enough_relatives")
    if a is not None and a.bin_totals() != p.bin_totals():
        out.append("age_pyramid_matches_bins")
    return out


def _stratum_cells(rel_set, sex: Sex | None = None) -> list[PersonCategory]:
    return [c for c in VALID_PERSON_CATEGORIES
            if c.rel in rel_set and (sex is None or c.sex is sex)]


def _spread(p: PersonMarginal, cells: list[PersonCategory], total: int,
            out: dict[PersonCategory, int]) -> None:
    weights = [p.get(c) for c in cells]
    if total and not any(weights):
        # nothing observed in this stratum: borrow the area's sex-by-age shape
        shape = defaultdict(int)
        for c, n in p.counts.items():
            shape[c.sex, c.age_bin] += n
        weights = [shape[c.sex, c.age_bin] for c in cells]
    for c, n in zip(cells, largest_remainder(weights, total)):
        if n:
            out[c] = n


def clean(p: PersonMarginal, h: HouseholdMarginal, a: AgePyramid | None = None,
          eight_plus_surplus: int = 0) -> tuple[PersonMarginal, AgePyramid, CleanReport]:
    """Reconcile a person marginal (and age pyramid) to a household marginal.

    The household marginal is never modified. Lone-person and group-member
    counts are set to exactly what the households hold; the family strata
    (couples, lone parents with their first child, further children,
    relatives) share the remaining family-household places proportionally,
    each floored at what the household table requires. Cells within a
    stratum keep their relative sizes (largest-remainder rounding) and the
    age pyramid is rescaled bin by bin to the new bin totals.
    """
    if a is None:
        a = AgePyramid(p.sa2)
    report = CleanReport(p.sa2, person_total_before=p.total)
    if h.total == 0:
        if p.total:
            raise InconsistentInputError(
                f"SA2 {p.sa2}: household marginal is empty but the person marginal "
                f"holds {p.total} persons")
        report.person_total_after = 0
        return PersonMarginal(p.sa2, dict(p.counts)), AgePyramid(a.sa2, list(a.counts)), report

    req = Requirements.of(h, eight_plus_surplus)
    report.implied_total = req.total
    report.rules = clean_postcondition_violations(p, h, a, eight_plus_surplus)

    males = p.rel_total(Rel.MARRIED, Sex.MALE)
    females = p.rel_total(Rel.MARRIED, Sex.FEMALE)
    lone_parents = p.rel_total(Rel.LONE_PARENT)
    children = sum(n for c, n in p.counts.items() if c.rel in CHILD_RELS)
    relatives = p.rel_total(Rel.RELATIVE)

    family_places = req.total - req.lone - req.group
    couples, pairs, more_children, rels = bounded_allocation(
        weights=[max(males, females), lone_parents, max(children - lone_parents, 0), relatives],
        lower=[req.couples, req.one_parent, req.couple_with_children, 2 * req.other],
        units=[2, 2, 1, 1],
        total=family_places,
    )

    counts: dict[PersonCategory, int] = {}
    _spread(p, _stratum_cells({Rel.MARRIED}, Sex.MALE), couples, counts)
    _spread(p, _stratum_cells({Rel.MARRIED}, Sex.FEMALE), couples, counts)
    _spread(p, _stratum_cells({Rel.LONE_PARENT}), pairs, counts)
    _spread(p, _stratum_cells(CHILD_RELS), pairs + more_children, counts)
    _spread(p, _stratum_cells({Rel.RELATIVE}), rels, counts)
    _spread(p, _stratum_cells({Rel.LONE_PERSON}), req.lone, counts)
    _spread(p, _stratum_cells({Rel.GROUP_HOUSEHOLD}), req.group, counts)
    cleaned = PersonMarginal(p.sa2, counts)

    ages = list(a.counts)
    for b, target in enumerate(cleaned.bin_totals()):
        lo, hi = AGE_RANGES[b]
        for age, n in zip(range(lo, hi + 1), largest_remainder(a.counts[lo:hi + 1], target)):
            ages[age] = n
    pyramid = AgePyramid(a.sa2, ages)

    for c in set(p.counts) | set(counts):
        d = counts.get(c, 0) - p.get(c)
        if d:
            report.deltas[c] = d
    for age in range(MAX_AGE + 1):
        if ages[age] != a.counts[age]:
            report.age_deltas[age] = ages[age] - a.counts[age]
    report.person_total_after = cleaned.total
    return cleaned, pyramid, report


def write_clean_reports(path, reports: Iterable[CleanReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sa2", "kind", "key", "before", "after", "delta"])
        for r in sorted(reports, key=lambda r: r.sa2):
            w.writerow([r.sa2, "total", "persons", r.person_total_before, r.person_total_after,
                        r.person_total_after - r.person_total_before])
            for rule in r.rules:
                w.writerow([r.sa2, "rule", rule, "", "", ""])
            for cat in VALID_PERSON_CATEGORIES:
                if cat in r.deltas:
                    d = r.deltas[cat]
                    w.writerow([r.sa2, "person", cat.label.replace(",", "|"), "", "", d])
            for age in sorted(r.age_deltas):
                w.writerow([r.sa2, "age", age, "", "", r.age_deltas[age]])
