"""Structural checks on a synthesized population.

:func:`check_population` returns human-readable violation strings; an empty
list means the population is structurally sound.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable

from ..ingest import HouseholdMarginal
from ..schema import (
    AGE_RANGES,
    CHILD_RELS,
    MAX_SIZE,
    PARENT_RELS,
    FamilyRecord,
    FamilyType,
    HouseholdKind,
    HouseholdRecord,
    PersonRecord,
    Rel,
    Sex,
    is_valid_household_category,
    is_valid_person_category,
)
from .heuristics import Heuristics


def family_violations(fam: FamilyRecord) -> list[str]:
    out = []
    rels = Counter(m.rel for m in fam.members)
    married_m = sum(1 for m in fam.members if m.rel is Rel.MARRIED and m.sex is Sex.MALE)
    married_f = rels[Rel.MARRIED] - married_m
    kids = sum(rels[r] for r in CHILD_RELS)
    ft = fam.family_type
    if fam.size < 2:
        out.append(f"{fam.id}: family has {fam.size} member")
    if ft in (FamilyType.COUPLE_ONLY, FamilyType.COUPLE_WITH_CHILDREN):
        if married_m != 1 or married_f != 1 or rels[Rel.LONE_PARENT]:
            out.append(f"{fam.id}: {ft.value} needs exactly one married male and female")
        if ft is FamilyType.COUPLE_ONLY and kids:
            out.append(f"{fam.id}: couple-only family has children")
    if ft in (FamilyType.COUPLE_WITH_CHILDREN, FamilyType.ONE_PARENT) and kids < 1:
        out.append(f"{fam.id}: {ft.value} has no child")
    if ft is FamilyType.ONE_PARENT and (rels[Rel.LONE_PARENT] != 1 or rels[Rel.MARRIED]):
        out.append(f"{fam.id}: one-parent family needs exactly one lone parent")
    if ft is FamilyType.OTHER_FAMILY:
        if rels[Rel.RELATIVE] < 2 or any(r in PARENT_RELS or r in CHILD_RELS for r in rels):
            out.append(f"{fam.id}: other family must be relatives only")
    if rels[Rel.GROUP_HOUSEHOLD] or rels[Rel.LONE_PERSON] or rels[None]:
        out.append(f"{fam.id}: family holds a non-family person")
    return out


def _gap_violations(fam: FamilyRecord, gaps: tuple[int, int]) -> list[str]:
    out = []
    for p in fam.parents():
        for c in fam.children():
            if p.age_years is None or c.age_years is None:
                continue
            gap = p.age_years - c.age_years
            if not gaps[0] <= gap <= gaps[1]:
                out.append(f"{fam.id}: parent {p.id} aged {p.age_years}, child {c.id} aged "
                           f"{c.age_years} (gap {gap})")
    return out


def household_violations(hh: HouseholdRecord) -> list[str]:
    out = []
    cat = hh.category
    comp = cat.composition
    n = len(hh.members)
    if not is_valid_household_category(cat):
        out.append(f"{hh.id}: invalid category {cat.label}")
    if (n != cat.size) if cat.size < MAX_SIZE else (n < MAX_SIZE):
        out.append(f"{hh.id}: {n} members in a size-{cat.size_label} household")
    if comp.kind is HouseholdKind.FAMILY:
        if len(hh.families) != comp.family_count:
            out.append(f"{hh.id}: {len(hh.families)} families, expected {comp.family_count}")
        if hh.families and hh.families[0].family_type is not comp.primary:
            out.append(f"{hh.id}: primary family is {hh.families[0].family_type.value}, "
                       f"expected {comp.primary.value}")
        in_families = Counter(id(m) for f in hh.families for m in f.members)
        if any(v != 1 for v in in_families.values()) or \
                set(in_families) != {id(m) for m in hh.members}:
            out.append(f"{hh.id}: members and family membership disagree")
        for i, fam in enumerate(hh.families[1:], 1):
            if fam.size > hh.families[i - 1].size:
                out.append(f"{hh.id}: family {i} larger than the one before it")
            if fam.n_children > hh.families[0].n_children:
                out.append(f"{hh.id}: family {i} has more children than the primary family")
            if fam.family_type is not FamilyType.OTHER_FAMILY and \
                    any(m.rel is Rel.RELATIVE for m in fam.members):
                out.append(f"{hh.id}: relative in non-primary family {i}")
    else:
        if hh.families:
            out.append(f"{hh.id}: non-family household holds families")
        want = Rel.LONE_PERSON if comp.kind is HouseholdKind.LONE_PERSON else Rel.GROUP_HOUSEHOLD
        if any(m.rel is not want for m in hh.members):
            out.append(f"{hh.id}: member of a {comp.kind.value} is not {want.value}")
    return out


def person_violations(person: PersonRecord) -> list[str]:
    out = []
    if None in (person.sex, person.age_bin, person.rel) or \
            not is_valid_person_category(person.category):
        out.append(f"{person.id}: invalid category {person.sex}/{person.age_bin}/{person.rel}")
    elif person.age_years is None:
        out.append(f"{person.id}: no age")
    else:
        lo, hi = AGE_RANGES[person.age_bin]
        if not lo <= person.age_years <= hi:
            out.append(f"{person.id}: age {person.age_years} outside bin {lo}-{hi}")
    return out


def link_violations(persons: Iterable[PersonRecord]) -> list[str]:
    by_id = {p.id: p for p in persons}
    out = []
    for p in by_id.values():
        if p.partner_id:
            q = by_id.get(p.partner_id)
            if q is None or q.partner_id != p.id or q.sex is p.sex or \
                    p.rel is not Rel.MARRIED or q.rel is not Rel.MARRIED:
                out.append(f"{p.id}: partner link to {p.partner_id} is not a symmetric couple")
        for attr, sex in (("father_id", Sex.MALE), ("mother_id", Sex.FEMALE)):
            pid = getattr(p, attr)
            if pid:
                q = by_id.get(pid)
                if q is None or q.sex is not sex or p.id not in q.children_ids:
                    out.append(f"{p.id}: {attr} {pid} does not list them as a child")
        for cid in p.children_ids:
            c = by_id.get(cid)
            if c is None or p.id not in (c.father_id, c.mother_id):
                out.append(f"{p.id}: child {cid} does not point back")
        for rid in p.relative_ids:
            r = by_id.get(rid)
            if r is None or p.id not in r.relative_ids:
                out.append(f"{p.id}: relative link to {rid} is one-sided")
    return out


def check_population(persons: list[PersonRecord], families: list[FamilyRecord],
                     households: list[HouseholdRecord], heuristics: Heuristics | None = None,
                     household_marginal: HouseholdMarginal | None = None) -> list[str]:
    """Every structural rule a finished population must satisfy.

    Covers conservation (each person in exactly one household, family
    households' members in exactly one family), category validity, ages
    inside bins, the parent-child age gap, couple symmetry, primary-family
    dominance, non-increasing family sizes and, when a household marginal is
    given, an exact match of household counts per category.
    """
    gaps = (heuristics or Heuristics()).gaps
    out = []
    ids = Counter(p.id for p in persons)
    out += [f"{pid}: duplicate person id" for pid, n in ids.items() if n > 1]
    placed = Counter(id(m) for hh in households for m in hh.members)
    for p in persons:
        k = placed.get(id(p), 0)
        if k != 1:
            out.append(f"{p.id}: in {k} households")
        out += person_violations(p)
    if len(placed) != len(persons) or sum(placed.values()) != len(persons):
        out.append("household members are not exactly the person list")
    hh_of_family = {id(f): hh for hh in households for f in hh.families}
    for fam in families:
        if id(fam) not in hh_of_family:
            out.append(f"{fam.id}: family not in any household")
        out += family_violations(fam)
        out += _gap_violations(fam, gaps)
    for hh in households:
        out += household_violations(hh)
    out += link_violations(persons)
    if household_marginal is not None:
        got = Counter(hh.category for hh in households)
        for cat in set(got) | set(household_marginal.counts):
            if got.get(cat, 0) != household_marginal.get(cat):
                out.append(f"household category {cat.label}: {got.get(cat, 0)} synthesized, "
                           f"{household_marginal.get(cat)} expected")
    return out
