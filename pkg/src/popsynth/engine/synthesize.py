"""Run all assembly stages for one SA2 and link the result."""

from __future__ import annotations

import hashlib
import random
import time
from typing import NamedTuple

from ..ingest import AgePyramid, HouseholdMarginal, InconsistentInputError, PersonMarginal
from ..ingest import clean_postcondition_violations
from ..schema import FamilyRecord, HouseholdRecord, PersonRecord, Rel, Sex
from . import stages
from .ages import assign_ages
from .heuristics import Heuristics
from .pools import FeasibilityError, PoolSet, SynthesisReport


class Population(NamedTuple):
    persons: list[PersonRecord]
    families: list[FamilyRecord]
    households: list[HouseholdRecord]
    report: SynthesisReport


def sa2_rng(seed: int, sa2: str) -> random.Random:
    """Generator for one SA2, independent of which other SA2s run or in what order."""
    digest = hashlib.sha256(f"{seed}\x00{sa2}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def link_family(family: FamilyRecord) -> None:
    parents = family.parents()
    kids = family.children()
    relatives = [m for m in family.members if m.rel is Rel.RELATIVE]
    if len(parents) == 2:
        a, b = parents
        a.partner_id, b.partner_id = b.id, a.id
    for p in parents:
        p.children_ids = [c.id for c in kids]
    for c in kids:
        for p in parents:
            if p.sex is Sex.MALE:
                c.father_id = p.id
            else:
                c.mother_id = p.id
    if relatives:
        # relatives are linked both ways to every other member of their family
        for r in relatives:
            r.relative_ids = [m.id for m in family.members if m is not r]
        rel_ids = [r.id for r in relatives]
        for m in family.members:
            if m.rel is not Rel.RELATIVE:
                m.relative_ids = list(rel_ids)


def finalize(pools: PoolSet, households: list[HouseholdRecord]) -> Population:
    families = []
    for hh in households:
        for fam in hh.families:
            fam.id = f"{pools.sa2}:F{len(families)}"
            fam.household_id = hh.id
            families.append(fam)
            for m in fam.members:
                m.family_id = fam.id
            link_family(fam)
        for m in hh.members:
            m.household_id = hh.id
    return Population(pools.persons, families, households, pools.report)


STAGE_ORDER = (
    "create_persons", "form_one_parent_units", "form_couples", "form_couple_with_child_units",
    "form_other_family_units", "create_households", "fill_lone_and_group",
    "assign_primary_families", "assign_leftover_one_parent_units", "assign_leftover_couples",
    "fill_remaining_nonprimary", "complete_with_children", "convert_leftovers_to_extras",
    "fill_with_extras", "fill_with_relatives", "assign_ages",
)


def synthesize_sa2(p: PersonMarginal, h: HouseholdMarginal, pyramid: AgePyramid | None = None,
                   heuristics: Heuristics | None = None) -> Population:
    """Build the persons, families and households of one SA2.

    Inputs must already be cleaned. Feasibility errors carry the SA2 code
    and the stage that raised them.
    """
    heuristics = heuristics or Heuristics()
    sa2 = h.sa2
    broken = clean_postcondition_violations(p, h, None, heuristics.eight_plus_surplus)
    if broken:
        raise InconsistentInputError(f"SA2 {sa2}: inputs are not cleaned ({', '.join(broken)})")
    start = time.perf_counter()
    rng = sa2_rng(heuristics.rng_seed, sa2)
    stage = STAGE_ORDER[0]
    try:
        pools = stages.create_persons(p, h, heuristics)
        stage = "form_one_parent_units"
        stages.form_one_parent_units(pools, heuristics)
        stage = "form_couples"
        stages.form_couples(pools, heuristics)
        stage = "form_couple_with_child_units"
        stages.form_couple_with_child_units(pools, h, heuristics, rng)
        stage = "form_other_family_units"
        stages.form_other_family_units(pools, h, rng)
        stage = "create_households"
        stages.create_households(pools, h, heuristics)
        households = list(pools.incomplete_households)
        stage = "fill_lone_and_group"
        stages.fill_lone_and_group(pools, rng)
        stage = "assign_primary_families"
        stages.assign_primary_families(pools, heuristics, rng)
        stage = "assign_leftover_one_parent_units"
        stages.assign_leftover_one_parent_units(pools, rng)
        stage = "assign_leftover_couples"
        stages.assign_leftover_couples(pools, heuristics, rng)
        stage = "fill_remaining_nonprimary"
        if any(hh.family_slots > 0 for hh in pools.incomplete_households):
            rho = stages.compute_rho(h)
            stages.fill_remaining_nonprimary(pools, rho, p, heuristics, rng)
        stage = "complete_with_children"
        stages.complete_with_children(pools, heuristics, rng)
        stage = "convert_leftovers_to_extras"
        stages.convert_leftovers_to_extras(pools)
        stage = "fill_with_extras"
        stages.fill_with_extras(pools, p, heuristics, rng)
        stage = "fill_with_relatives"
        stages.fill_with_relatives(pools, rng)
        left = pools.pooled_count()
        if left:
            raise FeasibilityError(f"{left} persons could not be placed in any household")
        stage = "assign_ages"
        counts = pyramid.counts if pyramid is not None else [0] * 101
        assign_ages(households, counts, heuristics, rng, pools.report)
    except FeasibilityError as exc:
        exc.stage = exc.stage or stage
        exc.sa2 = exc.sa2 or sa2
        raise
    pop = finalize(pools, households)
    pools.report.elapsed_ms = (time.perf_counter() - start) * 1000.0
    return pop
