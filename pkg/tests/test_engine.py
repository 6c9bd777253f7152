from collections import Counter

import pytest

from popsynth.engine import (
    FeasibilityError,
    Heuristics,
    check_population,
    sa2_rng,
    synthesize_sa2,
)
from popsynth.engine.stages import compute_rho
from popsynth.ingest import InconsistentInputError, clean
from popsynth.io import render_population
from popsynth.oracle import Marginals, OracleParams, generate_sa2, perturb_marginals
from popsynth.schema import FamilyType

from conftest import hm, pm


def test_oracle_population_is_valid(truths):
    for t in truths:
        pop = t.population
        assert check_population(pop.persons, pop.families, pop.households,
                                household_marginal=t.households) == []


def test_synthesis_invariants_and_exact_match(truths):
    for t in truths:
        pop = synthesize_sa2(t.persons, t.households, t.ages)
        assert check_population(pop.persons, pop.families, pop.households,
                                household_marginal=t.households) == []
        assert len(pop.persons) == t.persons.total


def test_same_seed_same_output(truths):
    t = truths[0]
    h = Heuristics(rng_seed=5)
    a = render_population(synthesize_sa2(t.persons, t.households, t.ages, h))
    b = render_population(synthesize_sa2(t.persons, t.households, t.ages, h))
    c = render_population(synthesize_sa2(t.persons, t.households, t.ages, Heuristics(rng_seed=6)))
    assert a == b
    assert a != c


def test_sa2_rng_independent_of_order():
    assert sa2_rng(1, "A").random() == sa2_rng(1, "A").random()
    assert sa2_rng(1, "A").random() != sa2_rng(1, "B").random()


def test_perturbed_inputs_after_cleaning():
    for i in range(10):
        t = generate_sa2(f"3{i:08d}", OracleParams(households=200), seed=i)
        m = perturb_marginals(Marginals(t.persons, t.households, t.ages), 0.05, seed=i)
        p, a, _ = clean(m.persons, m.households, m.ages)
        pop = synthesize_sa2(p, t.households, a, Heuristics(rng_seed=i))
        assert check_population(pop.persons, pop.families, pop.households,
                                household_marginal=t.households) == []


def test_unclean_inputs_rejected():
    p = pm({("Male", "25-39", "LonePerson"): 3})
    h = hm({(1, "LonePersonHH"): 2})
    with pytest.raises(InconsistentInputError):
        synthesize_sa2(p, h)


def test_feasibility_error_names_stage():
    # two group households of 3 need 6 group members; supply them as relatives instead
    h = hm({(3, "GroupHH"): 1, (2, "1F-OtherFamily"): 1})
    p = pm({("Male", "25-39", "GroupHousehold"): 3, ("Male", "40-54", "Relative"): 2})
    pop = synthesize_sa2(p, h)
    assert check_population(pop.persons, pop.families, pop.households, household_marginal=h) == []
    err = FeasibilityError("x", stage="fill_lone_and_group", sa2="X")
    assert str(err) == "[X:fill_lone_and_group] x"


def test_empty_sa2():
    pop = synthesize_sa2(pm({}), hm({}))
    assert pop.persons == [] and pop.households == []


def test_ids_follow_format(truths):
    t = truths[1]
    pop = synthesize_sa2(t.persons, t.households, t.ages)
    assert pop.households[0].id == f"{t.sa2}:H0"
    assert pop.families[0].id == f"{t.sa2}:F0"
    assert sorted(int(p.id.split(":P")[1]) for p in pop.persons) == list(range(len(pop.persons)))


def test_nonprimary_types_follow_rho():
    """Non-primary family types converge to the reachable mapping of rho."""
    import random

    from popsynth.engine.stages import create_persons, fill_remaining_nonprimary
    from popsynth.schema import FamilyRecord, HouseholdRecord, PersonRecord, Rel, Sex

    from conftest import hcat

    p = pm({("Male", "40-54", "Married"): 400, ("Female", "40-54", "Married"): 400,
            ("Female", "40-54", "LoneParent"): 400, ("Male", "0-14", "U15Child"): 800,
            ("Male", "55-69", "Relative"): 400})
    h = hm({(3, "1F-CoupleWithChildren"): 50, (2, "1F-OneParent"): 30,
            (2, "1F-CoupleOnly"): 10, (2, "1F-OtherFamily"): 10})
    rho = compute_rho(h)
    heur = Heuristics(nonprimary_couple_child_prob=0.5)
    counts = Counter()
    for seed in range(4):
        pools = create_persons(p, hm({}))
        for i in range(100):
            fam = FamilyRecord(FamilyType.COUPLE_WITH_CHILDREN)
            for sex, rel, b in [(Sex.MALE, Rel.MARRIED, 3), (Sex.FEMALE, Rel.MARRIED, 3),
                                (Sex.MALE, Rel.U15_CHILD, 0)]:
                fam.add(PersonRecord(f"Q{i}{rel.value}", sex=sex, age_bin=b, rel=rel))
            hh = HouseholdRecord(f"H{i}", hcat("8+", "2F-CoupleWithChildren"), "X")
            hh.add_family(fam)
            pools.incomplete_households.append(hh)
        fill_remaining_nonprimary(pools, rho, p, heur, random.Random(seed))
        for hh in pools.completed_households + pools.incomplete_households:
            counts[hh.families[1].family_type] += 1
    total = sum(counts.values())
    assert total == 400
    assert abs(counts[FamilyType.ONE_PARENT] / total - rho.parental) < 0.06
    assert abs(counts[FamilyType.OTHER_FAMILY] / total - rho.other) < 0.06
    marital = counts[FamilyType.COUPLE_ONLY] + counts[FamilyType.COUPLE_WITH_CHILDREN]
    assert abs(marital / total - rho.marital) < 0.06
    assert abs(counts[FamilyType.COUPLE_WITH_CHILDREN] / marital - 0.5) < 0.1
