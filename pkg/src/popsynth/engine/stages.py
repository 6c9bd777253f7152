"""Stages 1-5 of household assembly for one SA2.

Every function mutates the :class:`PoolSet` in place and returns it. Persons
only ever move between pools, families and households; nothing is copied,
so a person is in exactly one place at every step boundary.
"""

from __future__ import annotations

from ..ingest import HouseholdMarginal, PersonMarginal, household_target_sizes, implied_person_total
from ..schema import (
    CHILD_RELS,
    N_AGE_BINS,
    VALID_PERSON_CATEGORIES,
    FamilyRecord,
    FamilyType,
    HouseholdKind,
    HouseholdRecord,
    PersonCategory,
    PersonRecord,
    Rel,
    Sex,
)
from .heuristics import (
    NO_CHILD_HI,
    NO_CHILD_LO,
    UNIT_SIZE,
    Heuristics,
    Rho,
    family_child_bins,
    feasible_child_bins,
)
from .pools import FeasibilityError, Pool, PoolSet

CO = FamilyType.COUPLE_ONLY
CWC = FamilyType.COUPLE_WITH_CHILDREN
OP = FamilyType.ONE_PARENT
OF = FamilyType.OTHER_FAMILY

CHILD_REL_TUPLE = (Rel.U15_CHILD, Rel.STUDENT, Rel.O15_CHILD)
ALL_BINS = tuple(range(N_AGE_BINS))


def _weighted_index(rng, weights) -> int:
    total = sum(weights)
    r = rng.random() * total
    acc = 0.0
    last = 0
    for i, w in enumerate(weights):
        if w <= 0:
            continue
        acc += w
        last = i
        if r < acc:
            return i
    return last


# -- Stage 1 -----------------------------------------------------------------

def create_persons(p: PersonMarginal, h: HouseholdMarginal,
                   heuristics: Heuristics | None = None) -> PoolSet:
    """Instantiate one person per counted unit and route them to pools.

    Any shortfall against the household-implied total becomes attribute-free
    persons in the extras pool.
    """
    heuristics = heuristics or Heuristics()
    pools = PoolSet(p.sa2, p)
    for cat in VALID_PERSON_CATEGORIES:
        n = p.counts.get(cat, 0)
        if not n:
            continue
        pool = pools.pool_for(cat.rel, cat.sex)
        for _ in range(n):
            pool.add(pools.new_person(sex=cat.sex, age_bin=cat.age_bin, rel=cat.rel))
    for _ in range(implied_person_total(h, heuristics.eight_plus_surplus) - p.total):
        pools.extras.add(pools.new_person())
    return pools


# -- person acquisition with fallbacks ----------------------------------------

def _candidates(p: PersonMarginal, rels, sex=None, bins=None) -> list[tuple[PersonCategory, int]]:
    return [(c, p.counts.get(c, 0)) for c in VALID_PERSON_CATEGORIES
            if c.rel in rels and (sex is None or c.sex is sex)
            and (bins is None or c.age_bin in bins)]


def _reattribute(person: PersonRecord, cat: PersonCategory) -> PersonRecord:
    person.sex, person.age_bin, person.rel = cat.sex, cat.age_bin, cat.rel
    return person


def draw_from_extras(pools: PoolSet, cands, rng) -> PersonRecord:
    """Take an extra for one of ``cands`` (category, weight) pairs.

    Categories are drawn in proportion to their weight. Extras whose sex and
    age bin already match a candidate are preferred; otherwise an extra
    (attribute-free ones first) is given the drawn category outright.
    """
    extras = pools.extras
    positive = [(c, w) for c, w in cands if w > 0]
    pool = positive or [(c, 1) for c, _ in cands]
    avail = [(c, w) for c, w in pool if extras.count((c.sex, c.age_bin))]
    if avail:
        cat = avail[_weighted_index(rng, [w for _, w in avail])][0]
        return _reattribute(extras.pop_random(rng, [(cat.sex, cat.age_bin)]), cat)
    if not positive:
        # nothing favoured by the marginal: keep an extra's own sex and age
        keep = [(c, 1) for c, _ in cands if extras.count((c.sex, c.age_bin))]
        if keep:
            cat = keep[rng.randrange(len(keep))][0]
            return _reattribute(extras.pop_random(rng, [(cat.sex, cat.age_bin)]), cat)
    cat = pool[_weighted_index(rng, [w for _, w in pool])][0]
    blank = extras.count((None, None))
    person = extras.pop_random(rng, [(None, None)] if blank else None)
    if person.sex is not None:
        pools.report.fallback("extra_reattributed")
    return _reattribute(person, cat)


def acquire(pools: PoolSet, rels, heuristics: Heuristics, rng, sex: Sex | None = None,
            bins=None) -> PersonRecord:
    """Get a person for a role: own pool, then extras, then any other pool.

    Persons taken from extras or other pools are re-attributed to a category
    drawn from the person marginal restricted to ``rels``, ``sex`` and
    ``bins``.
    """
    own = pools.pool_for(rels[0], sex)
    person = own.pop_random(rng, bins)
    if person is not None:
        return person
    cands = _candidates(pools.person_marginal, rels, sex, bins)
    if not cands:
        raise FeasibilityError(f"no valid category for {[r.value for r in rels]} in bins {bins}")
    if pools.extras:
        return draw_from_extras(pools, cands, rng)
    donors = [own, pools.relatives, pools.children, pools.lone_parents, pools.married_males,
              pools.married_females, pools.group_members, pools.lone_persons]
    for pool in donors:
        if pool:
            person = pool.pop_random(rng)
            pools.report.fallback("donor_reattributed")
            positive = [(c, w) for c, w in cands if w > 0] or [(c, 1) for c, _ in cands]
            cat = positive[_weighted_index(rng, [w for _, w in positive])][0]
            return _reattribute(person, cat)
    raise FeasibilityError(f"no persons left to fill a {'/'.join(r.value for r in rels)} role")


def _married_bins_for_female(female_bin: int, heuristics: Heuristics) -> tuple[int, ...]:
    return tuple(b for b in ALL_BINS if female_bin in heuristics.partner_bins(b))


def take_couple(pools: PoolSet, heuristics: Heuristics, rng,
                need_child: bool = False) -> FamilyRecord:
    """Form one couple, preferring pooled persons within the partner-bin rule.

    With ``need_child`` only couples that can have some child under the gap
    rule qualify.
    """
    males, females = pools.married_males, pools.married_females
    gaps = heuristics.gaps

    def ok(mb, fb):
        return not need_child or bool(feasible_child_bins((mb, fb), NO_CHILD_LO, NO_CHILD_HI,
                                                          gaps))

    pairs = [(mb, fb) for mb in males.nonempty_keys() for fb in heuristics.partner_bins(mb)
             if females.count(fb) and ok(mb, fb)]
    if pairs:
        mbins = sorted({mb for mb, _ in pairs})
        male = males.pop_random(rng, mbins)
        fbins = [fb for mb, fb in pairs if mb == male.age_bin]
        female = females.pop_random(rng, fbins)
        return FamilyRecord(CO, [male, female])

    male_bins = [b for b in ALL_BINS if any(ok(b, fb) for fb in heuristics.partner_bins(b))]
    if males and pools.extras:
        mb_ok = [b for b in males.nonempty_keys() if b in male_bins]
        if mb_ok:
            male = males.pop_random(rng, mb_ok)
            fbins = [fb for fb in heuristics.partner_bins(male.age_bin) if ok(male.age_bin, fb)]
            female = draw_from_extras(
                pools, _candidates(pools.person_marginal, (Rel.MARRIED,), Sex.FEMALE, fbins), rng)
            return FamilyRecord(CO, [male, female])
    if females and pools.extras:
        fb_ok = [fb for fb in females.nonempty_keys()
                 if any(ok(mb, fb) for mb in _married_bins_for_female(fb, heuristics))]
        if fb_ok:
            female = females.pop_random(rng, fb_ok)
            mbins = [mb for mb in _married_bins_for_female(female.age_bin, heuristics)
                     if ok(mb, female.age_bin)]
            male = draw_from_extras(
                pools, _candidates(pools.person_marginal, (Rel.MARRIED,), Sex.MALE, mbins), rng)
            return FamilyRecord(CO, [male, female])
    if males and females:
        # relax the partner-bin rule: closest available bins
        best = None
        for mb in males.nonempty_keys():
            for fb in females.nonempty_keys():
                if not ok(mb, fb):
                    continue
                d = min(abs(fb - (mb + off)) for off in heuristics.couple_partner_bins)
                if best is None or d < best[0]:
                    best = (d, mb, fb)
        if best is not None:
            pools.report.fallback("couple_bins_relaxed")
            male = males.pop_random(rng, [best[1]])
            female = females.pop_random(rng, [best[2]])
            return FamilyRecord(CO, [male, female])
    male = acquire(pools, (Rel.MARRIED,), heuristics, rng, Sex.MALE, male_bins)
    fbins = [fb for fb in heuristics.partner_bins(male.age_bin) if ok(male.age_bin, fb)]
    female = acquire(pools, (Rel.MARRIED,), heuristics, rng, Sex.FEMALE, fbins)
    return FamilyRecord(CO, [male, female])


def take_child(pools: PoolSet, family: FamilyRecord, heuristics: Heuristics, rng) -> PersonRecord:
    bins = family_child_bins(family, heuristics.gaps)
    if not bins:
        raise FeasibilityError(f"no age bin can hold a child of parents in bins "
                               f"{family.parent_bins}")
    child = pools.children.pop_random(rng, bins)
    if child is None:
        child = acquire(pools, CHILD_REL_TUPLE, heuristics, rng, bins=bins)
    return child


def _parent_bins_with_children(heuristics: Heuristics) -> list[int]:
    return [b for b in ALL_BINS
            if feasible_child_bins((b,), NO_CHILD_LO, NO_CHILD_HI, heuristics.gaps)]


def take_one_parent_unit(pools: PoolSet, heuristics: Heuristics, rng) -> FamilyRecord:
    gaps = heuristics.gaps
    lps, kids = pools.lone_parents, pools.children
    matched = [b for b in lps.nonempty_keys()
               if kids.count_in(feasible_child_bins((b,), NO_CHILD_LO, NO_CHILD_HI, gaps))]
    if matched:
        parent = lps.pop_random(rng, matched)
    else:
        parent = acquire(pools, (Rel.LONE_PARENT,), heuristics, rng,
                         bins=_parent_bins_with_children(heuristics))
    family = FamilyRecord(OP, [parent])
    family.add(take_child(pools, family, heuristics, rng))
    return family


def build_unit(pools: PoolSet, ft: FamilyType, heuristics: Heuristics, rng) -> FamilyRecord:
    """Assemble the smallest family of type ``ft`` from whatever is pooled."""
    if ft is CO:
        return take_couple(pools, heuristics, rng)
    if ft is CWC:
        family = take_couple(pools, heuristics, rng, need_child=True)
        family.add(take_child(pools, family, heuristics, rng))
        family.family_type = CWC
        return family
    if ft is OP:
        return take_one_parent_unit(pools, heuristics, rng)
    first = acquire(pools, (Rel.RELATIVE,), heuristics, rng)
    second = acquire(pools, (Rel.RELATIVE,), heuristics, rng)
    return FamilyRecord(OF, [first, second])


# -- Stage 2 -----------------------------------------------------------------

def _oldest_first(pool: Pool) -> list[PersonRecord]:
    out = []
    for b in range(N_AGE_BINS - 1, -1, -1):
        out.extend(pool.buckets.get(b, ()))
    return out


def form_one_parent_units(pools: PoolSet, heuristics: Heuristics) -> PoolSet:
    """Pair each lone parent with the oldest gap-feasible child left.

    Both pools are walked in descending age-bin order, insertion order
    within a bin. Lone parents without a feasible child stay pooled.
    """
    gaps = heuristics.gaps
    parents = _oldest_first(pools.lone_parents)
    buckets = {b: list(pools.children.buckets.get(b, ())) for b in ALL_BINS}
    taken = dict.fromkeys(ALL_BINS, 0)
    unpaired = []
    for parent in parents:
        for cb in feasible_child_bins((parent.age_bin,), NO_CHILD_LO, NO_CHILD_HI, gaps):
            if taken[cb] < len(buckets[cb]):
                child = buckets[cb][taken[cb]]
                taken[cb] += 1
                pools.basic_one_parent.append(FamilyRecord(OP, [parent, child]))
                break
        else:
            unpaired.append(parent)
    pools.lone_parents = Pool(unpaired)
    pools.children = Pool(p for b in ALL_BINS for p in buckets[b][taken[b]:])
    if unpaired:
        pools.report.fallback("lone_parent_unpaired", len(unpaired))
    return pools


def form_couples(pools: PoolSet, heuristics: Heuristics) -> PoolSet:
    """Greedily pair married males and females, oldest first.

    A male's partner comes from his own bin or the bins named by the
    partner-bin offsets, tried in that order.
    """
    males = _oldest_first(pools.married_males)
    buckets = {b: list(pools.married_females.buckets.get(b, ())) for b in ALL_BINS}
    taken = dict.fromkeys(ALL_BINS, 0)
    single = []
    for male in males:
        for fb in heuristics.partner_bins(male.age_bin):
            if taken[fb] < len(buckets[fb]):
                female = buckets[fb][taken[fb]]
                taken[fb] += 1
                pools.basic_couples.append(FamilyRecord(CO, [male, female]))
                break
        else:
            single.append(male)
    pools.married_males = Pool(single)
    pools.married_females = Pool(p for b in ALL_BINS for p in buckets[b][taken[b]:])
    return pools


def _primary_count(h: HouseholdMarginal, ft: FamilyType) -> int:
    return h.primary_counts()[ft]


def form_couple_with_child_units(pools: PoolSet, h: HouseholdMarginal, heuristics: Heuristics,
                                 rng) -> PoolSet:
    """Turn random couples into couple-with-child units, one per household whose
    primary family has children."""
    n = _primary_count(h, CWC)
    if not n:
        return pools
    if len(pools.basic_couples) < n or len(pools.children) < n:
        raise FeasibilityError(
            f"{n} couple-with-child units needed but only {len(pools.basic_couples)} couples "
            f"and {len(pools.children)} children are pooled")
    gaps = heuristics.gaps
    couples = pools.basic_couples
    order = list(range(len(couples)))
    rng.shuffle(order)
    used = [False] * len(couples)
    formed = 0
    for i in order:
        if formed == n:
            break
        fam = couples[i]
        child = pools.children.pop_random(rng, family_child_bins(fam, gaps))
        if child is None:
            continue
        fam.add(child)
        fam.family_type = CWC
        pools.basic_couple_with_child.append(fam)
        used[i] = True
        formed += 1
    rest = [c for c, u in zip(couples, used) if not u]
    # no pooled child fits the remaining couples' ages: re-attribute one
    while formed < n:
        able = [i for i, c in enumerate(rest) if family_child_bins(c, gaps)]
        if not able:
            raise FeasibilityError(f"no remaining couple can have a child under the age-gap "
                                   f"rule ({n - formed} couple-with-child units short)")
        fam = rest.pop(able[rng.randrange(len(able))])
        fam.add(take_child(pools, fam, heuristics, rng))
        fam.family_type = CWC
        pools.basic_couple_with_child.append(fam)
        pools.report.fallback("couple_with_child_forced")
        formed += 1
    pools.basic_couples = rest
    return pools


def form_other_family_units(pools: PoolSet, h: HouseholdMarginal, rng) -> PoolSet:
    m = _primary_count(h, OF)
    if len(pools.relatives) < 2 * m:
        raise FeasibilityError(f"{m} other-family units need {2 * m} relatives, "
                               f"only {len(pools.relatives)} pooled")
    for _ in range(m):
        a = pools.relatives.pop_random(rng)
        b = pools.relatives.pop_random(rng)
        pools.basic_other.append(FamilyRecord(OF, [a, b]))
    return pools


# -- Stage 3 -----------------------------------------------------------------

def create_households(pools: PoolSet, h: HouseholdMarginal,
                      heuristics: Heuristics | None = None) -> PoolSet:
    surplus = heuristics.eight_plus_surplus if heuristics else 0
    start = len(pools.incomplete_households) + len(pools.completed_households)
    for i, (cat, size) in enumerate(household_target_sizes(h, surplus), start):
        pools.incomplete_households.append(
            HouseholdRecord(f"{pools.sa2}:H{i}", cat, pools.sa2, target_size=size))
    return pools


def fill_lone_and_group(pools: PoolSet, rng) -> PoolSet:
    for hh in pools.incomplete_households:
        kind = hh.composition.kind
        if kind is HouseholdKind.LONE_PERSON:
            pool = pools.lone_persons
        elif kind is HouseholdKind.GROUP:
            pool = pools.group_members
        else:
            continue
        while hh.free > 0:
            person = pool.pop_random(rng)
            if person is None:
                raise FeasibilityError(f"household {hh.id} ({hh.category.label}) needs "
                                       f"{hh.free} more {kind.value} members; pool is empty")
            hh.members.append(person)
    pools.sweep()
    return pools


def _pop_random_unit(units: list[FamilyRecord], rng) -> FamilyRecord | None:
    if not units:
        return None
    i = rng.randrange(len(units))
    units[i], units[-1] = units[-1], units[i]
    return units.pop()


def assign_primary_families(pools: PoolSet, heuristics: Heuristics, rng) -> PoolSet:
    """Give every family household its primary family from the basic unit pools.

    When a pool runs dry the unit is assembled directly from pooled persons
    (recorded as a fallback).
    """
    source = {CO: pools.basic_couples, CWC: pools.basic_couple_with_child,
              OP: pools.basic_one_parent, OF: pools.basic_other}
    for hh in pools.incomplete_households:
        comp = hh.composition
        if comp.kind is not HouseholdKind.FAMILY or hh.families:
            continue
        unit = _pop_random_unit(source[comp.primary], rng)
        if unit is None:
            pools.report.fallback("primary_unit_built")
            unit = build_unit(pools, comp.primary, heuristics, rng)
        hh.add_family(unit)
    pools.sweep()
    return pools


# -- Stage 4 -----------------------------------------------------------------

def nonprimary_eligibility(hh: HouseholdRecord, ft: FamilyType) -> bool:
    """Whether a household can take another family of type ``ft``.

    Beyond the room and primary-type rules, the new unit must be no larger
    than the household's last family and must leave two places for every
    family slot still open after it.
    """
    slots = hh.family_slots
    if slots < 1 or not hh.families:
        return False
    free = hh.free
    primary = hh.families[0].family_type
    if ft is CO or ft is OF:
        ok = free >= 2
    elif ft is OP:
        ok = free >= 2 and primary in (CWC, OP)
    else:
        ok = free >= 3 and primary is CWC
    if not ok:
        return False
    unit = UNIT_SIZE[ft]
    if unit > hh.families[-1].size:
        return False
    return free - unit >= 2 * (slots - 1)


def _disassemble(pools: PoolSet, units: list[FamilyRecord]) -> None:
    for fam in units:
        for m in fam.members:
            pools.pool_for(m.rel, m.sex).add(m)
    units.clear()


def assign_leftover_one_parent_units(pools: PoolSet, rng) -> PoolSet:
    units = pools.basic_one_parent
    eligible = [hh for hh in pools.incomplete_households if nonprimary_eligibility(hh, OP)]
    while units and eligible:
        i = rng.randrange(len(eligible))
        hh = eligible[i]
        hh.add_family(_pop_random_unit(units, rng))
        if not nonprimary_eligibility(hh, OP):
            eligible[i] = eligible[-1]
            eligible.pop()
    _disassemble(pools, units)
    pools.sweep()
    return pools


def assign_leftover_couples(pools: PoolSet, heuristics: Heuristics, rng) -> PoolSet:
    def fits(hh):
        return nonprimary_eligibility(hh, CO) or nonprimary_eligibility(hh, CWC)

    couples = pools.basic_couples
    eligible = [hh for hh in pools.incomplete_households if fits(hh)]
    prob = heuristics.nonprimary_couple_child_prob
    while couples and eligible:
        i = rng.randrange(len(eligible))
        hh = eligible[i]
        unit = _pop_random_unit(couples, rng)
        if nonprimary_eligibility(hh, CWC) and rng.random() < prob:
            child = pools.children.pop_random(rng, family_child_bins(unit, heuristics.gaps))
            if child is not None:
                unit.add(child)
                unit.family_type = CWC
        hh.add_family(unit)
        if not fits(hh):
            eligible[i] = eligible[-1]
            eligible.pop()
    _disassemble(pools, couples)
    pools.sweep()
    return pools


def compute_rho(h: HouseholdMarginal) -> Rho:
    prim = h.primary_counts()
    total = sum(prim.values())
    if not total:
        raise ValueError(f"SA2 {h.sa2} has no family households")
    return Rho(
        marital=(prim[CO] + prim[CWC]) / total,
        parental=prim[OP] / total,
        other=prim[OF] / total,
    )


def _shortfall(pools: PoolSet, ft: FamilyType) -> int:
    """Persons a unit of type ``ft`` would have to take from extras."""
    couple = (not pools.married_males) + (not pools.married_females)
    if ft is CO:
        return couple
    if ft is CWC:
        return couple + (not pools.children)
    if ft is OP:
        return (not pools.lone_parents) + (not pools.children)
    return max(0, 2 - len(pools.relatives))


def choose_nonprimary_type(pools: PoolSet, hh: HouseholdRecord, rho: Rho,
                           heuristics: Heuristics, rng) -> FamilyType | None:
    satisfiable = [ft for ft in FamilyType if nonprimary_eligibility(hh, ft)]
    if not satisfiable:
        return None
    extras = len(pools.extras)
    prob = heuristics.nonprimary_couple_child_prob
    for _ in range(heuristics.max_retries):
        rel = rho.draw(rng)
        if rel == "parental":
            ft = OP if OP in satisfiable else None
        elif rel == "other":
            ft = OF if OF in satisfiable else None
        elif CWC in satisfiable:
            ft = CWC if rng.random() < prob else CO
        else:
            ft = CO if CO in satisfiable else None
        if ft is not None and _shortfall(pools, ft) <= extras:
            return ft
    pools.report.fallback("nonprimary_type_fallback")
    supplied = [ft for ft in satisfiable if _shortfall(pools, ft) <= extras]
    return (supplied or satisfiable)[0]


def fill_remaining_nonprimary(pools: PoolSet, rho: Rho, p: PersonMarginal,
                              heuristics: Heuristics, rng) -> PoolSet:
    """Give every household with an open family slot further families.

    The relationship of each new family is drawn from ``rho`` and mapped to a
    family type the household can accept; draws whose type the household or
    the pools cannot take are redrawn a bounded number of times.
    """
    pools.person_marginal = p
    for hh in pools.incomplete_households:
        while hh.family_slots >= 1:
            ft = choose_nonprimary_type(pools, hh, rho, heuristics, rng)
            if ft is None:
                pools.report.fallback("nonprimary_slot_unfilled")
                break
            hh.add_family(build_unit(pools, ft, heuristics, rng))
    pools.sweep()
    return pools


# -- Stage 5 -----------------------------------------------------------------

def complete_with_children(pools: PoolSet, heuristics: Heuristics, rng) -> PoolSet:
    """Hand pooled children to primary families, then to later families.

    A later family only takes a child while it stays smaller than every
    family before it and has no more children than the primary family.
    """
    gaps = heuristics.gaps
    kids = pools.children
    targets = [hh for hh in pools.incomplete_households
               if hh.families and hh.families[0].family_type in (CWC, OP)]
    rng.shuffle(targets)
    for hh in targets:
        if not kids:
            break
        fam = hh.families[0]
        while hh.free > 0:
            child = kids.pop_random(rng, family_child_bins(fam, gaps))
            if child is None:
                break
            hh.add_to_family(fam, child)

    if kids:
        later = [hh for hh in pools.incomplete_households
                 if len(hh.families) > 1 and hh.free > 0]
        rng.shuffle(later)
        for hh in later:
            if not kids:
                break
            primary = hh.families[0]
            for idx in range(1, len(hh.families)):
                fam = hh.families[idx]
                if fam.family_type not in (CWC, OP):
                    continue
                while (hh.free > 0 and fam.size + 1 < min(f.size for f in hh.families[:idx])
                       and fam.n_children + 1 <= primary.n_children):
                    child = kids.pop_random(rng, family_child_bins(fam, gaps))
                    if child is None:
                        break
                    hh.add_to_family(fam, child)
    pools.sweep()
    return pools


def convert_leftovers_to_extras(pools: PoolSet) -> PoolSet:
    for pool in (pools.married_males, pools.married_females, pools.lone_parents, pools.children,
                 pools.group_members, pools.lone_persons):
        for person in pool.drain():
            if person.rel in (Rel.GROUP_HOUSEHOLD, Rel.LONE_PERSON):
                pools.report.fallback("non_family_person_to_extras")
            person.rel = None
            pools.extras.add(person)
    return pools


def fill_with_extras(pools: PoolSet, p: PersonMarginal, heuristics: Heuristics, rng) -> PoolSet:
    """Pad primary families with extras as children or relatives.

    The new member's relationship, sex and age bin are drawn from the
    marginal's dependent-child and relative cells, limited to what the
    primary family can take (children only under parents, within the gap
    rule).
    """
    gaps = heuristics.gaps
    relatives = _candidates(p, (Rel.RELATIVE,))
    child_cands = {}
    for hh in pools.incomplete_households:
        if not pools.extras:
            break
        fam = hh.families[0]
        while hh.free > 0 and pools.extras:
            if fam.family_type in (CWC, OP):
                bins = family_child_bins(fam, gaps)
                cands = child_cands.get(bins)
                if cands is None:
                    cands = child_cands[bins] = _candidates(p, CHILD_RELS, bins=bins) + relatives
            else:
                cands = relatives
            hh.add_to_family(fam, draw_from_extras(pools, cands, rng))
    pools.sweep()
    return pools


def fill_with_relatives(pools: PoolSet, rng) -> PoolSet:
    for hh in pools.incomplete_households:
        fam = hh.families[0]
        while hh.free > 0:
            person = pools.relatives.pop_random(rng)
            if person is None:
                raise FeasibilityError(f"household {hh.id} still needs {hh.free} persons but "
                                       f"relatives and extras are exhausted")
            hh.add_to_family(fam, person)
    pools.sweep()
    if pools.incomplete_households:
        hh = pools.incomplete_households[0]
        raise FeasibilityError(f"household {hh.id} is missing {hh.family_slots} families")
    return pools
