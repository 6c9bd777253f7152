"""Ground-truth populations for round-trip testing, and brute-force references.

The generator builds households first and then fills them with members that
obey every structural rule the engine enforces, so the marginals tabulated
from a generated population are mutually consistent and ``clean`` leaves
them untouched.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .engine.heuristics import NO_CHILD_HI, NO_CHILD_LO, Heuristics, feasible_child_bins
from .engine.pools import SynthesisReport
from .engine.stages import nonprimary_eligibility
from .engine.synthesize import Population, finalize, sa2_rng
from .engine.pools import PoolSet
from .ingest import AgePyramid, HouseholdMarginal, PersonMarginal
from .schema import (
    AGE_RANGES,
    COMPOSITIONS,
    MAX_SIZE,
    FamilyRecord,
    FamilyType,
    HouseholdCategory,
    HouseholdComposition,
    HouseholdKind,
    HouseholdRecord,
    PersonRecord,
    Rel,
    Sex,
)
from .spatial import AddressPoint, AreaPolygon, Sa1Marginal, on_segment

CO = FamilyType.COUPLE_ONLY
CWC = FamilyType.COUPLE_WITH_CHILDREN
OP = FamilyType.ONE_PARENT
OF = FamilyType.OTHER_FAMILY


def _comp(n, ft):
    return HouseholdComposition(HouseholdKind.FAMILY, n, ft)


# roughly the mix of an Australian metropolitan SA2
DEFAULT_MIX = {
    HouseholdComposition(HouseholdKind.LONE_PERSON): 0.24,
    HouseholdComposition(HouseholdKind.GROUP): 0.045,
    _comp(1, CO): 0.25,
    _comp(1, CWC): 0.30,
    _comp(1, OP): 0.10,
    _comp(1, OF): 0.012,
    _comp(2, CO): 0.008,
    _comp(2, CWC): 0.025,
    _comp(2, OP): 0.008,
    _comp(2, OF): 0.002,
    _comp(3, CO): 0.0005,
    _comp(3, CWC): 0.0015,
    _comp(3, OP): 0.0005,
    _comp(3, OF): 0.0002,
}

# age-bin weights per role, bins 0-14 .. 100+
MARRIED_BINS = (0, 3, 26, 30, 25, 13, 3, 0.02)
LONE_PARENT_BINS = (0, 3, 30, 40, 20, 6, 1, 0.01)
RELATIVE_BINS = (10, 18, 22, 16, 14, 12, 7, 0.1)
GROUP_BINS = (0, 40, 40, 10, 6, 3, 1, 0.01)
LONE_BINS = (0, 5, 20, 20, 25, 21, 8, 0.2)
CHILD_BIN_WEIGHT = (8, 4, 2, 1, 0.5, 0.2, 0.1, 0.01)


@dataclass
class OracleParams:
    n_sa2: int = 1
    households: int = 100
    mix: dict[HouseholdComposition, float] = field(default_factory=lambda: dict(DEFAULT_MIX))
    sa1_per_sa2: int = 4
    extra_person_rate: float = 0.35  # chance of each further member beyond the minimum size

    def __post_init__(self):
        if self.n_sa2 < 1:
            raise ValueError("need at least one SA2")
        if self.households < 0:
            raise ValueError("household count must be non-negative")
        if self.sa1_per_sa2 < 1:
            raise ValueError("need at least one SA1 per SA2")
        if not self.mix or any(w < 0 for w in self.mix.values()) or not sum(self.mix.values()):
            raise ValueError("composition mix needs positive weights")
        if not 0 <= self.extra_person_rate < 1:
            raise ValueError("extra_person_rate must lie in [0, 1)")


@dataclass
class GroundTruth:
    population: Population
    persons: PersonMarginal
    households: HouseholdMarginal
    ages: AgePyramid
    sa1: Sa1Marginal

    @property
    def sa2(self) -> str:
        return self.households.sa2


@dataclass
class Marginals:
    persons: PersonMarginal
    households: HouseholdMarginal
    ages: AgePyramid


def sa2_code(i: int) -> str:
    return f"2{i + 1:08d}"


class _Builder:
    def __init__(self, sa2: str, rng: random.Random, heuristics: Heuristics, extra_rate: float):
        self.sa2 = sa2
        self.extra_rate = extra_rate
        self.rng = rng
        self.h = heuristics
        self.pools = PoolSet(sa2, PersonMarginal(sa2))

    def _bin(self, weights) -> int:
        return self.rng.choices(range(len(weights)), weights)[0]

    def _sex(self) -> Sex:
        return Sex.MALE if self.rng.random() < 0.5 else Sex.FEMALE

    def person(self, sex, age_bin, rel) -> PersonRecord:
        return self.pools.new_person(sex=sex, age_bin=age_bin, rel=rel)

    def relative(self) -> PersonRecord:
        return self.person(self._sex(), self._bin(RELATIVE_BINS), Rel.RELATIVE)

    def child_for(self, fam: FamilyRecord) -> PersonRecord | None:
        bins = feasible_child_bins(fam.parent_bins, fam.child_lo, fam.child_hi, self.h.gaps)
        if not bins:
            return None
        b = self.rng.choices(bins, [CHILD_BIN_WEIGHT[c] for c in bins])[0]
        if b == 0:
            rel = Rel.U15_CHILD
        elif b == 1 and self.rng.random() < 0.6:
            rel = Rel.STUDENT
        else:
            rel = Rel.O15_CHILD
        return self.person(self._sex(), b, rel)

    def _parent_bin(self, weights) -> int:
        # only bins that can have a child under the gap rule
        ok = [w if feasible_child_bins((b,), NO_CHILD_LO, NO_CHILD_HI, self.h.gaps) else 0
              for b, w in enumerate(weights)]
        return self._bin(ok)

    def couple(self, with_child: bool) -> FamilyRecord:
        while True:
            mb = self._parent_bin(MARRIED_BINS) if with_child else self._bin(MARRIED_BINS)
            fbins = [b for b in self.h.partner_bins(mb) if b >= 1]
            if with_child:
                fbins = [b for b in fbins
                         if feasible_child_bins((mb, b), NO_CHILD_LO, NO_CHILD_HI, self.h.gaps)]
            if fbins:
                break
        fb = self.rng.choice(fbins)
        fam = FamilyRecord(CO, [self.person(Sex.MALE, mb, Rel.MARRIED),
                                self.person(Sex.FEMALE, fb, Rel.MARRIED)])
        if with_child:
            fam.add(self.child_for(fam))
            fam.family_type = CWC
        return fam

    def unit(self, ft: FamilyType) -> FamilyRecord:
        if ft is CO or ft is CWC:
            return self.couple(ft is CWC)
        if ft is OP:
            fam = FamilyRecord(OP, [self.person(self._sex(), self._parent_bin(LONE_PARENT_BINS),
                                                Rel.LONE_PARENT)])
            fam.add(self.child_for(fam))
            return fam
        return FamilyRecord(OF, [self.relative(), self.relative()])

    def household(self, idx: int, comp: HouseholdComposition) -> HouseholdRecord:
        rng = self.rng
        size = comp.min_size
        if comp.kind is not HouseholdKind.LONE_PERSON:
            while size < MAX_SIZE and rng.random() < self.extra_rate:
                size += 1
        hh = HouseholdRecord(f"{self.sa2}:H{idx}", HouseholdCategory(size, comp), self.sa2)
        if comp.kind is HouseholdKind.LONE_PERSON:
            hh.members.append(self.person(self._sex(), self._bin(LONE_BINS), Rel.LONE_PERSON))
            return hh
        if comp.kind is HouseholdKind.GROUP:
            for _ in range(size):
                hh.members.append(self.person(self._sex(), self._bin(GROUP_BINS),
                                              Rel.GROUP_HOUSEHOLD))
            return hh
        hh.add_family(self.unit(comp.primary))
        while hh.family_slots:
            fits = [ft for ft in FamilyType if nonprimary_eligibility(hh, ft)]
            hh.add_family(self.unit(rng.choice(fits)))
        primary = hh.families[0]
        while hh.free > 0:
            child = None
            if primary.family_type in (CWC, OP) and rng.random() < 0.8:
                child = self.child_for(primary)
            hh.add_to_family(primary, child or self.relative())
        return hh


def _tabulate(sa2: str, persons: Sequence[PersonRecord], households: Sequence[HouseholdRecord]
              ) -> tuple[PersonMarginal, HouseholdMarginal, AgePyramid]:
    p = PersonMarginal(sa2, dict(Counter(x.category for x in persons)))
    h = HouseholdMarginal(sa2, dict(Counter(hh.category for hh in households)))
    ages = [0] * 101
    for x in persons:
        ages[x.age_years] += 1
    return p, h, AgePyramid(sa2, ages)


def _draw_ages(households: Sequence[HouseholdRecord], rng: random.Random, gaps) -> None:
    gmin, gmax = gaps
    for hh in households:
        for fam in hh.families:
            parents, kids = fam.parents(), fam.children()
            if parents and kids:
                lo_w, hi_w = fam.child_lo + gmin, fam.child_hi + gmax
                spans = []
                for p in parents:
                    lo, hi = AGE_RANGES[p.age_bin]
                    spans.append((max(lo, lo_w), min(hi, hi_w)))
                for _ in range(10_000):
                    ages = [rng.randint(lo, hi) for lo, hi in spans]
                    if max(ages) - min(ages) <= gmax - gmin:
                        break
                else:
                    raise AssertionError(f"no parent ages for family in {hh.id}")
                for p, a in zip(parents, ages):
                    p.age_years = a
                for c in kids:
                    lo, hi = AGE_RANGES[c.age_bin]
                    c.age_years = rng.randint(max(lo, max(ages) - gmax), min(hi, min(ages) - gmin))
        for m in hh.members:
            if m.age_years is None:
                m.age_years = rng.randint(*AGE_RANGES[m.age_bin])


def generate_sa2(sa2: str, params: OracleParams, seed: int,
                 heuristics: Heuristics | None = None) -> GroundTruth:
    heuristics = heuristics or Heuristics()
    rng = sa2_rng(seed, "oracle:" + sa2)
    b = _Builder(sa2, rng, heuristics, params.extra_person_rate)
    comps = [c for c in COMPOSITIONS if params.mix.get(c, 0) > 0]
    weights = [params.mix[c] for c in comps]
    drawn = sorted(rng.choices(range(len(comps)), weights, k=params.households))
    households = [b.household(i, comps[k]) for i, k in enumerate(drawn)]
    _draw_ages(households, rng, heuristics.gaps)

    sa1s = [f"{sa2}{j + 1:02d}" for j in range(params.sa1_per_sa2)]
    sa1 = Sa1Marginal(sa2)
    for hh in households:
        hh.sa1 = rng.choice(sa1s)
        key = (hh.sa1, hh.composition)
        sa1.counts[key] = sa1.counts.get(key, 0) + 1

    pop = finalize(b.pools, households)
    pop = Population(pop.persons, pop.families, pop.households, SynthesisReport(sa2))
    p, h, a = _tabulate(sa2, pop.persons, households)
    return GroundTruth(pop, p, h, a, sa1)


def generate_ground_truth(params: OracleParams, seed: int,
                          heuristics: Heuristics | None = None) -> list[GroundTruth]:
    """One structurally valid population per SA2, with its exact marginals."""
    return [generate_sa2(sa2_code(i), params, seed, heuristics) for i in range(params.n_sa2)]


def _stochastic_round(x: float, rng: random.Random) -> int:
    lo = int(x // 1)
    return lo + (rng.random() < x - lo)


def perturb_marginals(m: Marginals, magnitude: float, seed: int) -> Marginals:
    """Randomly move each person cell and pyramid age by up to ``magnitude`` of its count.

    The household marginal is passed through untouched.
    """
    if not 0.0 <= magnitude <= 1.0:
        raise ValueError("magnitude must lie in [0, 1]")
    if magnitude == 0:
        return Marginals(PersonMarginal(m.persons.sa2, dict(m.persons.counts)), m.households,
                         AgePyramid(m.ages.sa2, list(m.ages.counts)))
    rng = sa2_rng(seed, "perturb:" + m.persons.sa2)
    counts = {}
    for cat in sorted(m.persons.counts, key=lambda c: (c.sex.value, c.age_bin, c.rel.value)):
        n = m.persons.counts[cat]
        v = max(0, _stochastic_round(n * (1 + rng.uniform(-magnitude, magnitude)), rng))
        if v:
            counts[cat] = v
    ages = [max(0, _stochastic_round(n * (1 + rng.uniform(-magnitude, magnitude)), rng))
            for n in m.ages.counts]
    return Marginals(PersonMarginal(m.persons.sa2, counts), m.households,
                     AgePyramid(m.ages.sa2, ages))


# -- spatial references -------------------------------------------------------

def _winding(x: float, y: float, ring) -> int:
    wn = 0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        is_left = (x2 - x1) * (y - y1) - (x - x1) * (y2 - y1)
        if y1 <= y:
            if y2 > y and is_left > 0:
                wn += 1
        elif y2 <= y and is_left < 0:
            wn -= 1
    return wn


def naive_contains(x: float, y: float, poly: AreaPolygon) -> bool:
    """Winding-number containment, boundary inclusive, holes excluded."""
    for ring in poly.rings:
        for a, b in zip(ring, ring[1:]):
            if on_segment(x, y, a, b):
                return True
    for outer, *holes in poly.parts:
        if _winding(x, y, outer) and not any(_winding(x, y, h) for h in holes):
            return True
    return False


def naive_point_in_polygon_mapping(points: Sequence[AddressPoint],
                                   polys: Sequence[AreaPolygon]) -> dict[str, str]:
    """Test every point against every polygon; first SA1 in sorted order wins."""
    polys = sorted(polys, key=lambda p: p.sa1)
    out = {}
    for pt in points:
        for poly in polys:
            if naive_contains(pt.x, pt.y, poly):
                out[pt.id] = poly.sa1
                break
    return out


def _random_shape(rng: random.Random, x0: int, y0: int, w: int, h: int) -> list[list]:
    """Parts (outer ring plus holes) of a random simple shape inside a box."""
    kind = rng.choice(("rect", "L", "U", "hole", "triangle", "multi"))
    x1, y1 = x0 + w, y0 + h
    if kind == "L":
        a, b = rng.randint(1, h - 1), rng.randint(1, w - 1)
        outer = [(x0, y0), (x1, y0), (x1, y0 + a), (x0 + b, y0 + a), (x0 + b, y1), (x0, y1)]
        return [[outer]]
    if kind == "U":
        c1 = rng.randint(1, w - 3)
        c2 = rng.randint(c1 + 1, w - 1)
        d = rng.randint(1, h - 1)
        outer = [(x0, y0), (x1, y0), (x1, y1), (x0 + c2, y1), (x0 + c2, y0 + d),
                 (x0 + c1, y0 + d), (x0 + c1, y1), (x0, y1)]
        return [[outer]]
    if kind == "hole":
        hx0, hx1 = sorted(rng.sample(range(x0 + 1, x1), 2))
        hy0, hy1 = sorted(rng.sample(range(y0 + 1, y1), 2))
        hole = [(hx0, hy0), (hx0, hy1), (hx1, hy1), (hx1, hy0)]
        return [[[(x0, y0), (x1, y0), (x1, y1), (x0, y1)], hole]]
    if kind == "triangle":
        while True:
            pts = [(rng.randint(x0, x1), rng.randint(y0, y1)) for _ in range(3)]
            (ax, ay), (bx, by), (cx, cy) = pts
            if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) != 0:
                return [[pts]]
    if kind == "multi":
        m = x0 + w // 2
        return [[[(x0, y0), (m - 1, y0), (m - 1, y1), (x0, y1)]],
                [[(m + 1, y0), (x1, y0), (x1, y0 + h // 2), (m + 1, y0 + h // 2)]]]
    return [[[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]]]


def _closed(ring):
    return [(float(x), float(y)) for x, y in ring] + [(float(ring[0][0]), float(ring[0][1]))]


def random_spatial_instance(rng: random.Random, n_polys: int, n_points: int, extent: int = 100,
                            boundary_share: float = 0.25
                            ) -> tuple[list[AddressPoint], list[AreaPolygon]]:
    """Random, possibly overlapping, polygons (concave shapes, holes, multipolygons and
    triangles) on integer vertices, with points of which a share lie exactly on an
    edge or vertex."""
    polys = []
    for j in range(n_polys):
        w, h = rng.randint(4, max(4, extent // 3)), rng.randint(4, max(4, extent // 3))
        x0, y0 = rng.randint(0, extent - w), rng.randint(0, extent - h)
        parts = [[_closed(r) for r in part] for part in _random_shape(rng, x0, y0, w, h)]
        polys.append(AreaPolygon(f"S{j:04d}", "A", parts))
    points = []
    for i in range(n_points):
        if polys and rng.random() < boundary_share:
            ring = rng.choice(rng.choice(polys).rings)
            k = rng.randrange(len(ring) - 1)
            (ax, ay), (bx, by) = ring[k], ring[k + 1]
            t = rng.randint(0, 4) / 4
            x, y = ax + t * (bx - ax), ay + t * (by - ay)
        else:
            x, y = rng.uniform(-1, extent + 1), rng.uniform(-1, extent + 1)
        points.append(AddressPoint(f"a{i}", x, y))
    return points, polys


def generate_geography(truths: Sequence[GroundTruth], seed: int, address_ratio: float = 1.1,
                       cell: float = 1000.0) -> tuple[list[AreaPolygon], list[AddressPoint]]:
    """Strip-shaped SA1 polygons for each SA2 and enough random addresses inside them."""
    rng = random.Random(seed)
    polys, points = [], []
    for i, t in enumerate(sorted(truths, key=lambda t: t.sa2)):
        sa1s = sorted({sa1 for sa1, _ in t.sa1.counts} | {hh.sa1 for hh in t.population.households})
        per_sa1 = Counter(hh.sa1 for hh in t.population.households)
        x0 = i * cell
        band = cell / max(1, len(sa1s))
        for j, sa1 in enumerate(sa1s):
            y0, y1 = j * band, (j + 1) * band
            ring = [(x0, y0), (x0 + cell, y0), (x0 + cell, y1), (x0, y1), (x0, y0)]
            polys.append(AreaPolygon(sa1, t.sa2, [[ring]]))
            n = max(1, int(per_sa1[sa1] * address_ratio + 0.5))
            for _ in range(n):
                points.append(AddressPoint(f"{sa1}-{len(points)}",
                                           rng.uniform(x0 + 1e-6 * cell, x0 + cell * (1 - 1e-6)),
                                           rng.uniform(y0 + 1e-6 * band, y1 - 1e-6 * band)))
    return polys, points


def grid_spatial_instance(rng: random.Random, cols: int, rows: int, n_points: int,
                          cell: int = 20) -> tuple[list[AddressPoint], list[AreaPolygon]]:
    """SA1-like layout: one random shape per grid cell, points uniform over the grid."""
    polys = []
    for j in range(cols * rows):
        cx, cy = j % cols, j // cols
        parts = [[_closed(r) for r in part]
                 for part in _random_shape(rng, cx * cell, cy * cell, cell, cell)]
        polys.append(AreaPolygon(f"G{j:05d}", "A", parts))
    points = [AddressPoint(f"g{i}", rng.uniform(0, cols * cell), rng.uniform(0, rows * cell))
              for i in range(n_points)]
    return points, polys
