"""Population heuristics: parent-child age gaps and couple age pairing.

Ages are only fixed at the very end of synthesis, so while families are
being assembled the gap rule is checked on age bins. Two tests are combined:
the bin-midpoint gap between each parent and the new child, and an exact
test that some assignment of whole-year ages inside the bins satisfies every
parent-child gap in the family at once. The second guarantees that the final
age draw can always honour the rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..schema import AGE_MIDPOINTS, AGE_RANGES, N_AGE_BINS, FamilyType

NO_CHILD_LO = -1000
NO_CHILD_HI = 1000


@dataclass(frozen=True)
class Heuristics:
    parent_child_gap_min: int = 15
    parent_child_gap_max: int = 45
    couple_partner_bins: tuple[int, ...] = (0, -1)
    nonprimary_couple_child_prob: float = 0.5
    rng_seed: int = 0
    max_retries: int = 100
    eight_plus_surplus: int = 0

    def __post_init__(self):
        if not self.parent_child_gap_min < self.parent_child_gap_max:
            raise ValueError("parent_child_gap_min must be below parent_child_gap_max")
        if not 0.0 <= self.nonprimary_couple_child_prob <= 1.0:
            raise ValueError("nonprimary_couple_child_prob must lie in [0, 1]")
        if not self.couple_partner_bins:
            raise ValueError("couple_partner_bins must not be empty")
        if self.max_retries < 1:
            raise ValueError("max_retries must be positive")
        if self.eight_plus_surplus < 0:
            raise ValueError("eight_plus_surplus must be non-negative")

    @property
    def gaps(self) -> tuple[int, int]:
        return self.parent_child_gap_min, self.parent_child_gap_max

    def partner_bins(self, male_bin: int) -> tuple[int, ...]:
        return tuple(male_bin + off for off in self.couple_partner_bins
                     if 0 <= male_bin + off < N_AGE_BINS)


@dataclass(frozen=True)
class Rho:
    """Probability that a primary family is built on a marital, parental or
    other relationship."""

    marital: float
    parental: float
    other: float

    def __post_init__(self):
        for v in (self.marital, self.parental, self.other):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"probability {v} outside [0, 1]")
        if abs(self.marital + self.parental + self.other - 1.0) > 1e-9:
            raise ValueError("relationship probabilities must sum to 1")

    def draw(self, rng) -> str:
        u = rng.random()
        if u < self.marital:
            return "marital"
        if u < self.marital + self.parental:
            return "parental"
        return "other"


def midpoint_gap_ok(parent_bin: int, child_bin: int, gaps: tuple[int, int]) -> bool:
    gap = AGE_MIDPOINTS[parent_bin] - AGE_MIDPOINTS[child_bin]
    return gaps[0] <= gap <= gaps[1]


def parent_age_window(child_lo: int, child_hi: int, gaps: tuple[int, int]) -> tuple[int, int]:
    """Ages every parent must lie in for all children to fit."""
    return child_lo + gaps[0], child_hi + gaps[1]


@lru_cache(maxsize=None)
def family_feasible(parent_bins: tuple[int, ...], child_lo: int, child_hi: int,
                    gaps: tuple[int, int]) -> bool:
    """Whether whole-year ages exist for parents in ``parent_bins`` and children
    whose bins jointly bound them to ``[child_lo, child_hi]``-compatible
    windows, with every parent-child gap inside ``gaps``.

    A child of bin [lo, hi] fits between parents aged a..b (a <= b) iff
    b - gap_max <= hi, a - gap_min >= lo and b - a <= gap_max - gap_min. Over
    all children this reduces to: every parent inside
    [max child lo + gap_min, min child hi + gap_max] and parents no further
    apart than gap_max - gap_min.
    """
    if child_lo == NO_CHILD_LO or not parent_bins:
        return True
    wlo, whi = parent_age_window(child_lo, child_hi, gaps)
    spans = []
    for b in parent_bins:
        lo, hi = AGE_RANGES[b]
        lo, hi = max(lo, wlo), min(hi, whi)
        if lo > hi:
            return False
        spans.append((lo, hi))
    if len(spans) == 2:
        (a_lo, a_hi), (b_lo, b_hi) = spans
        distance = max(0, a_lo - b_hi, b_lo - a_hi)
        if distance > gaps[1] - gaps[0]:
            return False
    return True


@lru_cache(maxsize=None)
def feasible_child_bins(parent_bins: tuple[int, ...], child_lo: int, child_hi: int,
                        gaps: tuple[int, int]) -> tuple[int, ...]:
    """Age bins a new child may come from, oldest first."""
    out = []
    for c in range(N_AGE_BINS - 1, -1, -1):
        if not all(midpoint_gap_ok(p, c, gaps) for p in parent_bins):
            continue
        lo, hi = AGE_RANGES[c]
        if family_feasible(parent_bins, max(child_lo, lo), min(child_hi, hi), gaps):
            out.append(c)
    return tuple(out)


def family_child_bins(family, gaps: tuple[int, int]) -> tuple[int, ...]:
    return feasible_child_bins(family.parent_bins, family.child_lo, family.child_hi, gaps)


# members each family type starts with
UNIT_SIZE = {
    FamilyType.COUPLE_ONLY: 2,
    FamilyType.COUPLE_WITH_CHILDREN: 3,
    FamilyType.ONE_PARENT: 2,
    FamilyType.OTHER_FAMILY: 2,
}
