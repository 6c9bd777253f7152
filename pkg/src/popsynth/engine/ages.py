"""Whole-year ages drawn from the single-year age pyramid."""

from __future__ import annotations

from typing import Iterable, Sequence

from ..schema import AGE_RANGES, HouseholdRecord
from .heuristics import Heuristics, parent_age_window
from .pools import SynthesisReport


class AgeSampler:
    """Draws ages from a pyramid without replacement.

    Once the pyramid counts inside a requested range are used up, draws fall
    back to the original counts (with replacement) and then to a uniform
    draw; both fallbacks are counted on the report.
    """

    def __init__(self, counts: Sequence[int], rng, report: SynthesisReport | None = None):
        self.base = list(counts)
        self.remaining = list(counts)
        self.rng = rng
        self.report = report

    def _walk(self, seg: list[int], lo: int, total: int) -> int:
        r = self.rng.randrange(total)
        for i, n in enumerate(seg):
            if r < n:
                return lo + i
            r -= n
        raise AssertionError("unreachable")

    def draw(self, lo: int, hi: int) -> int:
        seg = self.remaining[lo:hi + 1]
        total = sum(seg)
        if total:
            age = self._walk(seg, lo, total)
            self.remaining[age] -= 1
            return age
        seg = self.base[lo:hi + 1]
        total = sum(seg)
        if total:
            self._note("age_with_replacement")
            return self._walk(seg, lo, total)
        self._note("age_uniform")
        return self.rng.randint(lo, hi)

    def _note(self, kind: str) -> None:
        if self.report is not None:
            self.report.fallback(kind)


def _clip(lo: int, hi: int, bin_: int) -> tuple[int, int]:
    blo, bhi = AGE_RANGES[bin_]
    return max(lo, blo), min(hi, bhi)


def age_family(family, sampler: AgeSampler, heuristics: Heuristics) -> bool:
    """Give a family's parents and children ages that respect the gap rule.

    Parents are drawn inside the window every child can live with; the
    second parent stays within the spread the gap rule allows of the first,
    and each child is then drawn inside the range all parents admit.
    Returns False if some range came out empty and the person's whole bin
    was used instead.
    """
    gmin, gmax = heuristics.gaps
    spread = gmax - gmin
    parents = family.parents()
    kids = family.children()
    ok = True
    if not parents or not kids:
        for m in parents:
            m.age_years = sampler.draw(*AGE_RANGES[m.age_bin])
        return True
    wlo, whi = parent_age_window(family.child_lo, family.child_hi, heuristics.gaps)
    spans = [_clip(wlo, whi, p.age_bin) for p in parents]
    if len(parents) == 2:
        (a_lo, a_hi), (b_lo, b_hi) = spans
        first = _clip(max(a_lo, b_lo - spread), min(a_hi, b_hi + spread), parents[0].age_bin)
        if first[0] > first[1]:
            first = spans[0]
        spans[0] = first
    ages = []
    for i, p in enumerate(parents):
        lo, hi = spans[i]
        if i == 1:
            lo, hi = max(lo, ages[0] - spread), min(hi, ages[0] + spread)
        if lo > hi:
            ok = False
            lo, hi = AGE_RANGES[p.age_bin]
        p.age_years = sampler.draw(lo, hi)
        ages.append(p.age_years)
    pmin, pmax = min(ages), max(ages)
    for c in kids:
        lo, hi = _clip(pmax - gmax, pmin - gmin, c.age_bin)
        if lo > hi:
            ok = False
            lo, hi = AGE_RANGES[c.age_bin]
        c.age_years = sampler.draw(lo, hi)
    return ok


def assign_ages(households: Iterable[HouseholdRecord], pyramid_counts: Sequence[int],
                heuristics: Heuristics, rng, report: SynthesisReport | None = None) -> None:
    """Set ``age_years`` on every member of ``households``.

    Families with parent-child links are aged first so the constrained draws
    see the fullest pyramid; everyone else is drawn from their own bin.
    """
    households = list(households)
    sampler = AgeSampler(pyramid_counts, rng, report)
    for hh in households:
        for fam in hh.families:
            if fam.n_children and fam.parent_bins:
                if not age_family(fam, sampler, heuristics) and report is not None:
                    report.fallback("age_gap_unmet")
    for hh in households:
        for m in hh.members:
            if m.age_years is None:
                m.age_years = sampler.draw(*AGE_RANGES[m.age_bin])
