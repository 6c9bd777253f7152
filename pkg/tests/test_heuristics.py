import random
from collections import Counter

import pytest

from popsynth.engine import Heuristics, Rho
from popsynth.engine.heuristics import (
    family_feasible,
    feasible_child_bins,
    midpoint_gap_ok,
    parent_age_window,
)
from popsynth.schema import AGE_RANGES

GAPS = (15, 45)


def test_defaults():
    h = Heuristics()
    assert h.gaps == (15, 45)
    assert h.couple_partner_bins == (0, -1)
    assert h.nonprimary_couple_child_prob == 0.5
    assert h.max_retries == 100


@pytest.mark.parametrize("kw", [
    {"parent_child_gap_min": 45, "parent_child_gap_max": 15},
    {"nonprimary_couple_child_prob": 1.5},
    {"couple_partner_bins": ()},
    {"max_retries": 0},
    {"eight_plus_surplus": -1},
])
def test_heuristics_validation(kw):
    with pytest.raises(ValueError):
        Heuristics(**kw)


def test_partner_bins_clipped_to_range():
    h = Heuristics()
    assert h.partner_bins(3) == (3, 2)
    assert h.partner_bins(0) == (0,)


def test_midpoint_gap():
    assert midpoint_gap_ok(3, 1, GAPS)      # 47 - 19.5 = 27.5
    assert not midpoint_gap_ok(1, 1, GAPS)  # 0
    assert midpoint_gap_ok(2, 0, GAPS)      # 32 - 7 = 25
    assert not midpoint_gap_ok(6, 0, GAPS)  # 92 - 7 = 85


def test_parent_window():
    assert parent_age_window(0, 14, GAPS) == (15, 59)


def brute_feasible(parent_bins, child_bins):
    import itertools
    pranges = [range(AGE_RANGES[b][0], AGE_RANGES[b][1] + 1) for b in parent_bins]
    for ages in itertools.product(*pranges):
        ok = True
        for cb in child_bins:
            lo, hi = AGE_RANGES[cb]
            if not any(all(15 <= a - c <= 45 for a in ages) for c in range(lo, hi + 1)):
                ok = False
                break
        if ok:
            return True
    return False


@pytest.mark.parametrize("parents", [(b,) for b in range(8)] + [(a, b) for a in range(1, 7)
                                                                for b in range(1, 7)])
def test_family_feasible_matches_brute_force_single_child(parents):
    for cb in range(8):
        lo, hi = AGE_RANGES[cb]
        assert family_feasible(parents, lo, hi, GAPS) == brute_feasible(parents, [cb])


def test_feasible_child_bins_oldest_first():
    bins = feasible_child_bins((3,), -1000, 1000, GAPS)
    assert bins == tuple(sorted(bins, reverse=True))
    assert 1 in bins and 0 in bins
    assert feasible_child_bins((1,), -1000, 1000, GAPS) == ()


def test_rho_validation_and_draw():
    with pytest.raises(ValueError):
        Rho(0.5, 0.4, 0.2)
    with pytest.raises(ValueError):
        Rho(1.2, -0.2, 0.0)
    rho = Rho(0.6, 0.3, 0.1)
    rng = random.Random(1)
    got = Counter(rho.draw(rng) for _ in range(20000))
    assert abs(got["marital"] / 20000 - 0.6) < 0.02
    assert abs(got["parental"] / 20000 - 0.3) < 0.02
    assert abs(got["other"] / 20000 - 0.1) < 0.02
