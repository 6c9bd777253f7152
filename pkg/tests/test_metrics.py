import csv
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from popsynth.engine import synthesize_sa2
from popsynth.ingest import AgePyramid
from popsynth.metrics import (
    CategoricalVector,
    MetricError,
    build_comparison,
    compare,
    compare_sa2,
    cosine_similarity,
    freeman_tukey,
    summarize,
    write_report,
)


def vec(*values):
    return CategoricalVector.of(range(len(values)), values)


@pytest.mark.parametrize("o, e, expected", [
    ((1, 2, 3), (1, 2, 3), 1.0),
    ((1, 0), (0, 1), 0.0),
    ((1, 2, 3), (2, 4, 6), 1.0),
    ((1, 0), (1, 1), 1 / math.sqrt(2)),
])
def test_cosine_goldens(o, e, expected):
    assert abs(cosine_similarity(vec(*o), vec(*e)) - expected) <= 1e-12


@pytest.mark.parametrize("o, e, expected", [
    ((3, 1, 2), (3, 1, 2), 0.0),
    ((4,), (1,), 4.0),
    ((0, 1), (1, 0), 8.0),
])
def test_freeman_tukey_goldens(o, e, expected):
    stat, dof = freeman_tukey(vec(*o), vec(*e))
    assert abs(stat - expected) <= 1e-12
    assert dof == len(o) - 1


def test_errors():
    with pytest.raises(MetricError):
        cosine_similarity(vec(0, 0), vec(1, 1))
    with pytest.raises(MetricError):
        cosine_similarity(CategoricalVector.of("ab", [1, 2]), CategoricalVector.of("ba", [1, 2]))
    with pytest.raises(MetricError):
        freeman_tukey(CategoricalVector.of("ab", [1, 2]), CategoricalVector.of("abc", [1, 2, 3]))
    with pytest.raises(MetricError):
        CategoricalVector(("a",), (1.0, 2.0))


counts = st.lists(st.integers(0, 50), min_size=1, max_size=12)


@given(st.data())
def test_cosine_properties(data):
    n = data.draw(st.integers(1, 12))
    o = data.draw(st.lists(st.integers(0, 50), min_size=n, max_size=n))
    e = data.draw(st.lists(st.integers(0, 50), min_size=n, max_size=n))
    k = data.draw(st.integers(1, 20))
    if not any(o) or not any(e):
        return
    cs = cosine_similarity(vec(*o), vec(*e))
    assert 0.0 <= cs <= 1.0
    assert cs == pytest.approx(cosine_similarity(vec(*e), vec(*o)), abs=1e-12)
    assert cosine_similarity(vec(*[k * x for x in o]), vec(*e)) == pytest.approx(cs, abs=1e-12)
    assert freeman_tukey(vec(*o), vec(*e))[0] == pytest.approx(freeman_tukey(vec(*e), vec(*o))[0])


@given(st.data())
def test_dropping_always_zero_cells_never_lowers_similarity(data):
    n = data.draw(st.integers(1, 10))
    o = data.draw(st.lists(st.integers(1, 50), min_size=n, max_size=n))
    e = data.draw(st.lists(st.integers(1, 50), min_size=n, max_size=n))
    pad = data.draw(st.integers(0, 10))
    with_zeros = cosine_similarity(vec(*o, *[0] * pad), vec(*e, *[0] * pad))
    assert cosine_similarity(vec(*o), vec(*e)) >= with_zeros - 1e-15


def test_vector_lengths(truths):
    t = truths[0]
    pop = t.population
    assert len(build_comparison(t.persons, pop.persons, "person")[0].values) == 90
    assert len(build_comparison(t.households, pop.households, "household")[0].values) == 65
    assert len(build_comparison(t.ages, pop.persons, "age")[0].values) == 101
    with pytest.raises(MetricError):
        build_comparison(t.persons, pop.persons, "bogus")


def test_perfect_population_scores_one(truths, tmp_path):
    results = []
    for t in truths:
        pop = t.population
        rs = compare_sa2(t.sa2, t.persons, t.households, t.ages, pop.persons, pop.households)
        assert all(r.cosine == 1.0 and r.ft_statistic == 0.0 for r in rs)
        results += rs
    summary = write_report(tmp_path / "report.csv", results)
    for row in summary:
        assert row["cosine_ge_0.90"] == row["cosine_ge_0.99"] == len(truths)


def test_synthesized_household_cosine_is_one(truths):
    t = truths[2]
    pop = synthesize_sa2(t.persons, t.households, t.ages)
    assert compare(t.sa2, t.households, pop.households, "household").cosine == 1.0


def test_empty_sa2_skipped(tmp_path):
    from popsynth.ingest import HouseholdMarginal, PersonMarginal
    r = compare("E", PersonMarginal("E"), [], "person")
    assert r.skipped
    rows = write_report(tmp_path / "r.csv", [r, compare("E", AgePyramid("E"), [], "age"),
                                             compare("E", HouseholdMarginal("E"), [], "household")])
    with open(tmp_path / "r.csv") as fh:
        data = list(csv.DictReader(fh))
    assert [d["cosine"] for d in data] == ["skipped"] * 3
    assert all(row["skipped"] == 1 for row in rows)


def test_single_sa2_report(truths, tmp_path):
    t = truths[0]
    pop = t.population
    rs = compare_sa2(t.sa2, t.persons, t.households, t.ages, pop.persons, pop.households)
    write_report(tmp_path / "r.csv", rs)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "sa2,space,categories,cosine,ft_statistic,expected_total,observed_total"
    assert len(lines) == 4
    summary = (tmp_path / "r_summary.csv").read_text().splitlines()
    assert len(summary) == 4
    assert str(t.persons.total) in lines[1]


def test_summarize_counts_thresholds():
    from popsynth.metrics import SpaceResult
    rs = [SpaceResult(str(i), "person", 90, c, 0.0, 10, 10) for i, c in
          enumerate([0.5, 0.95, 0.999, None])]
    row = summarize(rs)[0]
    assert row["sa2s"] == 4 and row["skipped"] == 1
    assert row["cosine_ge_0.90"] == 2 and row["cosine_ge_0.99"] == 1
