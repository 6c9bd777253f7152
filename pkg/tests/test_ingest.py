import logging

import pytest

from popsynth.ingest import (
    AgePyramid,
    CleanReport,
    HouseholdMarginal,
    InconsistentInputError,
    ParseError,
    PersonMarginal,
    ValidationError,
    clean,
    clean_postcondition_violations,
    household_target_sizes,
    implied_person_total,
    parse_age_pyramid,
    parse_household_marginal,
    parse_person_marginal,
    read_input_dir,
    write_age_pyramids,
    write_clean_reports,
    write_household_marginals,
    write_person_marginals,
)
from popsynth.schema import Rel, Sex

from conftest import flat_pyramid, hcat, hm, pcat, pm, random_inconsistent

PERSON_HEADER = "sa2,sex,age_bin,rel_status,count\n"
HOUSEHOLD_HEADER = "sa2,size,composition,count\n"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_person_row(tmp_path):
    path = write(tmp_path, "p.csv", PERSON_HEADER + "SA2X,Male,25-39,Married,120\n")
    out = parse_person_marginal(path)
    assert out["SA2X"].counts == {pcat("Male", "25-39", "Married"): 120}


def test_parse_person_drops_zero_invalid(tmp_path):
    path = write(tmp_path, "p.csv", PERSON_HEADER + "SA2X,Male,0-14,Married,0\n"
                 "SA2X,Male,0-14,U15Child,4\n")
    assert parse_person_marginal(path)["SA2X"].counts == {pcat("Male", "0-14", "U15Child"): 4}


def test_parse_person_rejects_nonzero_invalid(tmp_path):
    path = write(tmp_path, "p.csv", PERSON_HEADER + "SA2X,Male,0-14,Married,5\n")
    with pytest.raises(ValidationError) as err:
        parse_person_marginal(path)
    assert err.value.line == 2


@pytest.mark.parametrize("row, error", [
    ("SA2X,Male,25-39,Married,-1", ValidationError),
    ("SA2X,Male,25-39,Married,x", ParseError),
    ("SA2X,Male,25-39,Married", ParseError),
    ("SA2X,Other,25-39,Married,3", ParseError),
    ("SA2X,Male,20-30,Married,3", ParseError),
])
def test_parse_person_errors_carry_line(tmp_path, row, error):
    path = write(tmp_path, "p.csv", PERSON_HEADER + "SA2X,Female,25-39,Married,1\n" + row + "\n")
    with pytest.raises(error) as err:
        parse_person_marginal(path)
    assert err.value.line == 3
    assert ":3:" in str(err.value) or "line 3" in str(err.value)


def test_parse_rejects_bad_header(tmp_path):
    path = write(tmp_path, "p.csv", "a,b,c\n")
    with pytest.raises(ParseError):
        parse_person_marginal(path)


def test_parse_household_row(tmp_path):
    path = write(tmp_path, "h.csv", HOUSEHOLD_HEADER + "SA2X,4,1F-CoupleWithChildren,310\n"
                 "SA2X,8+,1F-CoupleWithChildren,2\n")
    counts = parse_household_marginal(path)["SA2X"].counts
    assert counts == {hcat(4, "1F-CoupleWithChildren"): 310, hcat(8, "1F-CoupleWithChildren"): 2}


def test_parse_household_rejects_invalid_category(tmp_path):
    path = write(tmp_path, "h.csv", HOUSEHOLD_HEADER + "SA2X,1,GroupHH,3\n")
    with pytest.raises(ValidationError):
        parse_household_marginal(path)


def test_empty_file_warns(tmp_path, caplog):
    path = write(tmp_path, "h.csv", "")
    with caplog.at_level(logging.WARNING):
        assert parse_household_marginal(path) == {}
    assert "empty" in caplog.text


def test_parse_age_pyramid(tmp_path):
    path = write(tmp_path, "a.csv", "sa2,age,count\nX,0,3\nX,100+,2\nX,100,1\n")
    pyr = parse_age_pyramid(path)["X"]
    assert pyr.counts[0] == 3 and pyr.counts[100] == 3 and pyr.total == 6
    bad = write(tmp_path, "b.csv", "sa2,age,count\nX,101,3\n")
    with pytest.raises(ValidationError):
        parse_age_pyramid(bad)


def test_marginal_files_round_trip(tmp_path, truths):
    write_person_marginals(tmp_path / "person_marginal.csv", [t.persons for t in truths])
    write_household_marginals(tmp_path / "household_marginal.csv", [t.households for t in truths])
    write_age_pyramids(tmp_path / "age_pyramid.csv", [t.ages for t in truths])
    ps, hs, ages = read_input_dir(tmp_path)
    for t in truths:
        assert ps[t.sa2].counts == t.persons.counts
        assert hs[t.sa2].counts == t.households.counts
        assert ages[t.sa2].counts == t.ages.counts


@pytest.mark.parametrize("counts, surplus, total", [
    ({(2, "1F-CoupleOnly"): 10}, 0, 20),
    ({(1, "LonePersonHH"): 5, (3, "1F-CoupleWithChildren"): 2}, 0, 11),
    ({("8+", "1F-CoupleWithChildren"): 1}, 0, 8),
    ({("8+", "1F-CoupleWithChildren"): 2}, 3, 19),
    ({(2, "1F-CoupleOnly"): 1}, 3, 2),
])
def test_implied_person_total(counts, surplus, total):
    assert implied_person_total(hm(counts), surplus) == total


def test_eight_plus_surplus_dealt_round_robin():
    h = hm({("8+", "1F-CoupleWithChildren"): 2, (2, "1F-CoupleOnly"): 1})
    sizes = [n for _, n in household_target_sizes(h, 3)]
    assert sorted(sizes) == [2, 9, 10]


def consistent():
    h = hm({(1, "LonePersonHH"): 2, (2, "GroupHH"): 1, (2, "1F-CoupleOnly"): 1,
            (3, "1F-CoupleWithChildren"): 1, (2, "1F-OneParent"): 1, (2, "1F-OtherFamily"): 1})
    p = pm({("Male", "70-84", "LonePerson"): 1, ("Female", "25-39", "LonePerson"): 1,
            ("Male", "15-24", "GroupHousehold"): 2,
            ("Male", "40-54", "Married"): 2, ("Female", "40-54", "Married"): 2,
            ("Male", "0-14", "U15Child"): 1, ("Female", "15-24", "Student"): 1,
            ("Female", "40-54", "LoneParent"): 1,
            ("Male", "55-69", "Relative"): 1, ("Female", "55-69", "Relative"): 1})
    return p, h


def test_clean_consistent_is_fixed_point():
    p, h = consistent()
    a = flat_pyramid(p)
    p2, a2, report = clean(p, h, a)
    assert p2.counts == p.counts and a2.counts == a.counts
    assert report.is_empty
    assert clean_postcondition_violations(p2, h, a2) == []


def test_clean_balances_married():
    h = hm({(2, "1F-CoupleOnly"): 9})
    p = pm({("Male", "40-54", "Married"): 10, ("Female", "40-54", "Married"): 8})
    p2, _, report = clean(p, h)
    males = p2.rel_total(Rel.MARRIED, Sex.MALE)
    females = p2.rel_total(Rel.MARRIED, Sex.FEMALE)
    assert females >= 9 and females == males
    assert p2.total == 18
    assert "married_balanced" in report.rules


def test_clean_scales_total_down():
    h = hm({(1, "LonePersonHH"): 20, (2, "1F-OtherFamily"): 39})
    p = pm({("Male", "55-69", "LonePerson"): 20, ("Male", "25-39", "Relative"): 50,
            ("Female", "25-39", "Relative"): 30})
    assert p.total == 100 and implied_person_total(h) == 98
    p2, _, report = clean(p, h)
    assert p2.total == 98
    assert report.person_total_before == 100 and report.person_total_after == 98
    assert clean_postcondition_violations(p2, h) == []


def test_clean_rescales_pyramid_to_bins():
    p, h = consistent()
    a = AgePyramid("X", [1] * 101)
    _, a2, report = clean(p, h, a)
    assert a2.bin_totals() == p.bin_totals()
    assert report.age_deltas


def test_clean_empty_households_with_persons_fails():
    with pytest.raises(InconsistentInputError):
        clean(pm({("Male", "25-39", "LonePerson"): 1}), HouseholdMarginal("X"))


def test_clean_never_touches_household_marginal():
    p, h, a = random_inconsistent(3)
    before = dict(h.counts)
    clean(p, h, a)
    assert h.counts == before


@pytest.mark.parametrize("seed", range(60))
def test_clean_postconditions_and_idempotence(seed):
    p, h, a = random_inconsistent(seed)
    p1, a1, _ = clean(p, h, a)
    assert clean_postcondition_violations(p1, h, a1) == []
    p2, a2, report = clean(p1, h, a1)
    assert p2.counts == p1.counts and a2.counts == a1.counts
    assert report.is_empty


def test_clean_fills_empty_stratum_from_area_shape():
    h = hm({(2, "1F-OtherFamily"): 2})
    p = pm({("Male", "25-39", "Married"): 4})
    p2, _, _ = clean(p, h)
    assert p2.rel_total(Rel.RELATIVE) == 4
    assert clean_postcondition_violations(p2, h) == []


def test_write_clean_reports(tmp_path):
    p, h, a = random_inconsistent(5)
    reports = [clean(p, h, a)[2], CleanReport("Y")]
    path = tmp_path / "clean_report.csv"
    write_clean_reports(path, reports)
    lines = path.read_text().splitlines()
    assert lines[0] == "sa2,kind,key,before,after,delta"
    assert any(line.startswith("Y,total,persons,0,0,0") for line in lines)
