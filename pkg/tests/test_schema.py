import itertools

import pytest

from popsynth.schema import (
    AGE_BIN_LABELS,
    AGE_RANGES,
    COMPOSITIONS,
    HOUSEHOLD_CATEGORIES,
    PERSON_CATEGORIES,
    VALID_HOUSEHOLD_CATEGORIES,
    VALID_PERSON_CATEGORIES,
    FamilyType,
    HouseholdCategory,
    HouseholdComposition,
    HouseholdKind,
    Rel,
    Sex,
    age_bin_of,
    is_valid_household_category,
    is_valid_person_category,
    parse_size,
)

from conftest import hcat, pcat


def test_age_bins_cover_0_to_100():
    assert len(AGE_BIN_LABELS) == 8
    ages = [a for lo, hi in AGE_RANGES for a in range(lo, hi + 1)]
    assert ages == list(range(101))
    for b, (lo, hi) in enumerate(AGE_RANGES):
        assert age_bin_of(lo) == b and age_bin_of(hi) == b


def test_age_bin_of_open_top_and_negative():
    assert age_bin_of(104) == 7
    with pytest.raises(ValueError):
        age_bin_of(-1)


def test_enumerations_have_stated_sizes():
    assert len(Sex) == 2
    assert len(Rel) == 8
    assert len(FamilyType) == 4
    assert len(COMPOSITIONS) == 14
    assert len(PERSON_CATEGORIES) == 128
    assert len(HOUSEHOLD_CATEGORIES) == 112


def test_valid_person_count_is_90():
    assert sum(map(is_valid_person_category, PERSON_CATEGORIES)) == 90
    assert len(VALID_PERSON_CATEGORIES) == 90


def test_valid_household_count_is_65():
    assert sum(map(is_valid_household_category, HOUSEHOLD_CATEGORIES)) == 65
    assert len(VALID_HOUSEHOLD_CATEGORIES) == 65


@pytest.mark.parametrize("cat, valid", [
    (("Male", "0-14", "Married"), False),
    (("Female", "15-24", "Student"), True),
    (("Male", "25-39", "Student"), False),
    (("Female", "0-14", "Relative"), True),
    (("Male", "0-14", "U15Child"), True),
    (("Male", "15-24", "U15Child"), False),
    (("Female", "0-14", "GroupHousehold"), False),
    (("Female", "100+", "LonePerson"), True),
])
def test_person_validity_examples(cat, valid):
    assert is_valid_person_category(pcat(*cat)) is valid


def test_person_validity_rule_by_brute_force():
    for sex, b, rel in itertools.product(Sex, range(8), Rel):
        young = b == 0
        expected = not ((young and rel not in (Rel.U15_CHILD, Rel.RELATIVE))
                        or (rel is Rel.U15_CHILD and not young)
                        or (rel is Rel.STUDENT and b != 1))
        assert is_valid_person_category(pcat(sex.value, AGE_BIN_LABELS[b], rel.value)) is expected


@pytest.mark.parametrize("size, comp, valid", [
    (2, "3F-CoupleOnly", False),
    (2, "3F-OneParent", False),
    (1, "LonePersonHH", True),
    (2, "LonePersonHH", False),
    (1, "GroupHH", False),
    (2, "1F-CoupleOnly", True),
    (2, "1F-CoupleWithChildren", False),
    (3, "1F-CoupleWithChildren", True),
    (4, "2F-OneParent", True),
    (6, "3F-CoupleOnly", True),
    (7, "3F-CoupleWithChildren", True),
    (6, "3F-CoupleWithChildren", False),
])
def test_household_validity_examples(size, comp, valid):
    assert is_valid_household_category(hcat(size, comp)) is valid


def test_composition_labels_round_trip():
    for comp in COMPOSITIONS:
        assert HouseholdComposition.parse(comp.label) == comp


@pytest.mark.parametrize("label", ["4F-CoupleOnly", "1F-Unknown", "Family", ""])
def test_composition_parse_rejects(label):
    with pytest.raises(ValueError):
        HouseholdComposition.parse(label)


def test_min_size():
    assert HouseholdComposition.parse("LonePersonHH").min_size == 1
    assert HouseholdComposition.parse("GroupHH").min_size == 2
    assert HouseholdComposition.parse("2F-CoupleWithChildren").min_size == 5
    assert HouseholdComposition.parse("3F-OtherFamily").min_size == 6


def test_size_labels():
    assert parse_size("8+") == 8
    assert parse_size("3") == 3
    assert hcat("8+", "1F-CoupleWithChildren").size_label == "8+"
    with pytest.raises(ValueError):
        parse_size("9")
    with pytest.raises(ValueError):
        parse_size("0")


def test_family_household_kind():
    comp = HouseholdComposition.parse("2F-OneParent")
    assert comp.kind is HouseholdKind.FAMILY
    assert comp.family_count == 2
    assert comp.primary is FamilyType.ONE_PARENT
    assert HouseholdCategory(4, comp) in VALID_HOUSEHOLD_CATEGORIES
