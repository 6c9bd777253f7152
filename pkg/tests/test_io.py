import pytest

from popsynth.engine import check_population, synthesize_sa2
from popsynth.ingest import ParseError
from popsynth.io import (
    HOUSEHOLD_COLUMNS,
    read_households,
    read_population,
    render_population,
    write_households,
    write_population,
)


@pytest.fixture(scope="module")
def populations(truths):
    return {t.sa2: synthesize_sa2(t.persons, t.households, t.ages) for t in truths[:4]}


def test_round_trip(tmp_path, populations):
    write_population(tmp_path, (render_population(populations[k]) for k in sorted(populations)))
    back = read_population(tmp_path)
    assert sorted(back) == sorted(populations)
    for sa2, pop in back.items():
        orig = populations[sa2]
        assert render_population(pop) == render_population(orig)
        assert check_population(pop.persons, pop.families, pop.households) == []


def test_headers(tmp_path, populations):
    write_population(tmp_path, [])
    assert (tmp_path / "persons.csv").read_text() == (
        "person_id,age,sex,rel_status,family_id,household_id,partner_id,father_id,mother_id,"
        "children_ids,relative_ids\n")
    assert (tmp_path / "families.csv").read_text() == "family_id,family_type,household_id\n"
    assert (tmp_path / "households.csv").read_text() == ",".join(HOUSEHOLD_COLUMNS) + "\n"


def test_spatial_household_columns(tmp_path, populations):
    pop = next(iter(populations.values()))
    write_population(tmp_path, [render_population(pop)])
    rows = read_households(tmp_path / "households.csv")
    for i, (hh, _) in enumerate(rows):
        hh.sa1, hh.address_id = "S1", f"A{i}"
    write_households(tmp_path / "out.csv", rows, spatial=True)
    back = read_households(tmp_path / "out.csv")
    assert [(h.sa1, h.address_id) for h, _ in back] == [("S1", f"A{i}") for i in range(len(rows))]
    assert (tmp_path / "out.csv").read_text().splitlines()[0].endswith(",sa1,address_id")


def test_bad_household_file(tmp_path):
    (tmp_path / "households.csv").write_text(",".join(HOUSEHOLD_COLUMNS) + "\nX:H0,X,2,Bogus,1,\n")
    with pytest.raises(ParseError):
        read_households(tmp_path / "households.csv")
    (tmp_path / "h2.csv").write_text("a,b\n")
    with pytest.raises(ParseError):
        read_households(tmp_path / "h2.csv")
