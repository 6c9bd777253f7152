"""Population output files: persons.csv, families.csv and households.csv."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Iterable

from .engine.pools import SynthesisReport
from .engine.synthesize import Population
from .ingest import ParseError
from .schema import (
    FamilyRecord,
    FamilyType,
    HouseholdCategory,
    HouseholdComposition,
    HouseholdRecord,
    PersonRecord,
    Rel,
    Sex,
    age_bin_of,
    parse_size,
)

PERSONS_FILE = "persons.csv"
FAMILIES_FILE = "families.csv"
HOUSEHOLDS_FILE = "households.csv"

PERSON_COLUMNS = ["person_id", "age", "sex", "rel_status", "family_id", "household_id",
                  "partner_id", "father_id", "mother_id", "children_ids", "relative_ids"]
FAMILY_COLUMNS = ["family_id", "family_type", "household_id"]
HOUSEHOLD_COLUMNS = ["household_id", "sa2", "size", "composition", "family_count",
                     "primary_family_id"]
SPATIAL_COLUMNS = ["sa1", "address_id"]


def _writer(buf):
    return csv.writer(buf, lineterminator="\n")


def render_persons(persons: Iterable[PersonRecord]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    for p in persons:
        w.writerow([p.id, p.age_years, p.sex.value, p.rel.value, p.family_id or "",
                    p.household_id or "", p.partner_id or "", p.father_id or "",
                    p.mother_id or "", "|".join(p.children_ids), "|".join(p.relative_ids)])
    return buf.getvalue()


def render_families(families: Iterable[FamilyRecord]) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    for f in families:
        w.writerow([f.id, f.family_type.value, f.household_id])
    return buf.getvalue()


def household_row(hh: HouseholdRecord) -> list:
    return [hh.id, hh.sa2, hh.category.size_label, hh.composition.label, len(hh.families),
            hh.families[0].id if hh.families else ""]


def render_households(households: Iterable[HouseholdRecord], spatial: bool = False) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    for hh in households:
        row = household_row(hh)
        if spatial:
            row += [hh.sa1 or "", hh.address_id or ""]
        w.writerow(row)
    return buf.getvalue()


def render_population(pop: Population) -> tuple[str, str, str]:
    """Header-less CSV bodies for one SA2, in output order."""
    return (render_persons(pop.persons), render_families(pop.families),
            render_households(pop.households))


def header(columns: list[str]) -> str:
    return ",".join(columns) + "\n"


def write_population(out_dir, chunks: Iterable[tuple[str, str, str]]) -> None:
    """Write the three files from per-SA2 rendered chunks, in the order given."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [open(out / name, "w", newline="", encoding="utf-8")
             for name in (PERSONS_FILE, FAMILIES_FILE, HOUSEHOLDS_FILE)]
    try:
        for fh, cols in zip(files, (PERSON_COLUMNS, FAMILY_COLUMNS, HOUSEHOLD_COLUMNS)):
            fh.write(header(cols))
        for chunk in chunks:
            for fh, text in zip(files, chunk):
                fh.write(text)
    finally:
        for fh in files:
            fh.close()


def _read(path: Path, columns: list[str], optional: list[str] = ()) -> Iterable[tuple[int, dict]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        got = reader.fieldnames or []
        if got != columns and got != columns + list(optional):
            raise ParseError(path, 1, f"expected header {','.join(columns)}")
        for line, row in enumerate(reader, 2):
            yield line, row


def _ids(text: str) -> list[str]:
    return text.split("|") if text else []


def read_households(path) -> list[tuple[HouseholdRecord, dict]]:
    """Household records (without members) together with their raw rows."""
    path = Path(path)
    out = []
    for line, row in _read(path, HOUSEHOLD_COLUMNS, SPATIAL_COLUMNS):
        try:
            cat = HouseholdCategory(parse_size(row["size"]),
                                    HouseholdComposition.parse(row["composition"]))
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        hh = HouseholdRecord(row["household_id"], cat, row["sa2"])
        hh.sa1 = row.get("sa1") or None
        hh.address_id = row.get("address_id") or None
        out.append((hh, row))
    return out


def write_households(path, rows: Iterable[tuple[HouseholdRecord, dict]], spatial: bool) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(HOUSEHOLD_COLUMNS + (SPATIAL_COLUMNS if spatial else []))
        for hh, row in rows:
            out = [row[c] for c in HOUSEHOLD_COLUMNS]
            if spatial:
                out += [hh.sa1 or "", hh.address_id or ""]
            w.writerow(out)


def read_population(directory) -> dict[str, Population]:
    """Rebuild populations, keyed by SA2, from the three output files."""
    d = Path(directory)
    households = {}
    primary_of = {}
    order = defaultdict(list)
    for hh, row in read_households(d / HOUSEHOLDS_FILE):
        households[hh.id] = hh
        primary_of[hh.id] = row["primary_family_id"]
        order[hh.sa2].append(hh)

    families = {}
    fam_order = defaultdict(list)
    for line, row in _read(d / FAMILIES_FILE, FAMILY_COLUMNS):
        hh = households.get(row["household_id"])
        if hh is None:
            raise ParseError(d / FAMILIES_FILE, line, f"unknown household {row['household_id']}")
        try:
            ft = FamilyType(row["family_type"])
        except ValueError as exc:
            raise ParseError(d / FAMILIES_FILE, line, str(exc)) from None
        fam = FamilyRecord(ft, id=row["family_id"], household_id=hh.id)
        families[fam.id] = fam
        fam_order[hh.id].append(fam)
    for hid, fams in fam_order.items():
        first = primary_of[hid]
        households[hid].families = sorted(fams, key=lambda f: f.id != first)

    persons = defaultdict(list)
    path = d / PERSONS_FILE
    for line, row in _read(path, PERSON_COLUMNS):
        try:
            age = int(row["age"])
            p = PersonRecord(row["person_id"], sex=Sex(row["sex"]), age_bin=age_bin_of(age),
                             rel=Rel(row["rel_status"]), age_years=age,
                             family_id=row["family_id"] or None,
                             household_id=row["household_id"] or None,
                             partner_id=row["partner_id"] or None,
                             father_id=row["father_id"] or None,
                             mother_id=row["mother_id"] or None,
                             children_ids=_ids(row["children_ids"]),
                             relative_ids=_ids(row["relative_ids"]))
        except ValueError as exc:
            raise ParseError(path, line, str(exc)) from None
        hh = households.get(p.household_id)
        if hh is None:
            raise ParseError(path, line, f"unknown household {p.household_id}")
        hh.members.append(p)
        if p.family_id:
            fam = families.get(p.family_id)
            if fam is None:
                raise ParseError(path, line, f"unknown family {p.family_id}")
            fam.add(p)
        persons[hh.sa2].append(p)

    out = {}
    for sa2 in sorted(order):
        hhs = order[sa2]
        fams = [f for hh in hhs for f in hh.families]
        out[sa2] = Population(persons[sa2], fams, hhs, SynthesisReport(sa2))
    return out
