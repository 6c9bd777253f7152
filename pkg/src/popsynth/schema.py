"""Category spaces for persons and households, and the output entity model.

Person categories are (sex, age bin, relationship status) triples; household
categories are (size, composition) pairs. Only a subset of each cross-product
is structurally possible; the ``is_valid_*`` predicates define that subset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

AGE_BIN_LABELS = ("0-14", "15-24", "25-39", "40-54", "55-69", "70-84", "85-99", "100+")
AGE_RANGES = ((0, 14), (15, 24), (25, 39), (40, 54), (55, 69), (70, 84), (85, 99), (100, 100))
N_AGE_BINS = len(AGE_BIN_LABELS)
MAX_AGE = 100
# the open 100+ bin is represented by the single age 100
AGE_MIDPOINTS = tuple((lo + hi) / 2 for lo, hi in AGE_RANGES)

MAX_SIZE = 8  # the "8+" class


def age_bin_of(age: int) -> int:
    if age < 0:
        raise ValueError(f"negative age {age}")
    if age >= 100:
        return 7
    if age < 15:
        return 0
    if age < 25:
        return 1
    return 2 + (age - 25) // 15


def parse_age_bin(label: str) -> int:
    try:
        return AGE_BIN_LABELS.index(label)
    except ValueError:
        raise ValueError(f"unknown age bin {label!r}") from None


class Sex(enum.Enum):
    MALE = "Male"
    FEMALE = "Female"


class Rel(enum.Enum):
    MARRIED = "Married"
    LONE_PARENT = "LoneParent"
    U15_CHILD = "U15Child"
    STUDENT = "Student"
    O15_CHILD = "O15Child"
    RELATIVE = "Relative"
    GROUP_HOUSEHOLD = "GroupHousehold"
    LONE_PERSON = "LonePerson"


CHILD_RELS = frozenset({Rel.U15_CHILD, Rel.STUDENT, Rel.O15_CHILD})
PARENT_RELS = frozenset({Rel.MARRIED, Rel.LONE_PARENT})


class FamilyType(enum.Enum):
    COUPLE_ONLY = "CoupleOnly"
    COUPLE_WITH_CHILDREN = "CoupleWithChildren"
    ONE_PARENT = "OneParent"
    OTHER_FAMILY = "OtherFamily"


class HouseholdKind(enum.Enum):
    LONE_PERSON = "LonePersonHH"
    GROUP = "GroupHH"
    FAMILY = "FamilyHH"


class PersonCategory(NamedTuple):
    sex: Sex
    age_bin: int
    rel: Rel

    @property
    def label(self) -> str:
        return f"{self.sex.value},{AGE_BIN_LABELS[self.age_bin]},{self.rel.value}"


class HouseholdComposition(NamedTuple):
    kind: HouseholdKind
    family_count: int = 0
    primary: FamilyType | None = None

    @property
    def label(self) -> str:
        if self.kind is HouseholdKind.FAMILY:
            return f"{self.family_count}F-{self.primary.value}"
        return self.kind.value

    @classmethod
    def parse(cls, label: str) -> HouseholdComposition:
        if label == HouseholdKind.LONE_PERSON.value:
            return LONE_PERSON_HH
        if label == HouseholdKind.GROUP.value:
            return GROUP_HH
        count, sep, ftype = label.partition("F-")
        if not sep or count not in ("1", "2", "3"):
            raise ValueError(f"unknown household composition {label!r}")
        try:
            return cls(HouseholdKind.FAMILY, int(count), FamilyType(ftype))
        except ValueError:
            raise ValueError(f"unknown household composition {label!r}") from None

    @property
    def min_size(self) -> int:
        if self.kind is HouseholdKind.LONE_PERSON:
            return 1
        if self.kind is HouseholdKind.GROUP:
            return 2
        return FAMILY_BASE_SIZE[self.primary] + 2 * (self.family_count - 1)


LONE_PERSON_HH = HouseholdComposition(HouseholdKind.LONE_PERSON)
GROUP_HH = HouseholdComposition(HouseholdKind.GROUP)

# members of the smallest unit of each family type
FAMILY_BASE_SIZE = {
    FamilyType.COUPLE_ONLY: 2,
    FamilyType.COUPLE_WITH_CHILDREN: 3,
    FamilyType.ONE_PARENT: 2,
    FamilyType.OTHER_FAMILY: 2,
}

COMPOSITIONS = (LONE_PERSON_HH, GROUP_HH) + tuple(
    HouseholdComposition(HouseholdKind.FAMILY, n, ft) for n in (1, 2, 3) for ft in FamilyType
)


class HouseholdCategory(NamedTuple):
    size: int  # 1..8, where 8 is the open "8+" class
    composition: HouseholdComposition

    @property
    def size_label(self) -> str:
        return "8+" if self.size >= MAX_SIZE else str(self.size)

    @property
    def label(self) -> str:
        return f"{self.size_label},{self.composition.label}"


def parse_size(label: str) -> int:
    if label in ("8+", "8"):
        return MAX_SIZE
    if label in ("1", "2", "3", "4", "5", "6", "7"):
        return int(label)
    raise ValueError(f"unknown household size {label!r}")


def is_valid_person_category(c: PersonCategory) -> bool:
    """Whether a (sex, age bin, relationship) cell can hold anyone.

    Under-15s may only be dependent children or relatives, dependent children
    are exactly the under-15s and full-time students are aged 15-24.
    """
    if c.age_bin == 0 and c.rel not in (Rel.U15_CHILD, Rel.RELATIVE):
        return False
    if c.rel is Rel.U15_CHILD and c.age_bin != 0:
        return False
    if c.rel is Rel.STUDENT and c.age_bin != 1:
        return False
    return True


def is_valid_household_category(c: HouseholdCategory) -> bool:
    comp = c.composition
    if comp.kind is HouseholdKind.LONE_PERSON:
        return c.size == 1
    return c.size >= comp.min_size


PERSON_CATEGORIES = tuple(
    PersonCategory(sex, b, rel) for sex in Sex for b in range(N_AGE_BINS) for rel in Rel
)
VALID_PERSON_CATEGORIES = tuple(c for c in PERSON_CATEGORIES if is_valid_person_category(c))
HOUSEHOLD_CATEGORIES = tuple(
    HouseholdCategory(size, comp) for comp in COMPOSITIONS for size in range(1, MAX_SIZE + 1)
)
VALID_HOUSEHOLD_CATEGORIES = tuple(
    c for c in HOUSEHOLD_CATEGORIES if is_valid_household_category(c)
)


@dataclass(slots=True, eq=False)
class PersonRecord:
    id: str
    sex: Sex | None = None
    age_bin: int | None = None
    rel: Rel | None = None
    age_years: int | None = None
    family_id: str | None = None
    household_id: str | None = None
    partner_id: str | None = None
    father_id: str | None = None
    mother_id: str | None = None
    children_ids: list[str] = field(default_factory=list)
    relative_ids: list[str] = field(default_factory=list)

    @property
    def category(self) -> PersonCategory:
        return PersonCategory(self.sex, self.age_bin, self.rel)


class FamilyRecord:
    """A family unit under construction or in the final population.

    ``parent_bins`` and the child age-bound window (``child_lo``,
    ``child_hi``) are cached so gap feasibility can be checked without
    walking the member list.
    """

    __slots__ = ("id", "family_type", "household_id", "members", "parent_bins",
                 "child_lo", "child_hi", "n_children")

    def __init__(self, family_type: FamilyType, members: list[PersonRecord] | None = None,
                 id: str | None = None, household_id: str | None = None):
        self.id = id
        self.family_type = family_type
        self.household_id = household_id
        self.members: list[PersonRecord] = []
        self.parent_bins: tuple[int, ...] = ()
        self.child_lo = -1000
        self.child_hi = 1000
        self.n_children = 0
        for m in members or ():
            self.add(m)

    def add(self, person: PersonRecord) -> None:
        self.members.append(person)
        rel = person.rel
        if rel in PARENT_RELS:
            self.parent_bins = self.parent_bins + (person.age_bin,)
        elif rel in CHILD_RELS:
            lo, hi = AGE_RANGES[person.age_bin]
            if lo > self.child_lo:
                self.child_lo = lo
            if hi < self.child_hi:
                self.child_hi = hi
            self.n_children += 1

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def member_ids(self) -> list[str]:
        return [m.id for m in self.members]

    def parents(self) -> list[PersonRecord]:
        return [m for m in self.members if m.rel in PARENT_RELS]

    def children(self) -> list[PersonRecord]:
        return [m for m in self.members if m.rel in CHILD_RELS]

    def __repr__(self) -> str:
        return f"FamilyRecord({self.id!r}, {self.family_type.value}, size={self.size})"


class HouseholdRecord:
    __slots__ = ("id", "category", "target_size", "families", "members", "sa2", "sa1",
                 "address_id")

    def __init__(self, id: str, category: HouseholdCategory, sa2: str,
                 target_size: int | None = None):
        self.id = id
        self.category = category
        self.target_size = category.size if target_size is None else target_size
        self.families: list[FamilyRecord] = []
        self.members: list[PersonRecord] = []
        self.sa2 = sa2
        self.sa1: str | None = None
        self.address_id: str | None = None

    @property
    def composition(self) -> HouseholdComposition:
        return self.category.composition

    @property
    def free(self) -> int:
        return self.target_size - len(self.members)

    @property
    def family_slots(self) -> int:
        return self.category.composition.family_count - len(self.families)

    @property
    def is_complete(self) -> bool:
        return len(self.members) >= self.target_size and self.family_slots <= 0

    @property
    def family_ids(self) -> list[str]:
        return [f.id for f in self.families]

    @property
    def member_ids(self) -> list[str]:
        return [m.id for m in self.members]

    @property
    def primary(self) -> FamilyRecord | None:
        return self.families[0] if self.families else None

    def add_family(self, family: FamilyRecord) -> None:
        self.families.append(family)
        self.members.extend(family.members)

    def add_to_family(self, family: FamilyRecord, person: PersonRecord) -> None:
        family.add(person)
        self.members.append(person)

    def __repr__(self) -> str:
        return f"HouseholdRecord({self.id!r}, {self.category.label}, members={len(self.members)})"
