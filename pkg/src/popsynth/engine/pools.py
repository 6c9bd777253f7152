"""Mutable synthesis state for one SA2."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator

from ..ingest import PersonMarginal
from ..schema import FamilyRecord, HouseholdRecord, PersonRecord, Rel, Sex


class FeasibilityError(RuntimeError):
    """The pools cannot supply what a synthesis step requires."""

    def __init__(self, message: str, stage: str | None = None, sa2: str | None = None):
        self.stage = stage
        self.sa2 = sa2
        super().__init__(message)

    def __str__(self):
        where = ":".join(x for x in (self.sa2, self.stage) if x)
        msg = super().__str__()
        return f"[{where}] {msg}" if where else msg


def _bin_key(p: PersonRecord):
    return p.age_bin


def _sex_bin_key(p: PersonRecord):
    return (p.sex, p.age_bin)


class Pool:
    """Persons bucketed by a key (age bin by default).

    Supports uniform random removal over any subset of keys in O(#keys).
    Removal is without replacement.
    """

    __slots__ = ("buckets", "key", "_n")

    def __init__(self, persons: Iterable[PersonRecord] = (),
                 key: Callable[[PersonRecord], Hashable] = _bin_key):
        self.buckets: dict[Hashable, list[PersonRecord]] = {}
        self.key = key
        self._n = 0
        for p in persons:
            self.add(p)

    def add(self, p: PersonRecord) -> None:
        k = self.key(p)
        b = self.buckets.get(k)
        if b is None:
            self.buckets[k] = [p]
        else:
            b.append(p)
        self._n += 1

    def extend(self, persons: Iterable[PersonRecord]) -> None:
        for p in persons:
            self.add(p)

    def __len__(self) -> int:
        return self._n

    def __bool__(self) -> bool:
        return self._n > 0

    def __iter__(self) -> Iterator[PersonRecord]:
        for k in sorted(self.buckets, key=_sortable):
            yield from self.buckets[k]

    def count(self, key) -> int:
        b = self.buckets.get(key)
        return len(b) if b else 0

    def count_in(self, keys: Iterable) -> int:
        return sum(self.count(k) for k in keys)

    def nonempty_keys(self) -> list:
        return sorted((k for k, b in self.buckets.items() if b), key=_sortable)

    def pop_random(self, rng, keys: Iterable | None = None) -> PersonRecord | None:
        """Remove and return a uniformly random person among ``keys``."""
        if keys is None:
            keys = self.nonempty_keys()
        sizes = []
        total = 0
        for k in keys:
            n = self.count(k)
            if n:
                sizes.append((k, n))
                total += n
        if not total:
            return None
        r = rng.randrange(total)
        for k, n in sizes:
            if r < n:
                return self._take(k, rng.randrange(n) if n > 1 else 0)
            r -= n
        raise AssertionError("unreachable")

    def pop_first(self, key) -> PersonRecord | None:
        b = self.buckets.get(key)
        if not b:
            return None
        self._n -= 1
        return b.pop(0)

    def _take(self, key, i: int) -> PersonRecord:
        b = self.buckets[key]
        p = b[i]
        last = b.pop()
        if i < len(b):
            b[i] = last
        self._n -= 1
        return p

    def remove(self, p: PersonRecord) -> None:
        b = self.buckets[self.key(p)]
        b.remove(p)
        self._n -= 1

    def drain(self) -> list[PersonRecord]:
        out = list(self)
        self.buckets.clear()
        self._n = 0
        return out


def _sortable(k):
    # keys are age bins, (sex, bin) pairs or None; order them deterministically
    if k is None:
        return (-1,)
    if isinstance(k, tuple):
        return tuple(-1 if x is None else (x.value if isinstance(x, Sex) else x) for x in k)
    return (k,)


def extras_pool(persons: Iterable[PersonRecord] = ()) -> Pool:
    return Pool(persons, key=_sex_bin_key)


@dataclass
class SynthesisReport:
    sa2: str
    fallbacks: Counter = field(default_factory=Counter)
    notes: list[str] = field(default_factory=list)
    elapsed_ms: float = 0.0

    def fallback(self, kind: str, n: int = 1) -> None:
        self.fallbacks[kind] += n

    @property
    def fallback_total(self) -> int:
        return sum(self.fallbacks.values())


@dataclass
class PoolSet:
    sa2: str
    person_marginal: PersonMarginal
    extras: Pool = field(default_factory=extras_pool)
    married_males: Pool = field(default_factory=Pool)
    married_females: Pool = field(default_factory=Pool)
    lone_parents: Pool = field(default_factory=Pool)
    children: Pool = field(default_factory=Pool)
    relatives: Pool = field(default_factory=Pool)
    group_members: Pool = field(default_factory=Pool)
    lone_persons: Pool = field(default_factory=Pool)
    basic_couples: list[FamilyRecord] = field(default_factory=list)
    basic_one_parent: list[FamilyRecord] = field(default_factory=list)
    basic_couple_with_child: list[FamilyRecord] = field(default_factory=list)
    basic_other: list[FamilyRecord] = field(default_factory=list)
    incomplete_households: list[HouseholdRecord] = field(default_factory=list)
    completed_households: list[HouseholdRecord] = field(default_factory=list)
    persons: list[PersonRecord] = field(default_factory=list)
    report: SynthesisReport = None

    def __post_init__(self):
        if self.report is None:
            self.report = SynthesisReport(self.sa2)

    def new_person(self, **attrs) -> PersonRecord:
        p = PersonRecord(f"{self.sa2}:P{len(self.persons)}", **attrs)
        self.persons.append(p)
        return p

    def pool_for(self, rel: Rel, sex: Sex | None = None) -> Pool:
        if rel is Rel.MARRIED:
            return self.married_males if sex is Sex.MALE else self.married_females
        if rel is Rel.LONE_PARENT:
            return self.lone_parents
        if rel is Rel.RELATIVE:
            return self.relatives
        if rel is Rel.GROUP_HOUSEHOLD:
            return self.group_members
        if rel is Rel.LONE_PERSON:
            return self.lone_persons
        return self.children

    def person_pools(self) -> list[Pool]:
        return [self.extras, self.married_males, self.married_females, self.lone_parents,
                self.children, self.relatives, self.group_members, self.lone_persons]

    def pooled_count(self) -> int:
        return sum(len(p) for p in self.person_pools())

    def sweep(self) -> None:
        """Move households that reached their size to ``completed_households``."""
        still = []
        for hh in self.incomplete_households:
            if hh.is_complete:
                self.completed_households.append(hh)
            else:
                still.append(hh)
        self.incomplete_households = still
