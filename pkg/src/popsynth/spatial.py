"""Dwelling assignment: households to SA1s and street addresses.

Addresses are mapped to SA1 polygons in two passes. A bounding-box filter
(sorted x coordinates plus a y test, vectorised with numpy) proposes
candidate polygons for each point and an exact ray-casting test decides.
Points on a polygon boundary count as inside; when polygons overlap the
first one in SA1 order wins.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .apportion import largest_remainder
from .engine.pools import FeasibilityError
from .ingest import HouseholdMarginal, InputError, ParseError, ValidationError
from .schema import COMPOSITIONS, HouseholdComposition, HouseholdRecord

Point = tuple[float, float]
Ring = tuple[Point, ...]


class GeometryError(InputError):
    pass


@dataclass(frozen=True)
class AddressPoint:
    id: str
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"address {self.id} has non-finite coordinates")


def ring_area(ring: Sequence[Point]) -> float:
    """Signed shoelace area of a closed ring."""
    s = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        s += x1 * y2 - x2 * y1
    return s / 2.0


def _check_ring(ring, sa1: str) -> Ring:
    ring = tuple((float(x), float(y)) for x, y, *_ in ring)
    if len(ring) < 4:
        raise GeometryError(f"SA1 {sa1}: ring has {len(ring)} vertices, need at least 4")
    if ring[0] != ring[-1]:
        raise GeometryError(f"SA1 {sa1}: ring is not closed")
    if not all(math.isfinite(v) for pt in ring for v in pt):
        raise GeometryError(f"SA1 {sa1}: non-finite vertex")
    if ring_area(ring) == 0.0:
        raise GeometryError(f"SA1 {sa1}: degenerate ring with zero area")
    return ring


@dataclass
class AreaPolygon:
    """An SA1 boundary: one or more parts, each an outer ring plus holes."""

    sa1: str
    sa2: str
    parts: list[list[Ring]]
    bbox: tuple[float, float, float, float] = field(init=False)

    def __post_init__(self):
        if not self.parts or not all(self.parts):
            raise GeometryError(f"SA1 {self.sa1}: polygon has no rings")
        self.parts = [[_check_ring(r, self.sa1) for r in part] for part in self.parts]
        xs = [x for r in self.rings for x, _ in r]
        ys = [y for r in self.rings for _, y in r]
        self.bbox = (min(xs), min(ys), max(xs), max(ys))

    @classmethod
    def simple(cls, sa1: str, sa2: str, outer: Sequence[Point],
               holes: Sequence[Sequence[Point]] = ()) -> AreaPolygon:
        return cls(sa1, sa2, [[tuple(outer), *map(tuple, holes)]])

    @property
    def rings(self) -> list[Ring]:
        return [r for part in self.parts for r in part]

    def bbox_contains(self, x: float, y: float) -> bool:
        x0, y0, x1, y1 = self.bbox
        return x0 <= x <= x1 and y0 <= y <= y1


def on_segment(x: float, y: float, a: Point, b: Point) -> bool:
    (x1, y1), (x2, y2) = a, b
    if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) != 0:
        return False
    return min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2)


def point_in_polygon(pt, poly: AreaPolygon) -> bool:
    """Even-odd ray casting over every ring; boundary points are inside.

    A horizontal ray is cast to +x. An edge is crossed when it straddles the
    ray's height (half-open in y) and the point lies left of it, decided
    with a cross-product sign rather than a division.
    """
    x, y = (pt.x, pt.y) if isinstance(pt, AddressPoint) else pt
    inside = False
    for ring in poly.rings:
        for a, b in zip(ring, ring[1:]):
            if on_segment(x, y, a, b):
                return True
            (x1, y1), (x2, y2) = a, b
            if (y1 > y) != (y2 > y):
                side = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
                if (side > 0) == (y2 > y1):
                    inside = not inside
    return inside


def bbox_candidates(pt, polys: Sequence[AreaPolygon]) -> list[AreaPolygon]:
    x, y = (pt.x, pt.y) if isinstance(pt, AddressPoint) else pt
    return [p for p in polys if p.bbox_contains(x, y)]


@dataclass
class AddressMapping:
    sa1_of: dict[str, str]
    unmatched: list[str]


def sorted_polygons(polys: Iterable[AreaPolygon]) -> list[AreaPolygon]:
    return sorted(polys, key=lambda p: p.sa1)


def map_addresses_to_sa1(points: Sequence[AddressPoint], polys: Sequence[AreaPolygon]
                         ) -> AddressMapping:
    """Map each address to the first SA1 (in SA1 order) that contains it."""
    polys = sorted_polygons(polys)
    n = len(points)
    if not n:
        return AddressMapping({}, [])
    xs = np.fromiter((p.x for p in points), dtype=float, count=n)
    ys = np.fromiter((p.y for p in points), dtype=float, count=n)
    order = np.argsort(xs, kind="stable")
    sx = xs[order]
    owner = np.full(n, -1, dtype=np.int64)
    for j, poly in enumerate(polys):
        x0, y0, x1, y1 = poly.bbox
        lo = np.searchsorted(sx, x0, side="left")
        hi = np.searchsorted(sx, x1, side="right")
        if lo == hi:
            continue
        idx = order[lo:hi]
        yy = ys[idx]
        idx = idx[(yy >= y0) & (yy <= y1)]
        idx = idx[owner[idx] < 0]
        for i in idx.tolist():
            if point_in_polygon((xs[i], ys[i]), poly):
                owner[i] = j
    sa1_of = {}
    unmatched = []
    for p, j in zip(points, owner.tolist()):
        if j < 0:
            unmatched.append(p.id)
        else:
            sa1_of[p.id] = polys[j].sa1
    return AddressMapping(sa1_of, unmatched)


# -- SA1 household marginal ---------------------------------------------------

@dataclass
class Sa1Marginal:
    sa2: str
    counts: dict[tuple[str, HouseholdComposition], int] = field(default_factory=dict)

    def composition_totals(self) -> dict[HouseholdComposition, int]:
        out = defaultdict(int)
        for (_, comp), n in self.counts.items():
            out[comp] += n
        return dict(out)

    @property
    def sa1s(self) -> list[str]:
        return sorted({sa1 for sa1, _ in self.counts})


SA1_HEADER = ["sa2", "sa1", "composition", "count"]


def parse_sa1_marginal(path) -> dict[str, Sa1Marginal]:
    out: dict[str, Sa1Marginal] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return out
        if [h.strip() for h in header] != SA1_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(SA1_HEADER)}")
        for line, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(path, line, f"expected 4 fields, got {len(row)}")
            sa2, sa1, comp, count = (v.strip() for v in row)
            try:
                comp = HouseholdComposition.parse(comp)
                n = int(count)
            except ValueError as exc:
                raise ParseError(path, line, str(exc)) from None
            if n < 0:
                raise ValidationError(path, line, f"negative count {n}")
            m = out.setdefault(sa2, Sa1Marginal(sa2))
            m.counts[sa1, comp] = m.counts.get((sa1, comp), 0) + n
    return out


def write_sa1_marginals(path, marginals: Iterable[Sa1Marginal]) -> None:
    order = {c: i for i, c in enumerate(COMPOSITIONS)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SA1_HEADER)
        for m in sorted(marginals, key=lambda m: m.sa2):
            for (sa1, comp), n in sorted(m.counts.items(), key=lambda kv: (kv[0][0],
                                                                            order[kv[0][1]])):
                w.writerow([m.sa2, sa1, comp.label, n])


def composition_counts(h: HouseholdMarginal) -> dict[HouseholdComposition, int]:
    out = defaultdict(int)
    for cat, n in h.counts.items():
        out[cat.composition] += n
    return dict(out)


def reconcile_sa1_marginal(m: Sa1Marginal, targets: dict[HouseholdComposition, int]
                           ) -> Sa1Marginal:
    """Rescale SA1 counts so each composition's total matches ``targets``.

    Compositions that have SA1 counts are spread proportionally with
    largest-remainder rounding. A composition with a target but no SA1 rows
    is left absent, which allocation reports as infeasible.
    """
    by_comp = defaultdict(list)
    for (sa1, comp), n in sorted(m.counts.items(), key=lambda kv: kv[0][0]):
        by_comp[comp].append((sa1, n))
    out = Sa1Marginal(m.sa2)
    for comp, rows in by_comp.items():
        total = targets.get(comp, 0)
        for (sa1, _), k in zip(rows, largest_remainder([n for _, n in rows], total)):
            if k:
                out.counts[sa1, comp] = k
    return out


def allocate_households_to_sa1(households: Sequence[HouseholdRecord], m: Sa1Marginal,
                               rng) -> list[HouseholdRecord]:
    """Deal households to SA1s so each composition's SA1 counts are met exactly."""
    by_comp = defaultdict(list)
    for hh in households:
        by_comp[hh.composition].append(hh)
    quota = defaultdict(list)
    for (sa1, comp), n in sorted(m.counts.items(), key=lambda kv: kv[0][0]):
        if n:
            quota[comp].append((sa1, n))
    for comp in sorted(set(by_comp) | set(quota), key=COMPOSITIONS.index):
        hhs = by_comp.get(comp, [])
        want = sum(n for _, n in quota.get(comp, ()))
        if want != len(hhs):
            raise FeasibilityError(
                f"SA2 {m.sa2}: {len(hhs)} {comp.label} households but SA1 counts sum to {want}",
                stage="allocate_households_to_sa1", sa2=m.sa2)
        hhs = list(hhs)
        rng.shuffle(hhs)
        k = 0
        for sa1, n in quota[comp]:
            for hh in hhs[k:k + n]:
                hh.sa1 = sa1
            k += n
    return list(households)


@dataclass
class AddressReuse:
    household_id: str
    sa1: str
    address_id: str


def assign_addresses(households: Sequence[HouseholdRecord], addr_by_sa1: dict[str, list[str]],
                     rng) -> list[AddressReuse]:
    """Give each household an address in its SA1.

    Addresses are drawn without replacement; an SA1 with more households than
    addresses reuses them, and every reuse is returned.
    """
    groups = defaultdict(list)
    for hh in households:
        if hh.sa1 is None:
            raise FeasibilityError(f"household {hh.id} has no SA1", stage="assign_addresses",
                                   sa2=hh.sa2)
        groups[hh.sa1].append(hh)
    reused = []
    for sa1 in sorted(groups):
        hhs = groups[sa1]
        addrs = sorted(addr_by_sa1.get(sa1, ()))
        if not addrs:
            raise FeasibilityError(f"SA1 {sa1} has {len(hhs)} households but no addresses",
                                   stage="assign_addresses", sa2=hhs[0].sa2)
        deck = rng.sample(addrs, len(addrs))
        for i, hh in enumerate(hhs):
            if i < len(deck):
                hh.address_id = deck[i]
            else:
                hh.address_id = rng.choice(addrs)
                reused.append(AddressReuse(hh.id, sa1, hh.address_id))
    return reused


# -- file formats ------------------------------------------------------------

def _feature_rings(geom: dict, where: str) -> list[list]:
    kind = geom.get("type")
    coords = geom.get("coordinates")
    if kind == "Polygon":
        return [coords]
    if kind == "MultiPolygon":
        return list(coords)
    raise GeometryError(f"{where}: unsupported geometry type {kind!r}")


def load_polygons(path) -> list[AreaPolygon]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"{path}: {exc}") from None
    polys = []
    for i, feat in enumerate(doc.get("features", [])):
        where = f"{path}: feature {i}"
        props = feat.get("properties") or {}
        if "sa1" not in props or "sa2" not in props:
            raise GeometryError(f"{where}: properties sa1 and sa2 are required")
        geom = feat.get("geometry") or {}
        polys.append(AreaPolygon(str(props["sa1"]), str(props["sa2"]),
                                 _feature_rings(geom, where)))
    return polys


def write_polygons(path, polys: Iterable[AreaPolygon]) -> None:
    feats = []
    for p in polys:
        parts = [[[list(pt) for pt in ring] for ring in part] for part in p.parts]
        geom = ({"type": "Polygon", "coordinates": parts[0]} if len(parts) == 1
                else {"type": "MultiPolygon", "coordinates": parts})
        feats.append({"type": "Feature", "properties": {"sa1": p.sa1, "sa2": p.sa2},
                      "geometry": geom})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh)


def load_addresses(path) -> list[AddressPoint]:
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            out = []
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames != ["address_id", "x", "y"]:
                    raise ParseError(path, 1, "expected header address_id,x,y")
                for line, row in enumerate(reader, 2):
                    try:
                        out.append(AddressPoint(row["address_id"], float(row["x"]),
                                                float(row["y"])))
                    except (TypeError, ValueError) as exc:
                        raise ParseError(path, line, str(exc)) from None
            return out
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise GeometryError(f"{path}: {exc}") from None
    out = []
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        if geom.get("type") != "Point" or "address_id" not in props:
            raise GeometryError(f"{path}: feature {i} is not a Point with an address_id")
        x, y = geom["coordinates"][:2]
        out.append(AddressPoint(str(props["address_id"]), float(x), float(y)))
    return out


def write_addresses_csv(path, points: Iterable[AddressPoint]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["address_id", "x", "y"])
        for p in points:
            w.writerow([p.id, repr(p.x), repr(p.y)])


def _fingerprint(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        with open(p, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        h.update(b"\x00")
    return h.hexdigest()


def cached_address_mapping(addresses_path, polygons_path, cache_path
                           ) -> tuple[AddressMapping, bool]:
    """Address to SA1 mapping, reused from ``cache_path`` when the inputs are unchanged.

    The cache is a CSV (``address_id,sa1``, empty sa1 for unmatched) with a
    ``.fingerprint`` sidecar holding a hash of both input files. Returns the
    mapping and whether it came from the cache.
    """
    cache_path = Path(cache_path)
    stamp = cache_path.with_name(cache_path.name + ".fingerprint")
    fp = _fingerprint(addresses_path, polygons_path)
    if cache_path.exists() and stamp.exists() and stamp.read_text().strip() == fp:
        sa1_of, unmatched = {}, []
        with open(cache_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row["sa1"]:
                    sa1_of[row["address_id"]] = row["sa1"]
                else:
                    unmatched.append(row["address_id"])
        return AddressMapping(sa1_of, unmatched), True
    points = load_addresses(addresses_path)
    mapping = map_addresses_to_sa1(points, load_polygons(polygons_path))
    with open(cache_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["address_id", "sa1"])
        for p in points:
            w.writerow([p.id, mapping.sa1_of.get(p.id, "")])
    stamp.write_text(fp + "\n")
    return mapping, False
