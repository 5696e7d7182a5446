"""Separating cross-sections on finite windows.

Builds the binary filtration over a window's section points, selectors with
pairwise disjoint ranges, position/label tuples per class, and the enriched
section obtained by adjoining one encoder point per class representative
(non-Boolean case) or a two-point triangle (Boolean case).  Verification
confirms that recentred views of the enriched section distinguish every pair
of points across an ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .group_model import BoolGroupElement, DeltaSet, GroupPoint, cocycle
from .orbit_window import (
    ClippingError,
    LabelStream,
    OrbitWindow,
    check_label_distinctness,
    labels_for,
    phi_view,
)
from .serialize import parse_rat, rat_str


class InvariantFailure(AssertionError):
    """A should-be-impossible structural property failed; treat as a bug."""


# ---------------------------------------------------------------------------
# lacunary thinning

def greedy_lacunary(points: Sequence, r: Fraction) -> list:
    """Maximal r-separated subset under the lexicographic scan order.

    A point is kept iff its distance to every previously kept point is >= r;
    exact comparisons on the monotone distance keys.
    """
    r = Fraction(r)
    ordered = sorted(points, key=lambda p: p.sort_key())
    kept: list = []
    for p in ordered:
        key_bound = r * r if isinstance(p, GroupPoint) else r
        if all(p.dist_key(q) >= key_bound for q in kept):
            kept.append(p)
    return kept


# ---------------------------------------------------------------------------
# binary filtration and selectors

@dataclass(frozen=True)
class Filtration:
    """Increasing chain of partitions: level 0 is singletons and every level-n
    class is the union of exactly two level-(n-1) classes."""

    points: tuple
    depth: int
    classes: tuple  # classes[n] = tuple of classes; a class = tuple of points in order

    def class_of(self, n: int, x):
        for cls in self.classes[n]:
            if x in cls:
                return cls
        raise KeyError(f"point not in filtration: {x}")

    def validate(self) -> None:
        if len(self.classes[0]) != len(self.points):
            raise InvariantFailure("level 0 must be singletons")
        for n in range(self.depth + 1):
            seen = set()
            for cls in self.classes[n]:
                if len(cls) != 2 ** n:
                    raise InvariantFailure(f"class size {len(cls)} at level {n}")
                seen.update(cls)
            if len(seen) != len(self.points):
                raise InvariantFailure(f"level {n} does not partition the points")
        for n in range(1, self.depth + 1):
            finer = {cls: None for cls in self.classes[n - 1]}
            for coarse in self.classes[n]:
                members = set(coarse)
                children = [c for c in self.classes[n - 1] if set(c) <= members]
                if len(children) != 2:
                    raise InvariantFailure(
                        f"level-{n} class is not a union of exactly two level-{n - 1} classes"
                    )
                for c in children:
                    finer[c] = coarse
            if any(v is None for v in finer.values()):
                raise InvariantFailure(f"refinement broken between levels {n - 1} and {n}")


def build_filtration(window_points: Sequence) -> Filtration:
    """Pair classes bottom-up by nearest representatives.

    At each level the two unmerged classes whose representatives (their
    lexicographically least members) are nearest are merged, ties broken by
    the representatives' lexicographic order.  Requires a power-of-two point
    count so the chain closes with no remainder classes.
    """
    points = tuple(sorted(window_points, key=lambda p: p.sort_key()))
    count = len(points)
    if count == 0 or count & (count - 1):
        raise ValueError(f"point count {count} is not a power of two")
    depth = count.bit_length() - 1
    levels = [tuple((p,) for p in points)]
    for _ in range(depth):
        current = list(levels[-1])
        merged: list[tuple] = []
        while current:
            best = None
            for i in range(len(current)):
                for j in range(i + 1, len(current)):
                    ra, rb = current[i][0], current[j][0]
                    lo, hi = sorted((ra.sort_key(), rb.sort_key()))
                    key = (ra.dist_key(rb), lo, hi)
                    if best is None or key < best[0]:
                        best = (key, i, j)
            _, i, j = best
            union = tuple(sorted(current[i] + current[j], key=lambda p: p.sort_key()))
            merged.append(union)
            del current[j], current[i]
        merged.sort(key=lambda cls: cls[0].sort_key())
        levels.append(tuple(merged))
    filtration = Filtration(points, depth, tuple(levels))
    filtration.validate()
    return filtration


@dataclass(frozen=True)
class SelectorTable:
    """Per level, the map from a point to its class representative; ranges
    are pairwise disjoint across levels."""

    depth: int
    table: tuple  # table[n-1] = dict class -> representative

    def select(self, n: int, filtration: Filtration, x):
        cls = filtration.class_of(n, x)
        return self.table[n - 1][cls]

    def representatives(self, n: int) -> list:
        return sorted(self.table[n - 1].values(), key=lambda p: p.sort_key())


def build_selectors(filtration: Filtration) -> SelectorTable:
    """Level 1 picks the least member of each class; level n the least member
    not already used by a lower level.  Exhaustion is impossible by counting
    (2^n members vs at most 2^n - 1 prior selector values in a class)."""
    used: set = set()
    table = []
    for n in range(1, filtration.depth + 1):
        chosen: dict = {}
        for cls in filtration.classes[n]:
            candidates = [p for p in cls if p not in used]
            if not candidates:
                raise InvariantFailure(f"selector exhaustion in a level-{n} class")
            rep = min(candidates, key=lambda p: p.sort_key())
            chosen[cls] = rep
        used.update(chosen.values())
        table.append(chosen)
    return SelectorTable(filtration.depth, tuple(table))


# ---------------------------------------------------------------------------
# class tuples and their integer codes

class PointLabels:
    """Binds a window's points to its label stream by point index."""

    def __init__(self, points: Sequence, stream: LabelStream):
        self.stream = stream
        self.index = {p: i for i, p in enumerate(points)}

    def prefix_for(self, point, n: int) -> tuple[int, ...]:
        return self.stream.prefix(self.index[point], n)


@dataclass(frozen=True)
class BetaTuple:
    """Per class member, the cocycle from the representative together with the
    first n label bits, in the class order."""

    n: int
    entries: tuple  # tuple of (cocycle element, tuple of n bits)

    def __post_init__(self):
        identities = sum(1 for coc, _ in self.entries if coc.is_identity())
        if identities != 1:
            raise InvariantFailure("exactly one entry must carry the identity cocycle")


def beta(
    filtration: Filtration,
    selectors: SelectorTable,
    labels: PointLabels,
    n: int,
    x,
) -> BetaTuple:
    if not 1 <= n <= filtration.depth:
        raise ValueError(f"level {n} outside 1..{filtration.depth}")
    cls = filtration.class_of(n, x)
    rep = selectors.select(n, filtration, x)
    entries = tuple((cocycle(rep, member), labels.prefix_for(member, n)) for member in cls)
    return BetaTuple(n, entries)


def beta_code_bytes(t: BetaTuple) -> bytes:
    parts = [str(t.n)]
    for coc, bits in t.entries:
        parts.append(",".join(coc.as_strings()) + "|" + "".join(str(b) for b in bits))
    return ";".join(parts).encode()


def beta_code_int(t: BetaTuple) -> int:
    # leading \x01 keeps the byte-string -> integer map injective
    return int.from_bytes(b"\x01" + beta_code_bytes(t), "big")


def parse_beta_code(data: bytes, element_parser: Callable[[list[str]], object]) -> BetaTuple:
    parts = data.decode().split(";")
    n = int(parts[0])
    entries = []
    for part in parts[1:]:
        coords, bits = part.split("|")
        element = element_parser(coords.split(","))
        entries.append((element, tuple(int(b) for b in bits)))
    return BetaTuple(n, tuple(entries))


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def cantor_unpair(k: int) -> tuple[int, int]:
    w = (math.isqrt(8 * k + 1) - 1) // 2
    b = k - w * (w + 1) // 2
    return w - b, b


def upsilon(n: int, t: BetaTuple, ds: DeltaSet) -> GroupPoint:
    """Injective map from (level, tuple) into the norm-band set: Godel-code the
    tuple, pair it with the level, and index the enumeration rule.  Purely
    arithmetic, hence identical across runs and platforms."""
    if t.n != n:
        raise ValueError("tuple level mismatch")
    return ds.element(upsilon_index(n, t))


def upsilon_index(n: int, t: BetaTuple) -> int:
    return cantor_pair(n, beta_code_int(t))


def decode_upsilon(gamma: GroupPoint, element_parser=GroupPoint.from_strings) -> tuple[int, BetaTuple]:
    """Invert the encoder offset: norm-band element -> (level, tuple)."""
    q = gamma.coords[0] - Fraction(1, 2)
    if q <= 0 or q.numerator != 1 or any(c != 0 for c in gamma.coords[1:]):
        raise ValueError("offset is not an enumeration-rule element")
    k = q.denominator - 3
    n, code = cantor_unpair(k)
    raw = code.to_bytes((code.bit_length() + 7) // 8, "big")
    if not raw.startswith(b"\x01"):
        raise ValueError("malformed tuple code")
    t = parse_beta_code(raw[1:], element_parser)
    if t.n != n:
        raise ValueError("level mismatch in decoded tuple")
    return n, t


# ---------------------------------------------------------------------------
# the separating section

@dataclass(frozen=True)
class AddedRecord:
    anchor: object
    level: int
    tuple: BetaTuple
    adjoined: tuple
    index: int  # enumeration index of the encoder element


@dataclass(frozen=True)
class SeparatingCrossSection:
    window_id: str
    case: str  # "r2d" | "boolean"
    base: tuple
    added: tuple[AddedRecord, ...]

    def points(self) -> list:
        pts = list(self.base)
        for rec in self.added:
            pts.extend(rec.adjoined)
        return pts


def build_separating_case1(
    window: OrbitWindow,
    filtration: Filtration,
    selectors: SelectorTable,
    labels: PointLabels,
    ds: DeltaSet,
) -> SeparatingCrossSection:
    """Adjoin, for each level n and class representative x, the point
    x + upsilon_n(beta_n(x)).  The norm band (2*delta, 1) of the encoder
    offsets together with base spacing >= 4 makes the result B_delta-lacunary;
    violation is trapped as a bug, not reported."""
    added = []
    for n in range(1, filtration.depth + 1):
        for rep in selectors.representatives(n):
            t = beta(filtration, selectors, labels, n, rep)
            k = upsilon_index(n, t)
            gamma = ds.element(k)
            added.append(AddedRecord(rep, n, t, (rep + gamma,), k))
    section = SeparatingCrossSection(window.window_id, "r2d", filtration.points, tuple(added))
    check_case1_lacunarity(section, ds.delta)
    return section


def check_case1_lacunarity(section: SeparatingCrossSection, delta: Fraction) -> None:
    """Exact checks: all pairs > 2*delta apart, base pairs > 2, encoder offsets
    in the open norm band (2*delta, 1)."""
    pts = section.points()
    bound2 = (2 * Fraction(delta)) ** 2
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if (pts[i] - pts[j]).norm2() <= bound2:
                raise InvariantFailure(f"section points {i},{j} violate B_delta lacunarity")
    base = list(section.base)
    for i in range(len(base)):
        for j in range(i + 1, len(base)):
            if (base[i] - base[j]).norm2() <= 4:
                raise InvariantFailure("base pair at distance <= 2")
    for rec in section.added:
        gamma = rec.adjoined[0] - rec.anchor
        n2 = gamma.norm2()
        if not ((2 * Fraction(delta)) ** 2 < n2 < 1):
            raise InvariantFailure("encoder offset escaped the norm band")


def decode_encoder_case1(
    section: SeparatingCrossSection, anchor, delta: Fraction
) -> tuple[int, BetaTuple]:
    """Recover (level, tuple) from the section geometry alone: find the unique
    section point within the norm band of the anchor and invert its offset."""
    band_lo = (2 * Fraction(delta)) ** 2
    nearby = [
        p
        for p in section.points()
        if p != anchor and band_lo < (p - anchor).norm2() < 1
    ]
    if len(nearby) != 1:
        raise ValueError(f"expected exactly one encoder point near anchor, found {len(nearby)}")
    return decode_upsilon(nearby[0] - anchor)


# ---------------------------------------------------------------------------
# Boolean case

@dataclass(frozen=True)
class BooleanWindow:
    """Synthetic window over the truncated Boolean group; the harness supplies
    a norm-lacunary section directly."""

    window_id: str
    truncation: int
    c_points: tuple[BoolGroupElement, ...]
    label_salt: int = 0


class BooleanEncoderRegistry:
    """Canonical (sorted, hence run-order-independent) enumeration of the
    realized (level, tuple) pairs across an ensemble.

    The unbounded integer code of a tuple cannot index the truncated gamma
    sequence directly, so realized codes are ranked canonically; distinct
    pairs get distinct indices, preserving injectivity and disjoint images
    across levels on everything the run touches.
    """

    def __init__(self, codes: list[tuple[int, bytes]]):
        ordered = sorted(set(codes))
        self.index = {code: k for k, code in enumerate(ordered)}
        self.codes = ordered

    @staticmethod
    def collect(structures: Iterable[tuple[Filtration, SelectorTable, PointLabels]]):
        codes = []
        for filtration, selectors, labels in structures:
            for n in range(1, filtration.depth + 1):
                for rep in selectors.representatives(n):
                    t = beta(filtration, selectors, labels, n, rep)
                    codes.append((n, beta_code_bytes(t)))
        return BooleanEncoderRegistry(codes)

    def gamma_index(self, n: int, t: BetaTuple) -> int:
        return self.index[(n, beta_code_bytes(t))]

    def decode(self, k: int, truncation: int) -> tuple[int, BetaTuple]:
        n, raw = self.codes[k]
        parser = lambda items: BoolGroupElement.of((int(s) for s in items if s), truncation)
        return n, parse_beta_code(raw, parser)


def build_separating_case2(
    bwindow: BooleanWindow,
    filtration: Filtration,
    selectors: SelectorTable,
    labels: PointLabels,
    pair_seq: tuple[BoolGroupElement, BoolGroupElement, list[BoolGroupElement]],
    registry: BooleanEncoderRegistry,
) -> SeparatingCrossSection:
    """Adjoin the two points g0 + gamma_k + x and g1 + gamma_k + x per class
    representative, k being the registry index of (n, beta_n(x))."""
    g0, g1, gammas = pair_seq
    added = []
    for n in range(1, filtration.depth + 1):
        for rep in selectors.representatives(n):
            t = beta(filtration, selectors, labels, n, rep)
            k = registry.gamma_index(n, t)
            if k >= len(gammas):
                raise ValueError(
                    f"encoder index {k} exceeds the {len(gammas)} available gammas; "
                    f"increase the Boolean truncation"
                )
            gamma = gammas[k]
            added.append(AddedRecord(rep, n, t, (g0 + gamma + rep, g1 + gamma + rep), k))
    return SeparatingCrossSection(bwindow.window_id, "boolean", filtration.points, tuple(added))


def check_case2_triangles(
    section: SeparatingCrossSection,
    pair_seq: tuple[BoolGroupElement, BoolGroupElement, list[BoolGroupElement]],
) -> None:
    """Exact triangle geometry: the adjoined pair differs by g0 + g1, the used
    gamma satisfies the doubled-norm bound, and the three pairwise distances
    stay above half the g-norm minimum."""
    g0, g1, gammas = pair_seq
    bound = min(g0.bool_norm(), g1.bool_norm(), (g0 + g1).bool_norm())
    for rec in section.added:
        a0, a1 = rec.adjoined
        if a0 + a1 != g0 + g1:
            raise InvariantFailure("adjoined pair does not differ by g0 + g1")
        gamma = gammas[rec.index]
        if not 2 * gamma.bool_norm() < bound:
            raise InvariantFailure("used gamma violates the doubled-norm bound")
        x = rec.anchor
        sides = [(x + a0).bool_norm(), (x + a1).bool_norm(), (a0 + a1).bool_norm()]
        if not all(s > bound / 2 for s in sides):
            raise InvariantFailure("encoder triangle is not uniformly separated")


# ---------------------------------------------------------------------------
# separation verification over an ensemble

def section_to_json(section: SeparatingCrossSection, path) -> None:
    """Provenance-carrying serialization; encoder indices may be huge, so they
    are written as decimal strings."""
    from .serialize import dump_json

    def element_strings(p):
        return p.as_strings()

    dump_json(
        path,
        {
            "kind": "separating_cross_section",
            "window_id": section.window_id,
            "case": section.case,
            "base": [element_strings(p) for p in section.base],
            "added": [
                {
                    "anchor": element_strings(rec.anchor),
                    "level": rec.level,
                    "tuple": {
                        "n": rec.tuple.n,
                        "entries": [
                            {
                                "cocycle": element_strings(coc),
                                "labels": "".join(str(b) for b in bits),
                            }
                            for coc, bits in rec.tuple.entries
                        ],
                    },
                    "adjoined": [element_strings(p) for p in rec.adjoined],
                    "index": str(rec.index),
                }
                for rec in section.added
            ],
        },
    )


@dataclass(frozen=True)
class PairRow:
    window_a: str
    index_a: int
    window_b: str
    index_b: int
    distinguished_at: Fraction | None
    skipped_radii: int

    def csv(self) -> list:
        at = rat_str(self.distinguished_at) if self.distinguished_at is not None else "FAIL"
        return [
            f"{self.window_a}:{self.index_a}|{self.window_b}:{self.index_b}",
            at,
            self.skipped_radii,
        ]


@dataclass
class SeparationReport:
    rows: list[PairRow]
    clipped_pairs: int
    skipped_comparisons: int

    @property
    def comparable(self) -> int:
        return len(self.rows)

    @property
    def distinguished(self) -> int:
        return sum(1 for r in self.rows if r.distinguished_at is not None)

    def all_distinguished(self) -> bool:
        return self.comparable > 0 and self.distinguished == self.comparable

    def failures(self) -> list[PairRow]:
        return [r for r in self.rows if r.distinguished_at is None]


def verify_separation(
    ensemble: Sequence[tuple[OrbitWindow, SeparatingCrossSection]],
    r_schedule: Sequence[Fraction],
) -> SeparationReport:
    """Find, for every pair of section base points across the ensemble, the
    least scheduled view radius at which the recentred views of the enriched
    sections differ.  Views that would clip a window boundary are skipped and
    counted; a pair with no unclipped comparison at all is counted as clipped
    rather than failed."""
    schedule = sorted(Fraction(r) for r in r_schedule)
    streams = []
    for window, _ in ensemble:
        stream = labels_for(window)
        streams.extend((stream, i) for i in range(len(window.c_points)))
    if not check_label_distinctness(streams):
        raise ValueError("label streams collide within the first 64 bits; regenerate windows")

    entries = []  # (window, section points, x, window_id, index)
    for window, section in ensemble:
        pts = section.points()
        for i, x in enumerate(window.c_points):
            entries.append((window, pts, x, window.window_id, i))

    cache: dict[tuple[str, int, Fraction], frozenset | None] = {}

    def view_offsets(entry, radius):
        window, pts, x, wid, idx = entry
        key = (wid, idx, radius)
        if key not in cache:
            try:
                cache[key] = phi_view(window, pts, x, radius).offsets
            except ClippingError:
                cache[key] = None
        return cache[key]

    rows: list[PairRow] = []
    clipped_pairs = 0
    skipped_total = 0
    for i in range(len(entries)):
        for j in range(i + 1, len(entries)):
            skips = 0
            found = None
            compared = False
            for radius in schedule:
                va = view_offsets(entries[i], radius)
                vb = view_offsets(entries[j], radius)
                if va is None or vb is None:
                    skips += 1
                    continue
                compared = True
                if va != vb:
                    found = radius
                    break
            skipped_total += skips
            if not compared:
                clipped_pairs += 1
                continue
            rows.append(
                PairRow(
                    entries[i][3], entries[i][4], entries[j][3], entries[j][4], found, skips
                )
            )
    return SeparationReport(rows, clipped_pairs, skipped_total)
