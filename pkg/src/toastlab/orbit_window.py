"""Finite orbit patches: point sets with exact coordinates plus label streams.

A window is a deterministic stand-in for one orbit of a free C^d-action: a
bounded box around the origin, a lacunary point set for the cross-section, and
a per-point stream of label bits.  Windows never share an orbit; cross-window
identity questions are settled by labels, within-window ones by position.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .group_model import GroupPoint
from .serialize import dump_json, load_json, rat_str, parse_rat

GRID_DENOMINATOR = 16
MIN_POINT_SPACING = Fraction(4)
MAX_REJECTIONS = 10 ** 6


class ClippingError(ValueError):
    """A view touched the window boundary and cannot be trusted."""


class WindowGenerationError(RuntimeError):
    """Rejection sampling could not place the requested points."""


@dataclass(frozen=True)
class OrbitWindow:
    window_id: str
    d: int
    radius: Fraction
    c_points: tuple[GroupPoint, ...]
    orbit_seed: int
    label_salt: int = 0

    def __post_init__(self):
        object.__setattr__(self, "radius", Fraction(self.radius))
        object.__setattr__(self, "c_points", tuple(self.c_points))
        r = self.radius
        for p in self.c_points:
            if len(p.coords) != 2 * self.d:
                raise ValueError("point dimension mismatch")
            if any(abs(c) > r for c in p.coords):
                raise ValueError(f"point {p.as_strings()} outside window box of radius {r}")
        spacing2 = MIN_POINT_SPACING ** 2
        pts = self.c_points
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                if pts[i].dist_key(pts[j]) < spacing2:
                    raise ValueError(
                        f"points {i} and {j} closer than {MIN_POINT_SPACING}: lacunarity violated"
                    )

    @property
    def dim(self) -> int:
        return 2 * self.d


class LabelStream:
    """Deterministic per-point bit streams, keyed by (window_id, index, salt).

    Bits come from counter-mode BLAKE2b, 64 bits per block, so any prefix is
    reproducible across platforms.  Distinctness of the first 64 bits across
    an ensemble is checked by the callers that rely on it.
    """

    def __init__(self, window_id: str, salt: int = 0):
        self.window_id = window_id
        self.salt = salt

    def _block(self, index: int, block: int) -> int:
        key = f"{self.window_id}|{index}|{self.salt}|{block}".encode()
        digest = hashlib.blake2b(key, digest_size=8).digest()
        return int.from_bytes(digest, "big")

    def bit(self, index: int, j: int) -> int:
        word = self._block(index, j // 64)
        return (word >> (63 - (j % 64))) & 1

    def prefix(self, index: int, n: int) -> tuple[int, ...]:
        return tuple(self.bit(index, j) for j in range(n))

    def first64(self, index: int) -> int:
        return self._block(index, 0)


class ExplicitLabelStream(LabelStream):
    """Label stream with hand-chosen leading bits (test harness control)."""

    def __init__(self, window_id: str, overrides: dict[int, str], salt: int = 0):
        super().__init__(window_id, salt)
        self.overrides = {i: s for i, s in overrides.items()}

    def bit(self, index: int, j: int) -> int:
        bits = self.overrides.get(index)
        if bits is not None and j < len(bits):
            return int(bits[j])
        return super().bit(index, j)

    def first64(self, index: int) -> int:
        return int("".join(str(self.bit(index, j)) for j in range(64)), 2)


def labels_for(window: OrbitWindow) -> LabelStream:
    return LabelStream(window.window_id, window.label_salt)


def check_label_distinctness(streams: Sequence[tuple[LabelStream, int]]) -> bool:
    """True iff the first 64 bits are pairwise distinct over (stream, index) pairs."""
    seen = set()
    for stream, index in streams:
        word = stream.first64(index)
        if word in seen:
            return False
        seen.add(word)
    return True


def generate_window(
    seed: int,
    d: int,
    radius: Fraction,
    depth: int,
    window_id: str | None = None,
) -> OrbitWindow:
    """Sample 2^depth points on the 1/16 grid, pairwise >= 4 apart.

    Points are drawn inside the Euclidean ball of radius radius/2 so that
    views of radius up to radius/2 never clip the window boundary.  Sampling
    is rejection-based and deterministic in the seed; it fails after 10^6
    rejected draws when the window is too small.
    """
    radius = Fraction(radius)
    count = 2 ** depth
    half = radius / 2
    max_num = int(half * GRID_DENOMINATOR)
    if max_num < 1:
        raise WindowGenerationError(f"radius {radius} too small for the sampling grid")
    rng = random.Random(seed)
    kept: list[GroupPoint] = []
    rejections = 0
    spacing2 = MIN_POINT_SPACING ** 2
    half2 = half * half
    while len(kept) < count:
        coords = tuple(
            Fraction(rng.randint(-max_num, max_num), GRID_DENOMINATOR) for _ in range(2 * d)
        )
        p = GroupPoint(coords)
        if p.norm2() > half2 or any(p.dist_key(q) < spacing2 for q in kept):
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise WindowGenerationError(
                    f"could not place {count} points at spacing {MIN_POINT_SPACING} "
                    f"inside radius {radius} after {MAX_REJECTIONS} rejections"
                )
            continue
        kept.append(p)
    kept.sort(key=lambda p: p.sort_key())
    wid = window_id if window_id is not None else f"w{seed:016x}"
    window = OrbitWindow(wid, d, radius, tuple(kept), seed)
    # regenerate labels with a bumped salt on a (vanishingly unlikely)
    # 64-bit prefix collision inside the window.
    salt = 0
    while True:
        stream = LabelStream(wid, salt)
        if check_label_distinctness([(stream, i) for i in range(count)]):
            break
        salt += 1
    if salt:
        window = OrbitWindow(wid, d, radius, tuple(kept), seed, label_salt=salt)
    return window


# ---------------------------------------------------------------------------
# configuration views

@dataclass(frozen=True)
class ConfigurationView:
    """Exact local snapshot of a point set: offsets p - center within the
    view radius.  Offsets, not absolute positions, so views recentred at
    different points are directly comparable."""

    center: GroupPoint
    view_radius: Fraction
    offsets: frozenset[GroupPoint]

    def translated_offsets(self, shift: GroupPoint) -> frozenset[GroupPoint]:
        return frozenset(o - shift for o in self.offsets)


def phi_view(
    window: OrbitWindow,
    points: Iterable[GroupPoint],
    x: GroupPoint,
    view_radius: Fraction,
) -> ConfigurationView:
    """Offsets of the given section points within view_radius of x, exactly.

    Preconditions: x lies in the window box and the view ball stays inside
    the window (|x| + R <= radius, checked on squared rationals); a view that
    would clip the boundary raises ClippingError.
    """
    view_radius = Fraction(view_radius)
    r = window.radius
    if any(abs(c) > r for c in x.coords):
        raise ClippingError("view center outside the window box")
    slack = r - view_radius
    if slack < 0 or x.norm2() > slack * slack:
        raise ClippingError(
            f"view of radius {view_radius} at |x|^2={x.norm2()} clips the window boundary"
        )
    r2 = view_radius * view_radius
    offsets = frozenset(p - x for p in points if (p - x).norm2() <= r2)
    return ConfigurationView(x, view_radius, offsets)


def views_equal(a: ConfigurationView, b: ConfigurationView) -> bool:
    if a.view_radius != b.view_radius:
        raise ValueError("views of different radii are not comparable")
    return a.offsets == b.offsets


# ---------------------------------------------------------------------------
# serialization

def window_to_json(window: OrbitWindow, path) -> None:
    dump_json(
        path,
        {
            "kind": "orbit_window",
            "window_id": window.window_id,
            "d": window.d,
            "radius": rat_str(window.radius),
            "seed": window.orbit_seed,
            "label_salt": window.label_salt,
            "c_points": [p.as_strings() for p in window.c_points],
        },
    )


def window_from_json(path) -> OrbitWindow:
    doc = load_json(path)
    if doc.get("kind") != "orbit_window":
        raise ValueError(f"not an orbit_window document: {path}")
    return OrbitWindow(
        window_id=doc["window_id"],
        d=doc["d"],
        radius=parse_rat(doc["radius"]),
        c_points=tuple(GroupPoint.from_strings(p) for p in doc["c_points"]),
        orbit_seed=doc["seed"],
        label_salt=doc["label_salt"],
    )
