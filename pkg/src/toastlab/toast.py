"""Grid/corridor toast construction and validation with exact box arithmetic.

A toast is a finite tower of levels; each level lays a grid of cells with a
seeded rational offset, shrinks cells away from their faces by half the
level's corridor width, and carves out corridor slabs along the subgrids of
all coarser levels.  Every containment or disjointness decision in this
module is an exact rational comparison; there is no tolerance anywhere.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .group_model import GroupPoint
from .orbit_window import OrbitWindow
from .serialize import dump_json, load_json, parse_rat, rat_str

MIN_PIECE_WIDTH = Fraction(9, 16)  # keeps the common ball B_{1/4} inside every piece
OFFSET_DENOMINATOR = 16
MAX_OFFSET_TRIES = 20000


class ToastConstructionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# boxes

@dataclass(frozen=True)
class Box:
    lo: GroupPoint
    hi: GroupPoint

    def __post_init__(self):
        if len(self.lo.coords) != len(self.hi.coords):
            raise ValueError("corner dimension mismatch")
        if any(a >= b for a, b in zip(self.lo.coords, self.hi.coords)):
            raise ValueError("box must have nonempty interior (lo < hi coordinatewise)")

    @staticmethod
    def of(lo_coords, hi_coords) -> "Box":
        return Box(GroupPoint.of(*lo_coords), GroupPoint.of(*hi_coords))

    @property
    def dim(self) -> int:
        return len(self.lo.coords)

    def side(self, axis: int) -> Fraction:
        return self.hi.coords[axis] - self.lo.coords[axis]

    def center(self) -> GroupPoint:
        return GroupPoint(
            tuple((a + b) / 2 for a, b in zip(self.lo.coords, self.hi.coords))
        )

    def translated(self, offset: GroupPoint) -> "Box":
        return Box(self.lo + offset, self.hi + offset)

    def contains_point(self, p: GroupPoint) -> bool:
        return all(
            lo <= c <= hi for lo, c, hi in zip(self.lo.coords, p.coords, self.hi.coords)
        )

    def contains_box(self, other: "Box") -> bool:
        return all(
            slo <= olo and ohi <= shi
            for slo, shi, olo, ohi in zip(
                self.lo.coords, self.hi.coords, other.lo.coords, other.hi.coords
            )
        )

    def contains_box_interior(self, other: "Box") -> bool:
        return all(
            slo < olo and ohi < shi
            for slo, shi, olo, ohi in zip(
                self.lo.coords, self.hi.coords, other.lo.coords, other.hi.coords
            )
        )

    def intersects(self, other: "Box") -> bool:
        """Closed boxes: sharing a face already counts as intersecting."""
        return all(
            olo <= shi and slo <= ohi
            for slo, shi, olo, ohi in zip(
                self.lo.coords, self.hi.coords, other.lo.coords, other.hi.coords
            )
        )

    def min_halfwidth(self) -> Fraction:
        return min(self.side(a) for a in range(self.dim)) / 2


def _cut_interval(
    lo: Fraction, hi: Fraction, slabs: Sequence[tuple[Fraction, Fraction]]
) -> list[tuple[Fraction, Fraction]]:
    """Remove closed slabs [a, b] from [lo, hi]; return surviving closed pieces."""
    pieces = [(lo, hi)]
    for a, b in slabs:
        nxt = []
        for plo, phi in pieces:
            if b <= plo or a >= phi:
                nxt.append((plo, phi))
                continue
            if a > plo:
                nxt.append((plo, a))
            if b < phi:
                nxt.append((b, phi))
        pieces = nxt
    return pieces


def corridor_cut(
    boxes: Sequence[Box], hyperplanes: Sequence[Sequence[Fraction]], width: Fraction
) -> list[Box]:
    """Cut corridors of the given width along axis-aligned hyperplanes.

    ``hyperplanes[axis]`` lists coordinates; the closed slab of half ``width``
    around each is removed from every box.  Pieces are returned in a canonical
    order; annihilated boxes simply vanish.
    """
    half = Fraction(width) / 2
    out: list[Box] = []
    for box in boxes:
        per_axis = []
        for axis in range(box.dim):
            slabs = [(h - half, h + half) for h in hyperplanes[axis]]
            per_axis.append(_cut_interval(box.lo.coords[axis], box.hi.coords[axis], slabs))
        out.extend(_boxes_from_axes(per_axis))
    out.sort(key=lambda b: b.lo.sort_key())
    return out


def _boxes_from_axes(per_axis: list[list[tuple[Fraction, Fraction]]]) -> list[Box]:
    boxes = []

    def rec(axis, lo_acc, hi_acc):
        if axis == len(per_axis):
            boxes.append(Box(GroupPoint(tuple(lo_acc)), GroupPoint(tuple(hi_acc))))
            return
        for lo, hi in per_axis[axis]:
            rec(axis + 1, lo_acc + [lo], hi_acc + [hi])

    rec(0, [], [])
    return boxes


def face_split(boxes: Sequence[Box], width: Fraction) -> list[Box]:
    """Cut corridors along every face hyperplane that slices some box.

    A face coordinate h on some axis becomes a cut iff it lies strictly inside
    another box on that axis; the slab then applies to all boxes, including
    edge shaves of boxes whose own face produced it.  Iterates to a fixed
    point (reached after one pass except in degenerate hand-built layouts).
    """
    current = list(boxes)
    for _ in range(8):
        if not current:
            return []
        dim = current[0].dim
        cuts: list[list[Fraction]] = [[] for _ in range(dim)]
        for axis in range(dim):
            faces = set()
            for b in current:
                faces.add(b.lo.coords[axis])
                faces.add(b.hi.coords[axis])
            cuts[axis] = sorted(
                h
                for h in faces
                if any(b.lo.coords[axis] < h < b.hi.coords[axis] for b in current)
            )
        if not any(cuts):
            return sorted(current, key=lambda b: b.lo.sort_key())
        current = corridor_cut(current, cuts, width)
    raise ToastConstructionError("face splitting did not reach a fixed point")


# ---------------------------------------------------------------------------
# toast data model

@dataclass(frozen=True)
class Region:
    level: int
    center: GroupPoint
    shape: Box  # center-relative
    cell: tuple[int, ...] | None = None

    def absolute(self) -> Box:
        try:
            return object.__getattribute__(self, "_abs_box")
        except AttributeError:
            box = self.shape.translated(self.center)
            object.__setattr__(self, "_abs_box", box)
            return box


@dataclass(frozen=True)
class ToastLevel:
    n: int
    cell_side: Fraction
    grid_offset: GroupPoint
    corridor: Fraction
    regions: tuple[Region, ...]


@dataclass(frozen=True)
class ToastParams:
    cell_side0: Fraction = Fraction(4)
    corridor0: Fraction = Fraction(1, 10)
    levels: int = 3
    branch: int = 4
    offset_seed: int = 0
    misalign_axes: int | None = None  # None = all axes misaligned between levels
    min_piece: Fraction = MIN_PIECE_WIDTH  # offsets resampled until pieces reach this
    corridor_schedule: tuple | None = None  # explicit per-level widths, halving past the end

    def cell_side(self, n: int) -> Fraction:
        return Fraction(self.cell_side0) * self.branch ** n

    def corridor(self, n: int) -> Fraction:
        sched = self.corridor_schedule
        if sched:
            if n < len(sched):
                return Fraction(sched[n])
            return Fraction(sched[-1]) / 2 ** (n - len(sched) + 1)
        return Fraction(self.corridor0) / 2 ** n


@dataclass(frozen=True)
class Toast:
    window_id: str
    d: int
    params: ToastParams
    levels: tuple[ToastLevel, ...]

    @property
    def dim(self) -> int:
        return 2 * self.d

    @property
    def top(self) -> ToastLevel:
        return self.levels[-1]

    def regions_at(self, n: int) -> tuple[Region, ...]:
        return self.levels[n].regions


# ---------------------------------------------------------------------------
# grid helpers

def _cell_index(offset: Fraction, side: Fraction, x: Fraction) -> int:
    q = (x - offset) / side
    return q.numerator // q.denominator  # exact floor


def _subgrid_positions(offset: Fraction, spacing: Fraction, lo: Fraction, hi: Fraction):
    """Hyperplane coordinates offset + spacing*Z within [lo, hi]."""
    start = -(-(lo - offset) // spacing)  # ceil
    pos = offset + start * spacing
    out = []
    while pos <= hi:
        out.append(pos)
        pos += spacing
    return out


def _axis_pieces(
    params: ToastParams,
    offsets: list[GroupPoint],
    level: int,
    axis: int,
    cell: int,
) -> list[tuple[Fraction, Fraction]]:
    """Per-axis decomposition of one cell: shrink by the level corridor, then
    remove the slabs of every coarser stage's subgrid."""
    side = params.cell_side(level)
    o = offsets[level].coords[axis]
    lo = o + cell * side
    hi = lo + side
    theta = params.corridor(level)
    base_lo, base_hi = lo + theta / 2, hi - theta / 2
    slabs = []
    for stage in range(level + 1, params.levels):
        spacing = params.cell_side(stage - 1)
        width = params.corridor(stage - 1)
        for h in _subgrid_positions(offsets[stage].coords[axis], spacing, lo, hi):
            slabs.append((h - width / 2, h + width / 2))
    return _cut_interval(base_lo, base_hi, slabs)


def _axis_margin_ok(params: ToastParams, offsets: list[GroupPoint], dim: int) -> bool:
    """Every per-axis piece that can arise anywhere has width >= MIN_PIECE_WIDTH.

    Uses the residue structure: within a level-m cell frame, stage-k cuts land
    at the single residue (o_k - o_m) mod L_m; checking all subsets of stages
    present covers every cell configuration.
    """
    for m in range(params.levels):
        side = params.cell_side(m)
        theta = params.corridor(m)
        for axis in range(dim):
            cuts = []
            for k in range(m + 1, params.levels):
                r = (offsets[k].coords[axis] - offsets[m].coords[axis]) % side
                w = params.corridor(k - 1) / 2
                for shift in (-side, Fraction(0), side):
                    cuts.append((r + shift - w, r + shift + w))
            pieces = _cut_interval(theta / 2, side - theta / 2, cuts)
            if not pieces:
                return False
            if any(hi - lo < Fraction(params.min_piece) for lo, hi in pieces):
                return False
    return True


def _sample_offsets(params: ToastParams, dim: int) -> list[GroupPoint]:
    """Seeded rational grid offsets, resampled until the corridor margins hold
    and consecutive levels are misaligned on the requested number of axes."""
    rng = random.Random(params.offset_seed)
    want_misaligned = dim if params.misalign_axes is None else min(params.misalign_axes, dim)
    for _ in range(MAX_OFFSET_TRIES):
        offsets = []
        for n in range(params.levels):
            side = params.cell_side(n)
            steps = int(side * OFFSET_DENOMINATOR)
            coords = tuple(
                Fraction(rng.randrange(1, steps), OFFSET_DENOMINATOR) for _ in range(dim)
            )
            offsets.append(GroupPoint(coords))
        # aligned axes copy the previous level's residue; cheapens dense dims
        for n in range(1, params.levels):
            fine = params.cell_side(n - 1)
            coords = list(offsets[n].coords)
            for axis in range(want_misaligned, dim):
                shift = (coords[axis] - offsets[n - 1].coords[axis]) % fine
                coords[axis] = (coords[axis] - shift) % params.cell_side(n)
                if coords[axis] == 0:
                    coords[axis] = fine
            offsets[n] = GroupPoint(tuple(coords))
        ok = _axis_margin_ok(params, offsets, dim)
        if ok:
            for n in range(1, params.levels):
                fine = params.cell_side(n - 1)
                misaligned = sum(
                    1
                    for axis in range(dim)
                    if (offsets[n].coords[axis] - offsets[n - 1].coords[axis]) % fine != 0
                )
                if misaligned < want_misaligned:
                    ok = False
                    break
        if ok:
            return offsets
    raise ToastConstructionError(
        "could not sample grid offsets satisfying the corridor margins; "
        "corridor widths too large for the cell sides"
    )


# ---------------------------------------------------------------------------
# construction

def build_grid_toast(window: OrbitWindow, params: ToastParams) -> Toast:
    """Deterministic level-by-level construction on a window.

    Level n regions are grid cells shrunk by half the level corridor, minus
    the corridor slabs of every coarser stage; regions are kept top-down, a
    piece surviving only inside a kept coarser region.  Region centers are
    exact box centers, so the shape catalogue stays finite.
    """
    if window.d not in (1, 2):
        raise ToastConstructionError(f"d={window.d} not supported (d must be 1 or 2)")
    dim = 2 * window.d
    top = params.levels - 1
    if window.radius < params.cell_side(top):
        raise ToastConstructionError(
            f"window radius {window.radius} smaller than the top cell side "
            f"{params.cell_side(top)}"
        )
    offsets = _sample_offsets(params, dim)
    r = window.radius

    levels: list[ToastLevel] = []
    kept_by_cell: dict[tuple[int, ...], list[Region]] = {}
    for n in range(top, -1, -1):
        side = params.cell_side(n)
        theta = params.corridor(n)
        if n == top:
            cells = _complete_cells(offsets[n], side, r, dim)
        else:
            cells = _cells_under(kept_by_cell, offsets[n], side, dim)
        regions = []
        next_by_cell: dict[tuple[int, ...], list[Region]] = {}
        for cell in sorted(cells):
            per_axis = [
                _axis_pieces(params, offsets, n, axis, cell[axis]) for axis in range(dim)
            ]
            if any(not pieces for pieces in per_axis):
                raise ToastConstructionError(
                    f"corridor annihilated the level-{n} region of cell {cell}"
                )
            for box in _boxes_from_axes(per_axis):
                if n < top and not _covered_by_parent(box, kept_by_cell, offsets[n + 1], params.cell_side(n + 1)):
                    continue
                if box.min_halfwidth() < Fraction(1, 4):
                    raise ToastConstructionError(
                        f"level-{n} piece in cell {cell} too thin for the common ball"
                    )
                region = Region(n, box.center(), box.translated(-box.center()), cell)
                regions.append(region)
                next_by_cell.setdefault(cell, []).append(region)
        regions.sort(key=lambda reg: reg.center.sort_key())
        levels.append(ToastLevel(n, side, offsets[n], theta, tuple(regions)))
        kept_by_cell = next_by_cell
    levels.reverse()
    return Toast(window.window_id, window.d, params, tuple(levels))


def _complete_cells(offset: GroupPoint, side: Fraction, radius: Fraction, dim: int):
    ranges = []
    for axis in range(dim):
        o = offset.coords[axis]
        i_min = -(-(-radius - o) // side)  # ceil((-r - o)/side)
        i_max = (radius - o) // side - 1
        ranges.append(range(int(i_min), int(i_max) + 1))
    cells = [()]
    for rng_axis in ranges:
        cells = [c + (i,) for c in cells for i in rng_axis]
    return cells


def _cells_under(
    kept_by_cell: dict[tuple[int, ...], list[Region]],
    offset: GroupPoint,
    side: Fraction,
    dim: int,
):
    cells = set()
    for regions in kept_by_cell.values():
        for region in regions:
            box = region.absolute()
            ranges = []
            for axis in range(dim):
                o = offset.coords[axis]
                lo = _cell_index(o, side, box.lo.coords[axis])
                hi = _cell_index(o, side, box.hi.coords[axis])
                ranges.append(range(lo, hi + 1))
            pts = [()]
            for rng_axis in ranges:
                pts = [c + (i,) for c in pts for i in rng_axis]
            cells.update(pts)
    return cells


def _covered_by_parent(box: Box, kept_by_cell, parent_offset: GroupPoint, parent_side: Fraction) -> bool:
    cell = tuple(
        _cell_index(parent_offset.coords[axis], parent_side, box.lo.coords[axis])
        for axis in range(box.dim)
    )
    for region in kept_by_cell.get(cell, ()):
        if region.absolute().contains_box(box):
            return True
    return False


# ---------------------------------------------------------------------------
# polynomial convexity checkers

def is_polyconvex_d1(boxes: Sequence[Box]) -> bool:
    """A finite union of closed planar boxes is polynomially convex iff the
    boxes are pairwise disjoint (the complement is then connected)."""
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if boxes[i].intersects(boxes[j]):
                return False
    return True


def is_grid_separated(boxes: Sequence[Box]) -> bool:
    """Certify the grid-arrangement property by recursive hyperplane splits.

    True iff the (pairwise disjoint) boxes can be recursively separated by
    axis-aligned hyperplanes that meet no box.  Candidates are restricted to
    box faces: a valid separating hyperplane can always slide to a face.
    Overlapping input raises.
    """
    if not is_polyconvex_d1(boxes):
        raise ValueError("boxes overlap; grid separation undefined")
    return _grid_separated_rec(list(boxes))


def _grid_separated_rec(boxes: list[Box]) -> bool:
    if len(boxes) <= 1:
        return True
    dim = boxes[0].dim
    for axis in range(dim):
        faces = sorted({b.lo.coords[axis] for b in boxes} | {b.hi.coords[axis] for b in boxes})
        for h in faces:
            if any(b.lo.coords[axis] < h < b.hi.coords[axis] for b in boxes):
                continue
            lo_side = [b for b in boxes if b.hi.coords[axis] <= h]
            hi_side = [b for b in boxes if b.lo.coords[axis] >= h]
            if not lo_side or not hi_side or len(lo_side) + len(hi_side) != len(boxes):
                continue
            if _grid_separated_rec(lo_side) and _grid_separated_rec(hi_side):
                return True
    return False


def children_map(toast: Toast) -> dict[int, dict[int, list[int]]]:
    """For each level n >= 1, parent region index -> indices of the level-(n-1)
    regions it contains (cell-indexed lookup, exact containment confirmed)."""
    out: dict[int, dict[int, list[int]]] = {}
    for n in range(1, len(toast.levels)):
        coarse = toast.levels[n]
        by_cell: dict = {}
        for idx, region in enumerate(coarse.regions):
            by_cell.setdefault(region.cell, []).append(idx)
        mapping: dict[int, list[int]] = {i: [] for i in range(len(coarse.regions))}
        for sub_idx, sub in enumerate(toast.regions_at(n - 1)):
            box = sub.absolute()
            if None in by_cell:
                candidates = range(len(coarse.regions))
            else:
                cell = tuple(
                    _cell_index(coarse.grid_offset.coords[a], coarse.cell_side, box.lo.coords[a])
                    for a in range(box.dim)
                )
                candidates = by_cell.get(cell, ())
            for idx in candidates:
                if coarse.regions[idx].absolute().contains_box(box):
                    mapping[idx].append(sub_idx)
                    break
        out[n] = mapping
    return out


def subregion_layout(toast: Toast, region: Region) -> list[Box]:
    """Shapes of the next-finer regions inside ``region``, translated by the
    exact center cocycles into the region's local frame."""
    if region.level == 0:
        return []
    out = []
    target = region.absolute()
    for sub in toast.regions_at(region.level - 1):
        abs_box = sub.absolute()
        if target.contains_box(abs_box):
            out.append(abs_box.translated(-region.center))
    return out


def validate_polyconvex_toast(toast: Toast) -> bool:
    """Every region's family of subregion shapes must be polynomially convex:
    pairwise disjoint for d = 1, grid-separated for d = 2."""
    kids = children_map(toast)
    for n in range(1, len(toast.levels)):
        subs = toast.regions_at(n - 1)
        for idx, region in enumerate(toast.levels[n].regions):
            boxes = [
                subs[i].absolute().translated(-region.center) for i in kids[n][idx]
            ]
            if len(boxes) <= 1:
                continue
            if not is_polyconvex_d1(boxes):
                return False
            if toast.d == 2 and not is_grid_separated(boxes):
                return False
    return True


def remove_one_corridor(toast: Toast) -> Toast:
    """Mutation for negative tests: expand one region across the corridor to
    its nearest same-level sibling so the pair touches."""
    for n in range(toast.params.levels - 1, -1, -1):
        regions = toast.regions_at(n)
        for i in range(len(regions)):
            for j in range(len(regions)):
                if i == j:
                    continue
                a, b = regions[i].absolute(), regions[j].absolute()
                for axis in range(a.dim):
                    others = [ax for ax in range(a.dim) if ax != axis]
                    if a.hi.coords[axis] < b.lo.coords[axis] and all(
                        a.lo.coords[ax] < b.hi.coords[ax] and b.lo.coords[ax] < a.hi.coords[ax]
                        for ax in others
                    ):
                        new_hi = tuple(
                            b.lo.coords[axis] if ax == axis else a.hi.coords[ax]
                            for ax in range(a.dim)
                        )
                        grown = Box(a.lo, GroupPoint(new_hi))
                        mutated = Region(
                            n, grown.center(), grown.translated(-grown.center()), regions[i].cell
                        )
                        new_regions = list(regions)
                        new_regions[i] = mutated
                        new_levels = list(toast.levels)
                        lvl = new_levels[n]
                        new_levels[n] = ToastLevel(
                            lvl.n, lvl.cell_side, lvl.grid_offset, lvl.corridor, tuple(new_regions)
                        )
                        return Toast(toast.window_id, toast.d, toast.params, tuple(new_levels))
    raise ValueError("no corridor-adjacent region pair found to mutate")


# ---------------------------------------------------------------------------
# validation report

@dataclass
class ItemResult:
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    notes: list[str] = field(default_factory=list)

    def ok(self) -> bool:
        return self.failed == 0


@dataclass
class ToastReport:
    items: dict[int, ItemResult]
    beyond_depth_pairs: int = 0

    def ok(self) -> bool:
        return all(res.ok() for res in self.items.values())

    def total_checks(self) -> int:
        return sum(r.passed + r.failed + r.skipped for r in self.items.values())

    def total_skips(self) -> int:
        return sum(r.skipped for r in self.items.values())

    def rows(self) -> list[list]:
        out = []
        for item in sorted(self.items):
            r = self.items[item]
            note = "|".join(r.notes[:3])
            out.append([item, r.passed, r.failed, r.skipped, "OK" if r.ok() else "FAIL", note])
        return out


def validate_toast(toast: Toast, window: OrbitWindow) -> ToastReport:
    """Check the seven toast conditions with exact arithmetic, window-relative.

    Items 1-3, 5, 7 are absolute; item 4 is checked on next-to-top region
    pairs sharing a complete top cell (pairs needing a deeper level than
    built are counted separately, boundary-clipped cells skip); item 6 checks
    that the central half-radius box is blanketed by complete top cells
    carrying full-size regions.
    """
    items = {k: ItemResult() for k in range(1, 8)}
    report = ToastReport(items)
    dim = toast.dim

    # (1) same-level disjointness
    for level in toast.levels:
        by_cell: dict = {}
        for region in level.regions:
            by_cell.setdefault(region.cell, []).append(region)
        if None in by_cell and len(level.regions) > 2000:
            raise ToastConstructionError("uncelled toast too large for all-pairs validation")
        groups = by_cell.values() if None not in by_cell else [list(level.regions)]
        for region in level.regions:
            if region.cell is not None:
                cell_box = _cell_box(level, region.cell, dim)
                if not cell_box.contains_box(region.absolute()):
                    items[1].failed += 1
                    items[1].notes.append(f"region escapes its cell at level {level.n}")
        for group in groups:
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    if group[i].absolute().intersects(group[j].absolute()):
                        items[1].failed += 1
                        items[1].notes.append(
                            f"level {level.n}: {group[i].center.as_strings()} meets "
                            f"{group[j].center.as_strings()}"
                        )
                    else:
                        items[1].passed += 1

    # (2) coherence and (3) next-level containment
    # regions proven inside their cells by item 1, so only the coarse cells a
    # fine box overlaps can host intersecting coarse regions
    levels_by_cell = []
    for level in toast.levels:
        by_cell: dict = {}
        for region in level.regions:
            by_cell.setdefault(region.cell, []).append(region)
        levels_by_cell.append(by_cell)
    celled = all(None not in bc for bc in levels_by_cell if bc)
    for n in range(len(toast.levels) - 1):
        for m in range(n + 1, len(toast.levels)):
            coarse = toast.levels[m]
            for region in toast.levels[n].regions:
                box = region.absolute()
                if celled:
                    candidates = [
                        r
                        for c in _cells_overlapping(coarse, box, dim)
                        for r in levels_by_cell[m].get(c, ())
                    ]
                else:
                    candidates = list(coarse.regions)
                hit = [c for c in candidates if c.absolute().intersects(box)]
                contained = [c for c in hit if c.absolute().contains_box(box)]
                if len(hit) == len(contained) <= 1:
                    items[2].passed += 1
                else:
                    items[2].failed += 1
                    items[2].notes.append(
                        f"level-{n} region at {region.center.as_strings()} neither nested "
                        f"nor disjoint at level {m}"
                    )
                if m == n + 1:
                    if contained:
                        items[3].passed += 1
                    else:
                        items[3].failed += 1
                        items[3].notes.append(
                            f"level-{n} region at {region.center.as_strings()} has no parent"
                        )

    # (4) directedness on next-to-top pairs
    if len(toast.levels) >= 2:
        top = toast.top
        below = toast.levels[-2].regions
        by_top_cell: dict = {}
        for region in below:
            cell = tuple(
                _cell_index(top.grid_offset.coords[a], top.cell_side, region.absolute().lo.coords[a])
                for a in range(dim)
            )
            by_top_cell.setdefault(cell, []).append(region)
        top_by_cell = {r.cell: r for r in top.regions}
        for cell, group in sorted(by_top_cell.items()):
            parent = top_by_cell.get(cell)
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    if parent is None:
                        items[4].skipped += 1  # top cell clipped by the window boundary
                        continue
                    pbox = parent.absolute()
                    if pbox.contains_box_interior(group[i].absolute()) and pbox.contains_box_interior(
                        group[j].absolute()
                    ):
                        items[4].passed += 1
                    else:
                        items[4].failed += 1
        # pairs across distinct top cells need a deeper level than built
        total = sum(len(g) for g in by_top_cell.values())
        within = sum(len(g) * (len(g) - 1) // 2 for g in by_top_cell.values())
        report.beyond_depth_pairs = total * (total - 1) // 2 - within
        if report.beyond_depth_pairs:
            items[4].notes.append(
                f"{report.beyond_depth_pairs} pairs span distinct top cells; "
                f"level {len(toast.levels)} would be needed"
            )

    # (5) the common ball B_{1/4}
    for level in toast.levels:
        for region in level.regions:
            if region.shape.min_halfwidth() >= Fraction(1, 4) and region.shape.contains_point(
                GroupPoint.zero(dim)
            ):
                items[5].passed += 1
            else:
                items[5].failed += 1
                items[5].notes.append(f"level {level.n} shape too thin for B_1/4")

    # (6) central coverage by the top level
    top = toast.top
    top_by_cell = {r.cell: r for r in top.regions}
    half = window.radius / 2
    steps = 8 if dim == 2 else 4
    for idx in _grid_samples(dim, steps):
        p = GroupPoint(tuple(-half + Fraction(2 * half * i, steps) for i in idx))
        cell = tuple(
            _cell_index(top.grid_offset.coords[a], top.cell_side, p.coords[a]) for a in range(dim)
        )
        cell_box = _cell_box(top, cell, dim)
        inside_window = all(
            -window.radius <= c and h <= window.radius
            for c, h in zip(cell_box.lo.coords, cell_box.hi.coords)
        )
        if not inside_window:
            items[6].skipped += 1  # exhaustion not witnessable at the boundary
            continue
        region = top_by_cell.get(cell)
        in_region = region is not None and region.absolute().contains_point(p)
        in_margin = any(
            p.coords[a] - cell_box.lo.coords[a] < top.corridor / 2
            or cell_box.hi.coords[a] - p.coords[a] < top.corridor / 2
            for a in range(dim)
        )
        if in_region or (region is not None and in_margin):
            items[6].passed += 1
        else:
            items[6].failed += 1
            items[6].notes.append(f"central sample {p.as_strings()} uncovered")

    # (7) countable catalogue with bounded denominators
    max_den = 1
    shapes = set()
    for level in toast.levels:
        for region in level.regions:
            shapes.add((level.n, region.shape.lo.coords, region.shape.hi.coords))
            for c in region.center.coords + region.shape.lo.coords + region.shape.hi.coords:
                max_den = max(max_den, c.denominator)
    bound = OFFSET_DENOMINATOR * 4 * _den_bound(toast.params)
    if len(shapes) < 10 ** 6 and max_den <= bound:
        items[7].passed += 1
        items[7].notes.append(f"{len(shapes)} shapes, max denominator {max_den}")
    else:
        items[7].failed += 1
        items[7].notes.append(f"denominator {max_den} exceeds bound {bound}")
    return report


def _den_bound(params: ToastParams) -> int:
    den = Fraction(params.corridor0).denominator
    return den * 2 ** (params.levels + 1) * Fraction(params.cell_side0).denominator


def _cell_box(level: ToastLevel, cell: tuple[int, ...], dim: int) -> Box:
    lo = tuple(level.grid_offset.coords[a] + cell[a] * level.cell_side for a in range(dim))
    hi = tuple(c + level.cell_side for c in lo)
    return Box(GroupPoint(lo), GroupPoint(hi))


def _cells_overlapping(level: ToastLevel, box: Box, dim: int):
    ranges = []
    for a in range(dim):
        lo = _cell_index(level.grid_offset.coords[a], level.cell_side, box.lo.coords[a])
        hi = _cell_index(level.grid_offset.coords[a], level.cell_side, box.hi.coords[a])
        ranges.append(range(lo, hi + 1))
    cells = [()]
    for rng_axis in ranges:
        cells = [c + (i,) for c in cells for i in rng_axis]
    return cells


def _grid_samples(dim: int, steps: int):
    idx = [()]
    for _ in range(dim):
        idx = [c + (i,) for c in idx for i in range(steps + 1)]
    return idx


def catalogue_summary(toast: Toast) -> dict[int, dict]:
    """Distinct (shape, subregion-configuration) keys per level: the catalogue
    that function reuse is keyed on downstream."""
    kids = children_map(toast)
    out = {}
    for level in toast.levels:
        keys = set()
        subs = toast.regions_at(level.n - 1) if level.n >= 1 else ()
        for idx, region in enumerate(level.regions):
            if level.n == 0:
                layout = ()
            else:
                layout = tuple(
                    sorted(
                        (
                            tuple((subs[i].center - region.center).coords),
                            subs[i].shape.lo.coords,
                            subs[i].shape.hi.coords,
                        )
                        for i in kids[level.n][idx]
                    )
                )
            keys.add((region.shape.lo.coords, region.shape.hi.coords, layout))
        out[level.n] = {"regions": len(level.regions), "catalogue_keys": len(keys)}
    return out


# ---------------------------------------------------------------------------
# serialization

def toast_to_json(toast: Toast, path) -> None:
    dump_json(
        path,
        {
            "kind": "toast",
            "window_id": toast.window_id,
            "d": toast.d,
            "params": {
                "cell_side0": rat_str(Fraction(toast.params.cell_side0)),
                "corridor0": rat_str(Fraction(toast.params.corridor0)),
                "levels": toast.params.levels,
                "branch": toast.params.branch,
                "offset_seed": toast.params.offset_seed,
                "misalign_axes": toast.params.misalign_axes,
                "min_piece": rat_str(Fraction(toast.params.min_piece)),
                "corridor_schedule": [rat_str(Fraction(t)) for t in toast.params.corridor_schedule]
                if toast.params.corridor_schedule
                else None,
            },
            "levels": [
                {
                    "n": lvl.n,
                    "cell_side": rat_str(lvl.cell_side),
                    "grid_offset": lvl.grid_offset.as_strings(),
                    "corridor": rat_str(lvl.corridor),
                    "regions": [
                        {
                            "center": r.center.as_strings(),
                            "shape_lo": r.shape.lo.as_strings(),
                            "shape_hi": r.shape.hi.as_strings(),
                            "cell": list(r.cell) if r.cell is not None else None,
                        }
                        for r in lvl.regions
                    ],
                }
                for lvl in toast.levels
            ],
        },
    )


def toast_from_json(path) -> Toast:
    doc = load_json(path)
    if doc.get("kind") != "toast":
        raise ValueError(f"not a toast document: {path}")
    p = doc["params"]
    params = ToastParams(
        cell_side0=parse_rat(p["cell_side0"]),
        corridor0=parse_rat(p["corridor0"]),
        levels=p["levels"],
        branch=p["branch"],
        offset_seed=p["offset_seed"],
        misalign_axes=p["misalign_axes"],
        min_piece=parse_rat(p["min_piece"]),
        corridor_schedule=tuple(parse_rat(t) for t in p["corridor_schedule"])
        if p.get("corridor_schedule")
        else None,
    )
    levels = []
    for lvl in doc["levels"]:
        regions = tuple(
            Region(
                lvl["n"],
                GroupPoint.from_strings(r["center"]),
                Box(GroupPoint.from_strings(r["shape_lo"]), GroupPoint.from_strings(r["shape_hi"])),
                tuple(r["cell"]) if r["cell"] is not None else None,
            )
            for r in lvl["regions"]
        )
        levels.append(
            ToastLevel(
                lvl["n"],
                parse_rat(lvl["cell_side"]),
                GroupPoint.from_strings(lvl["grid_offset"]),
                parse_rat(lvl["corridor"]),
                regions,
            )
        )
    return Toast(doc["window_id"], doc["d"], params, tuple(levels))
