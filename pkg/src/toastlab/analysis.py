"""Independent verification of built entire functions.

Critical points are localized by the argument principle: the winding number
of F' around a box counts its zeros, and subdividing while the count stays
positive isolates them.  Only evaluate/derivative of the representation is
used, never its stored critical set, so agreement is evidence rather than
tautology.  Gradient floors and error decay are re-measured on independent
samples against the ledger's telescoped bounds.
"""

from __future__ import annotations

import cmath
import math
import random
import zlib
from dataclasses import dataclass

import numpy as np

from .entire import EntireRep, EpsDeltaLedger, InductionResult
from .toast import Box
from .entire import box_floats, restricted_region

SNAP_RESIDUAL = 0.25


class WindingError(RuntimeError):
    pass


class BoundaryZero(RuntimeError):
    """F' (numerically) vanishes on the contour; the box must be perturbed."""


@dataclass
class LocateStats:
    windings: int = 0
    splits: int = 0
    conservation_checks: int = 0
    retries: int = 0


def _edge_winding(rep: EntireRep, z0: complex, z1: complex, floor: float) -> float:
    """Accumulated argument increment of F' along one edge.

    Adaptive log-ratio quadrature: each step contributes Log of the ratio of
    consecutive derivative values; a step is bisected until its argument
    increment is below pi/2, which pins the branch.  Equivalent to trapezoid
    integration of the log-derivative in the refinement limit, and the real
    parts telescope out on a closed contour.
    """
    total = 0.0
    v0 = complex(rep.derivative_at(np.asarray([z0]))[0])
    if abs(v0) <= floor:
        raise BoundaryZero(f"|F'| = {abs(v0):.3e} at contour point {z0}")
    stack = [(z0, v0, z1, None, 0)]
    while stack:
        a, va, b, vb, depth = stack.pop()
        if vb is None:
            vb = complex(rep.derivative_at(np.asarray([b]))[0])
            if abs(vb) <= floor:
                raise BoundaryZero(f"|F'| = {abs(vb):.3e} at contour point {b}")
        step = cmath.log(vb / va)
        if abs(step.imag) < math.pi / 2 and depth >= 3:
            total += step.imag
            continue
        if depth > 40:
            raise WindingError("argument step refinement exhausted")
        mid = (a + b) / 2
        vm = complex(rep.derivative_at(np.asarray([mid]))[0])
        if abs(vm) <= floor:
            raise BoundaryZero(f"|F'| = {abs(vm):.3e} at contour point {mid}")
        stack.append((mid, vm, b, vb, depth + 1))
        stack.append((a, va, mid, vm, depth + 1))
    return total


def _box_winding(rep: EntireRep, rect: tuple[float, float, float, float],
                 stats: LocateStats, floor: float = 1e-280) -> int:
    xl, xh, yl, yh = rect
    corners = [complex(xl, yl), complex(xh, yl), complex(xh, yh), complex(xl, yh)]
    total = 0.0
    for k in range(4):
        total += _edge_winding(rep, corners[k], corners[(k + 1) % 4], floor)
    winding = total / (2 * math.pi)
    snapped = round(winding)
    if abs(winding - snapped) >= SNAP_RESIDUAL:
        raise WindingError(f"winding {winding} does not snap to an integer")
    stats.windings += 1
    if snapped < 0:
        raise WindingError(f"negative winding {snapped} for a holomorphic derivative")
    return snapped


def locate_critical_points(
    rep: EntireRep,
    region: Box,
    tol: float = 1e-6,
    stats: LocateStats | None = None,
) -> list[tuple[complex, int]]:
    """Zeros of F' inside the region with multiplicities, to within tol.

    Subdivision into quadrants with winding-number bookkeeping; the parent
    count must equal the sum over children at every split (asserted).  A
    contour running into a zero triggers a deterministic sub-tol perturbation
    of the box, up to 8 retries.
    """
    stats = stats if stats is not None else LocateStats()
    base = box_floats(region)
    rng = random.Random(0xC0FFEE ^ zlib.crc32(repr(base).encode()))
    for attempt in range(8):
        jitter = tol * 0.25
        rect = (
            base[0] - jitter * rng.random(),
            base[1] + jitter * rng.random(),
            base[2] - jitter * rng.random(),
            base[3] + jitter * rng.random(),
        )
        try:
            found = _subdivide(rep, rect, tol, stats, rng)
            found.sort(key=lambda pm: (pm[0].real, pm[0].imag))
            return found
        except BoundaryZero:
            stats.retries += 1
            continue
    raise WindingError("boundary-zero retry budget exhausted")


def _subdivide(rep, rect, tol, stats: LocateStats, rng) -> list[tuple[complex, int]]:
    winding = _box_winding(rep, rect, stats)
    if winding == 0:
        return []
    xl, xh, yl, yh = rect
    if max(xh - xl, yh - yl) <= tol:
        return [(complex((xl + xh) / 2, (yl + yh) / 2), winding)]
    for _ in range(8):
        # split near the center, jittered so zeros never sit on the cross
        fx = 0.5 + (rng.random() - 0.5) * 0.2
        fy = 0.5 + (rng.random() - 0.5) * 0.2
        xm = xl + (xh - xl) * fx
        ym = yl + (yh - yl) * fy
        quads = [
            (xl, xm, yl, ym),
            (xm, xh, yl, ym),
            (xl, xm, ym, yh),
            (xm, xh, ym, yh),
        ]
        try:
            child_windings = [_box_winding(rep, q, stats) for q in quads]
        except BoundaryZero:
            continue
        stats.splits += 1
        stats.conservation_checks += 1
        if sum(child_windings) != winding:
            raise WindingError(
                f"winding not conserved under subdivision: {winding} -> {child_windings}"
            )
        out = []
        for q, w in zip(quads, child_windings):
            if w > 0:
                out.extend(_subdivide(rep, q, tol, stats, rng))
        return out
    raise BoundaryZero("could not find a zero-free subdivision cross")


# ---------------------------------------------------------------------------
# gradient floor and error decay

@dataclass
class FloorRow:
    region_id: str
    level: int
    floor: float
    measured_min: float
    ok: bool

    def csv(self) -> list:
        return [self.region_id, self.level, repr(self.floor), repr(self.measured_min),
                "OK" if self.ok else "FAIL"]


@dataclass
class FloorReport:
    rows: list[FloorRow]

    def ok(self) -> bool:
        return all(r.ok for r in self.rows)


def _ancestor_chain(result: InductionResult, rid: str) -> list[str]:
    parents = {}
    for parent, children in result.ledger.nesting.items():
        for c in children:
            parents[c] = parent
    chain = []
    cur = rid
    while cur in parents:
        cur = parents[cur]
        chain.append(cur)
    return chain


def verify_gradient_floor(result: InductionResult, seed: int = 7, samples: int = 1024) -> FloorReport:
    """Independently sampled min |F_top'| per restricted region against the
    telescoped ledger floor delta_n - sum of measured gradient drifts above."""
    regions = {}
    for level in result.toast.levels:
        for region in level.regions:
            regions[f"L{level.n}@" + ",".join(region.center.as_strings())] = region
    section_f = [p.to_complex() for p in result.section_points]
    rows = []
    for row in result.ledger.rows:
        rid = row.region_id
        chain = _ancestor_chain(result, rid)
        top_id = chain[-1] if chain else rid
        top_fn = result.functions[top_id]
        drift = sum(result.ledger.row(a).grad_diff_sup for a in chain)
        floor = row.delta_clamped - drift
        region = regions[rid]
        rr = restricted_region(region.absolute(), row.level, section_f)
        rng = np.random.default_rng(seed ^ zlib.crc32(rid.encode()))
        xl, xh, yl, yh = box_floats(region.absolute())
        m = row.level
        margin = 2.0 ** (-m)
        pts = []
        guard = 0
        while len(pts) < samples and guard < samples * 100:
            guard += 1
            z = complex(
                rng.uniform(xl + margin, xh - margin), rng.uniform(yl + margin, yh - margin)
            )
            if all(abs(z - p) > margin for p in rr.excluded):
                pts.append(z)
        vals = np.abs(top_fn.derivative_at(np.asarray(pts)))
        measured = float(vals.min())
        rows.append(FloorRow(rid, row.level, floor, measured, floor > 0 and measured >= floor))
    return FloorReport(rows)


@dataclass
class DecayRow:
    level: int
    eps: float
    measured_sup: float
    tail: float

    def csv(self) -> list:
        return [self.level, repr(self.eps), repr(self.measured_sup), repr(self.tail)]


def error_decay_report(ledger: EpsDeltaLedger) -> list[DecayRow]:
    """Per level: the eps budget, the worst measured sup error, and the tail
    sum of later budgets.  Levels must stay within budget."""
    rows = []
    top = ledger.max_level()
    for n in range(0, top + 1):
        level_rows = ledger.rows_at(n)
        if not level_rows:
            continue
        eps = max(r.eps for r in level_rows)
        measured = max(r.sup_err for r in level_rows)
        tail = 0.0
        for j in range(n + 1, top + 1):
            later = ledger.rows_at(j)
            if later:
                tail += max(r.eps for r in later)
        rows.append(DecayRow(n, eps, measured, tail))
    return rows
