"""Entire functions with prescribed critical sets, built by approximation.

The representation makes the critical set a structural fact rather than a
numerical target: every function is F(z) = c + int_a^z prod_{p in P}(w-p)
exp(g(w)) dw, so F' vanishes exactly on P.  Approximation pressure falls
entirely on the sup-error objective: the exponent polynomial g and the
anchor value c are fitted so F tracks the target functions on their boxes.

The induction walks a validated toast bottom-up, fitting one function per
region-configuration catalogue key and recording the epsilon/delta ledger
that keeps the limit's gradient floor positive.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .toast import Box, Toast, Region, is_polyconvex_d1
from .group_model import GroupPoint


class QuadratureError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


class ApproximationBudgetError(RuntimeError):
    """eps unreachable within the exponent-degree budget; carries the best fit."""

    def __init__(self, message: str, best_rep: "EntireRep", best_sup: float):
        super().__init__(message)
        self.best_rep = best_rep
        self.best_sup = best_sup


# ---------------------------------------------------------------------------
# representation

@dataclass(frozen=True)
class EntireRep:
    """F(z) = anchor_value + int_{anchor}^z prod_{p in crit_set}(w-p) e^{g(w)} dw,
    g given by coefficients in the scaled variable (z - basis_center)/basis_scale."""

    anchor: complex
    anchor_value: complex
    crit_set: tuple[complex, ...]
    basis_center: complex
    basis_scale: float
    g_coeffs: tuple[complex, ...]

    def g(self, z):
        w = (np.asarray(z, dtype=complex) - self.basis_center) / self.basis_scale
        acc = np.zeros_like(w)
        for coef in reversed(self.g_coeffs):
            acc = acc * w + coef
        return acc

    def crit_product(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.ones_like(z)
        for p in self.crit_set:
            acc = acc * (z - p)
        return acc

    def derivative_at(self, z):
        return self.crit_product(z) * np.exp(self.g(z))

    def translated(self, offset: complex) -> "EntireRep":
        return EntireRep(
            self.anchor + offset,
            self.anchor_value,
            tuple(p + offset for p in self.crit_set),
            self.basis_center + offset,
            self.basis_scale,
            self.g_coeffs,
        )


def derivative(rep: EntireRep, z: complex) -> complex:
    """Closed-form F'(z); exactly zero iff z is a prescribed critical point."""
    if any(z == p for p in rep.crit_set):
        return 0.0 + 0.0j
    return complex(rep.derivative_at(np.asarray([z]))[0])


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(order: int):
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = (x, w)
    return _GL_CACHE[order]


def _segment_integral(rep: EntireRep, z0: complex, z1: complex, panels: int, order: int) -> complex:
    x, w = _gl_rule(order)
    total = 0.0 + 0.0j
    step = (z1 - z0) / panels
    for k in range(panels):
        a = z0 + k * step
        mid = a + step / 2
        nodes = mid + (step / 2) * x
        vals = rep.derivative_at(nodes)
        total += (step / 2) * np.dot(w, vals)
    return complex(total)


def evaluate(rep: EntireRep, z: complex, rel_tol: float = 1e-12, max_panels: int = 4096) -> complex:
    """Path integral of the closed-form derivative along the straight segment
    anchor -> z (the integrand is entire, so the path is immaterial), with
    panel doubling until two refinements agree to rel_tol."""
    if z == rep.anchor:
        return rep.anchor_value
    panels = max(1, int(abs(z - rep.anchor)))
    prev = _segment_integral(rep, rep.anchor, z, panels, 24)
    while True:
        panels *= 2
        cur = _segment_integral(rep, rep.anchor, z, panels, 24)
        scale = max(1.0, abs(cur))
        if abs(cur - prev) <= rel_tol * scale:
            return rep.anchor_value + cur
        if panels > max_panels:
            raise QuadratureError(
                f"no convergence to {rel_tol} after {panels} panels "
                f"(last delta {abs(cur - prev):.3e})"
            )
        prev = cur


# ---------------------------------------------------------------------------
# sample machinery (floats; the exact lane ends at the box corners)

def box_floats(box: Box) -> tuple[float, float, float, float]:
    (xl, yl), (xh, yh) = box.lo.coords, box.hi.coords
    return float(xl), float(xh), float(yl), float(yh)


def boundary_samples(box: Box, count: int) -> np.ndarray:
    xl, xh, yl, yh = box_floats(box)
    per = max(count // 4, 2)
    t = np.arange(per) / per
    bottom = xl + (xh - xl) * t + 1j * yl
    right = xh + 1j * (yl + (yh - yl) * t)
    top = xh - (xh - xl) * t + 1j * yh
    left = xl + 1j * (yh - (yh - yl) * t)
    return np.concatenate([bottom, right, top, left])


def interior_samples(box: Box, count: int) -> np.ndarray:
    xl, xh, yl, yh = box_floats(box)
    side = max(int(round(math.sqrt(count))), 2)
    xs = xl + (xh - xl) * (np.arange(side) + 0.5) / side
    ys = yl + (yh - yl) * (np.arange(side) + 0.5) / side
    grid = xs[None, :] + 1j * ys[:, None]
    # boustrophedon order keeps consecutive samples adjacent for log continuation
    rows = [grid[i] if i % 2 == 0 else grid[i][::-1] for i in range(side)]
    return np.concatenate(rows)


class PathQuadrature:
    """Fixed Gauss-Legendre discretization of the paths anchor -> sample.

    Freezing the nodes makes re-evaluation for a new exponent polynomial a
    pair of vectorized array ops, which is what makes the fit affordable.
    """

    def __init__(self, anchor: complex, samples: np.ndarray, crit_points, panel_len: float, order: int):
        self.anchor = anchor
        self.samples = samples
        x, w = _gl_rule(order)
        counts = np.maximum(1, np.ceil(np.abs(samples - anchor) / panel_len).astype(int))
        max_panels = int(counts.max()) if len(samples) else 1
        q = max_panels * order
        # pad unused slots with the anchor (weight zero): a fixed off-hull pad
        # point would overflow the exponent and poison the weighted sums
        nodes = np.full((len(samples), q), complex(anchor), dtype=complex)
        weights = np.zeros((len(samples), q), dtype=complex)
        for i, z in enumerate(samples):
            n = counts[i]
            step = (z - anchor) / n
            for k in range(n):
                a = anchor + k * step
                mid = a + step / 2
                sl = slice(k * order, (k + 1) * order)
                nodes[i, sl] = mid + (step / 2) * x
                weights[i, sl] = (step / 2) * w
        self.nodes = nodes
        self.weights = weights
        prod = np.ones_like(nodes)
        for p in crit_points:
            prod *= nodes - p
        self.prod = prod

    def values(self, c: complex, basis_center: complex, basis_scale: float, coeffs: np.ndarray):
        w = (self.nodes - basis_center) / basis_scale
        g = np.zeros_like(w)
        for coef in coeffs[::-1]:
            g = g * w + coef
        integrand = self.prod * np.exp(g)
        return c + np.sum(self.weights * integrand, axis=1), integrand, w

    def jacobian_columns(self, integrand, w, degree: int):
        """d F / d coeff_k = int integrand * w^k; returns S x (degree+1)."""
        cols = np.empty((len(self.samples), degree + 1), dtype=complex)
        weighted = self.weights * integrand
        power = np.ones_like(w)
        for k in range(degree + 1):
            cols[:, k] = np.sum(weighted * power, axis=1)
            power = power * w
        return cols

    def column_for(self, integrand, node_values):
        """d F / d alpha for a perturbation direction with the given values at
        the quadrature nodes."""
        return np.sum(self.weights * integrand * node_values, axis=1)


def _continuous_log(values: np.ndarray) -> np.ndarray:
    """log along a sample path, branch fixed by continuation from the first entry."""
    out = np.empty(len(values), dtype=complex)
    out[0] = cmath.log(values[0])
    for i in range(1, len(values)):
        out[i] = out[i - 1] + cmath.log(values[i] / values[i - 1])
    return out


# ---------------------------------------------------------------------------
# prescribe-and-approximate

ZERO_TARGET = 0.0 + 0.0j


@dataclass(frozen=True)
class SolverOptions:
    m0: int = 8
    m_max: int = 32
    m_step: int = 4
    boundary_count: int = 256
    interior_count: int = 64
    panel_len: float = 1.5
    gl_order: int = 10
    max_iters: int = 40
    dense_factor: int = 4


@dataclass
class FitResult:
    rep: EntireRep
    sup_errors: list[float]
    sup_error: float
    degree: int
    iterations: int


def _target_values(target, z: np.ndarray) -> np.ndarray:
    if isinstance(target, EntireRep):
        quad = PathQuadrature(target.anchor, z, target.crit_set, 1.0, 16)
        vals, _, _ = quad.values(
            target.anchor_value,
            target.basis_center,
            target.basis_scale,
            np.asarray(target.g_coeffs),
        )
        return vals
    return np.full(len(z), complex(target))


def prescribe_and_approximate(
    targets: list[tuple[Box, object]],
    shape: Box,
    crit_points: list[complex],
    eps: float,
    opts: SolverOptions = SolverOptions(),
) -> FitResult:
    """Entire function with critical set exactly ``crit_points`` that tracks
    each target on its box to sup-error below eps.

    Targets are EntireReps (their critical sets inside their boxes must agree
    with the prescription) or constants (value pinning only).  Fitting: the
    exponent polynomial is seeded by a linear least-squares match of the
    log-derivative ratio, branch fixed by continuation along a boustrophedon
    sample path, then refined by damped Gauss-Newton on the value residuals.
    The degree escalates from opts.m0 by opts.m_step up to opts.m_max; if eps
    is still unreachable the error carries the best achieved sup-error.
    """
    boxes = [box for box, _ in targets]
    for box in boxes:
        if not shape.contains_box(box):
            raise PreconditionError("target box escapes the host shape")
    if not is_polyconvex_d1(boxes):
        raise PreconditionError("target boxes overlap; the union is not polynomially convex")
    shape_f = box_floats(shape)
    for p in crit_points:
        if not (shape_f[0] <= p.real <= shape_f[1] and shape_f[2] <= p.imag <= shape_f[3]):
            raise PreconditionError(f"critical point {p} outside the host shape")
    # constants prescribe values only; the critical-set contract binds
    # function targets, whose own critical sets must match inside their boxes
    for box, target in targets:
        if isinstance(target, EntireRep):
            inside = _points_in_box(crit_points, box)
            t_inside = _points_in_box(target.crit_set, box)
            if not _same_point_set(inside, t_inside):
                raise PreconditionError(
                    "prescribed critical points disagree with the target's inside its box"
                )

    anchor, anchor_value, sample_sets = _prepare_samples(targets, crit_points, opts)
    samples = np.concatenate([s for s, _ in sample_sets])
    values = np.concatenate([v for _, v in sample_sets])
    # basis frame: multi-box fits run at high degree and must keep their data
    # hull near the unit disc of the frame, or the monomial conversion cannot
    # carry the coefficients; single-box fits stay at low degree and frame
    # the whole host shape so the taming rows control the exponent
    # region-wide
    if len(targets) > 1:
        hull = [box_floats(box) for box, _ in targets]
        hxl, hxh = min(h[0] for h in hull) - 2.0, max(h[1] for h in hull) + 2.0
        hyl, hyh = min(h[2] for h in hull) - 2.0, max(h[3] for h in hull) + 2.0
        center = complex((hxl + hxh) / 2, (hyl + hyh) / 2)
        scale = max(hxh - hxl, hyh - hyl) / 2
    else:
        center = complex((shape_f[0] + shape_f[1]) / 2, (shape_f[2] + shape_f[3]) / 2)
        scale = max(shape_f[1] - shape_f[0], shape_f[3] - shape_f[2]) / 2

    quad = PathQuadrature(anchor, samples, crit_points, opts.panel_len, opts.gl_order)
    slices = []
    at = 0
    for s, _ in sample_sets:
        slices.append(slice(at, at + len(s)))
        at += len(s)
    n_fn_targets = sum(1 for _, t in targets if isinstance(t, EntireRep))
    best: FitResult | None = None
    degree = opts.m0
    while True:
        coeffs, c0, far = _seed(targets, sample_sets, crit_points, shape, center, scale,
                                degree, anchor, anchor_value, eps, quad)
        if n_fn_targets > 1:
            rep, iters = _alm_refine(
                quad, values, slices, coeffs, c0, crit_points, center, scale,
                anchor, opts, eps, far,
            )
        else:
            rep, iters = _gauss_newton(quad, values, crit_points, center, scale, coeffs,
                                       c0, anchor, opts, eps, far)
        # trailing coefficients at the least-squares noise floor contribute
        # nothing on the data but explode under extrapolation across the
        # host region; drop them before measuring
        trimmed = _trim_noise(np.asarray(rep.g_coeffs))
        if len(trimmed) != len(rep.g_coeffs):
            rep = EntireRep(rep.anchor, rep.anchor_value, rep.crit_set,
                            rep.basis_center, rep.basis_scale, tuple(trimmed))
        sups = _measure_sup(rep, targets, opts)
        result = FitResult(rep, sups, max(sups) if sups else 0.0, degree, iters)
        if best is None or result.sup_error < best.sup_error:
            best = result
        if best.sup_error < eps:
            return best
        if degree >= opts.m_max:
            raise ApproximationBudgetError(
                f"sup-error {best.sup_error:.3e} did not reach eps {eps:.3e} "
                f"at degree {opts.m_max}",
                best.rep,
                best.sup_error,
            )
        degree = min(degree + opts.m_step, opts.m_max)


def _trim_noise(coeffs: np.ndarray, rel: float = 1e-10) -> np.ndarray:
    mags = np.abs(coeffs)
    top = float(mags.max()) if len(coeffs) else 0.0
    keep = len(coeffs)
    while keep > 1 and mags[keep - 1] < rel * (1.0 + top):
        keep -= 1
    return coeffs[:keep]


def _points_in_box(points, box: Box) -> list[complex]:
    xl, xh, yl, yh = box_floats(box)
    return [p for p in points if xl <= p.real <= xh and yl <= p.imag <= yh]


def _same_point_set(a: list[complex], b: list[complex], tol: float = 1e-9) -> bool:
    if len(a) != len(b):
        return False
    remaining = list(b)
    for p in a:
        hit = next((q for q in remaining if abs(p - q) <= tol), None)
        if hit is None:
            return False
        remaining.remove(hit)
    return True


def _prepare_samples(targets, crit_points, opts: SolverOptions):
    """Per-target sample arrays and values; the anchor sits at the first
    target's first interior sample unless a target pins it naturally."""
    sample_sets = []
    for box, target in targets:
        pts = np.concatenate(
            [boundary_samples(box, opts.boundary_count), interior_samples(box, opts.interior_count)]
        )
        sample_sets.append((pts, _target_values(target, pts)))
    anchor_box, anchor_target = targets[0]
    anchor = complex(anchor_box.center().to_complex())
    anchor_value = complex(_target_values(anchor_target, np.asarray([anchor]))[0])
    return anchor, anchor_value, sample_sets


def _far_field_runs(shape: Box, boxes: list[Box], crit_points, pitch: float = 2.0,
                    restrict_hull: bool = True):
    """Contiguous horizontal grid runs covering the gaps between the target
    boxes (their joint hull plus a unit margin) and away from critical points.

    For multi-box fits the hull restriction matters twice over: the
    integration paths never leave it, and sample points far outside it push
    the basis beyond what monomial coefficients can carry in double
    precision.  Single-box fits want the whole host shape pinned instead, so
    the low-degree exponent stays tame region-wide.
    """
    margins = [box_floats(b) for b in boxes]
    sl, sh, tl, th = box_floats(shape)
    if margins and restrict_hull:
        xl = max(sl, min(m[0] for m in margins) - 2.0)
        xh = min(sh, max(m[1] for m in margins) + 2.0)
        yl = max(tl, min(m[2] for m in margins) - 2.0)
        yh = min(th, max(m[3] for m in margins) + 2.0)
    else:
        xl, xh, yl, yh = sl, sh, tl, th
    runs = []
    y = yl + 1.0
    while y <= yh - 1.0 + 1e-9:
        xs = np.arange(xl + 1.0, xh - 1.0 + 1e-9, pitch)
        keep = np.ones(len(xs), dtype=bool)
        for bxl, bxh, byl, byh in margins:
            if byl - 1.0 <= y <= byh + 1.0:
                keep &= ~((xs >= bxl - 1.0) & (xs <= bxh + 1.0))
        for p in crit_points:
            keep &= np.abs(xs + 1j * y - p) > 1.2
        start = None
        for i, k in enumerate(np.append(keep, False)):
            if k and start is None:
                start = i
            elif not k and start is not None:
                if i - start >= 2:
                    runs.append(xs[start:i] + 1j * y)
                start = None
        y += pitch
    return runs


def _seed(targets, sample_sets, crit_points, shape, center, scale, degree,
          anchor, anchor_value, eps, quad: PathQuadrature):
    """Linear least-squares seed for the exponent polynomial.

    EntireRep targets expose their derivative structure; the ratio
    f'(z)/prod(z-p) is nonvanishing near each box, so its log (continued
    along the boustrophedon order) is fit directly.  Constant targets fall
    back to a polynomial surrogate of the values, or to pure scale matching
    when the surrogate's derivative is degenerate.
    """
    rows_w = []
    rows_T = []
    row_weights = []
    box_geo = []
    for (box, target), (pts, vals) in zip(targets, sample_sets):
        if isinstance(target, EntireRep):
            inside = _points_in_box(target.crit_set, box)
            outside = [
                p for p in crit_points if not any(abs(p - q) <= 1e-9 for q in inside)
            ]
            ratio = np.exp(target.g(pts))
            for p in outside:
                ratio = ratio / (pts - p)
            rows_w.append(pts)
            rows_T.append(_continuous_log(ratio))
            row_weights.append(1.0)
            xl, xh, yl, yh = box_floats(box)
            box_geo.append(
                (complex((xl + xh) / 2, (yl + yh) / 2), math.hypot(xh - xl, yh - yl) / 2, target)
            )
    if not rows_T:
        seed_T = _constant_target_seed(targets, sample_sets, crit_points, degree)
        if seed_T is None:
            # pure scale matching: flat exponent so the integral stays below eps
            flat = np.zeros(degree + 1, dtype=complex)
            base, _, _ = quad.values(0.0, center, scale, np.array([0.0 + 0.0j]))
            reach = float(np.max(np.abs(base))) + 1.0
            flat[0] = math.log(max(eps, 1e-300) / (4.0 * reach))
            return flat, anchor_value, None
        rows_w, rows_T = seed_T
        row_weights = [1.0] * len(rows_T)
        far = None
    else:
        # far-field rows: the coherent log target (all critical factors kept)
        # on a coarse grid over the gaps, at low weight.  Box data alone
        # leaves the gaps unconstrained, and an unconstrained high-degree
        # exponent oscillates there, wrecking the value transport between
        # boxes.  Rows are contiguous grid runs so log continuation is valid;
        # the branch alignment pass reconciles runs against each other.
        gamma_b = float(
            np.mean([np.mean(geo[2].g(w).real) for w, geo in zip(rows_w, box_geo)])
        )
        boxes = [box for box, _ in targets]
        for run in _far_field_runs(shape, boxes, crit_points,
                                   restrict_hull=len(box_geo) > 1):
            prod = np.ones(len(run), dtype=complex)
            for p in crit_points:
                prod = prod * (run - p)
            rows_w.append(run)
            rows_T.append(gamma_b - _continuous_log(prod))
            row_weights.append(0.1)
        far = None
    coeffs = _fit_log_poly(rows_w, rows_T, center, scale, degree, row_weights)
    # hand the far-field pins to the refiner so it cannot blow up the gaps
    far_pts = np.concatenate(
        [w for w, wt in zip(rows_w, row_weights) if wt < 1.0]
    ) if any(wt < 1.0 for wt in row_weights) else None
    if far_pts is not None and len(far_pts):
        far_scaled = (far_pts - center) / scale
        far_vals = np.polynomial.polynomial.polyval(far_scaled, coeffs)
        far = (far_scaled, far_vals)
    return coeffs, anchor_value, far


def _constant_target_seed(targets, sample_sets, crit_points, degree):
    """Surrogate seed: fit a polynomial through the target values, then match
    the log of its derivative where it is not degenerate."""
    pts = np.concatenate([s for s, _ in sample_sets])
    vals = np.concatenate([v for _, v in sample_sets])
    if np.ptp(vals.real) == 0 and np.ptp(vals.imag) == 0:
        return None
    center = pts.mean()
    scale = float(np.max(np.abs(pts - center))) or 1.0
    deg_q = min(degree, 12)
    q = _arnoldi_lsq((pts - center) / scale, vals, deg_q)
    dq = np.polynomial.polynomial.polyder(q) / scale
    rows_w, rows_T = [], []
    for s, _ in sample_sets:
        ratio = np.polynomial.polynomial.polyval((s - center) / scale, dq)
        for p in crit_points:
            ratio = ratio / (s - p)
        good = np.abs(ratio) > 1e-8 * np.max(np.abs(ratio))
        if good.sum() < 4:
            continue
        rows_w.append(s[good])
        rows_T.append(_continuous_log(ratio[good]))
    if not rows_T:
        return None
    return rows_w, rows_T


def _arnoldi_lsq(W: np.ndarray, T: np.ndarray, degree: int,
                 weights: np.ndarray | None = None) -> np.ndarray:
    """Weighted polynomial least squares on clustered sample sets, returned as
    monomial coefficients.

    A plain Vandermonde solve loses the cluster-switching directions to the
    rank cutoff, so the basis is orthogonalized on the samples first
    (Vandermonde with Arnoldi, in the weighted inner product) and the solution
    converted back to monomials.  The conversion is guarded: it is accepted
    only when Horner evaluation agrees with the orthogonal-basis evaluation.
    """
    n = len(W)
    degree = min(degree, n - 1)
    wts = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    wsum = float(wts.sum())
    Q = np.zeros((n, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    Q[:, 0] = 1.0
    used = degree
    for k in range(degree):
        v = W * Q[:, k]
        for j in range(k + 1):
            H[j, k] = np.vdot(Q[:, j] * wts, v) / wsum
            v = v - H[j, k] * Q[:, j]
        h = math.sqrt(max(np.vdot(v * wts, v).real, 0.0) / wsum)
        if h < 1e-14:
            used = k
            break
        H[k + 1, k] = h
        Q[:, k + 1] = v / h
    Q = Q[:, : used + 1]
    root = np.sqrt(wts)
    c, *_ = np.linalg.lstsq(Q * root[:, None], T * root, rcond=None)
    basis = np.zeros((used + 1, used + 1), dtype=complex)
    basis[0, 0] = 1.0
    for k in range(used):
        v = np.zeros(used + 1, dtype=complex)
        v[1:] = basis[k][:-1]
        for j in range(k + 1):
            v = v - H[j, k] * basis[j]
        basis[k + 1] = v / H[k + 1, k]
    mono = (c[:, None] * basis).sum(axis=0)
    direct = Q @ c
    horner = np.polynomial.polynomial.polyval(W, mono)
    drift = float(np.max(np.abs(direct - horner)))
    if drift > 1e-6 * (1.0 + float(np.max(np.abs(direct)))):
        raise QuadratureError(
            f"monomial conversion of the exponent fit is unstable (drift {drift:.2e})"
        )
    return mono


def _fit_log_poly(rows_w, rows_T, center, scale, degree, row_weights=None):
    """Weighted LSQ fit of g to the per-row log targets, with passes of
    per-row 2*pi*i branch alignment (each row's log is only defined mod
    2*pi*i)."""
    if row_weights is None:
        row_weights = [1.0] * len(rows_T)
    weights = np.concatenate(
        [np.full(len(w), wt) for w, wt in zip(rows_w, row_weights)]
    )
    shifts = [0.0] * len(rows_T)
    coeffs = None
    for _ in range(4):
        pts = np.concatenate(rows_w)
        tgt = np.concatenate([T - 2j * math.pi * k for T, k in zip(rows_T, shifts)])
        coeffs = _arnoldi_lsq((pts - center) / scale, tgt, degree, weights)
        changed = False
        for i, (w, T) in enumerate(zip(rows_w, rows_T)):
            fit = np.polynomial.polynomial.polyval((w - center) / scale, coeffs)
            k = round(float(np.mean((T - 2j * math.pi * shifts[i] - fit).imag)) / (2 * math.pi))
            if k:
                shifts[i] += k
                changed = True
        if not changed:
            break
    out = np.zeros(degree + 1, dtype=complex)
    out[: len(coeffs)] = coeffs
    return out


def _chain_legs(targets):
    """Spanning-chain gap segments between the target boxes, trimmed so the
    segment stays half a unit clear of both boxes."""
    geo = []
    for box, _ in targets:
        xl, xh, yl, yh = box_floats(box)
        geo.append((complex((xl + xh) / 2, (yl + yh) / 2), math.hypot(xh - xl, yh - yl) / 2))
    order = sorted(range(len(geo)), key=lambda i: (geo[i][0].real, geo[i][0].imag))
    legs = []
    for a, b in zip(order, order[1:]):
        c1, r1 = geo[a]
        c2, r2 = geo[b]
        span = abs(c2 - c1)
        t0 = (r1 + 0.5) / span
        t1 = 1.0 - (r2 + 0.5) / span
        if t1 > t0:
            legs.append((c1 + t0 * (c2 - c1), c1 + t1 * (c2 - c1)))
    return legs


def _switch_polys(shape, targets, crit_points, center, scale, degree):
    """One localized bump polynomial per gap leg: roughly 1 on a small disc at
    the leg's midpoint and 0 on the boxes, the other discs, and the far field
    (kept clear of every disc).  These span the transport-tuning directions
    the offset correction works in."""
    legs = _chain_legs(targets)
    if not legs:
        return []
    mids = [(z0 + z1) / 2 for z0, z1 in legs]
    boxes = [box for box, _ in targets]
    zero_rows = [interior_samples(box, 49) for box in boxes]
    for run in _far_field_runs(shape, boxes, crit_points):
        keep = np.ones(len(run), dtype=bool)
        for m in mids:
            keep &= np.abs(run - m) > 3.0
        if keep.sum() >= 2:
            zero_rows.append(run[keep])
    angles = np.linspace(0.0, 2 * math.pi, 12, endpoint=False)
    disc_rows = []
    for m in mids:
        disc = np.concatenate(
            [[m], m + 0.6 * np.exp(1j * angles), m + 1.2 * np.exp(1j * angles)]
        )
        disc_rows.append(disc)
    bumps = []
    for i in range(len(mids)):
        pts = zero_rows + disc_rows
        tgt = [np.zeros(len(row)) for row in zero_rows]
        tgt += [np.full(len(row), 1.0 if j == i else 0.0) for j, row in enumerate(disc_rows)]
        W = (np.concatenate(pts) - center) / scale
        T = np.concatenate(tgt).astype(complex)
        weights = np.concatenate(
            [np.full(len(row), 4.0) for row in zero_rows[: len(boxes)]]
            + [np.ones(len(row)) for row in zero_rows[len(boxes):]]
            + [np.ones(len(row)) for row in disc_rows]
        )
        coeffs = _arnoldi_lsq(W, T, degree, weights)
        out = np.zeros(degree + 1, dtype=complex)
        out[: len(coeffs)] = coeffs
        bumps.append(out)
    return bumps


def _transport_correct(quad: PathQuadrature, values, slices, coeffs, c, bumps,
                       center, scale, eps, max_rounds: int = 12):
    """Newton iteration on the per-box transported constants.

    The seed tracks each target's shape but transports wrong constants across
    the gaps.  Adjusting complex amplitudes on the localized gap bumps moves
    exactly those constants; each round solves the small linear system from
    the per-box mean residuals and caps the step so the exponential stays in
    its linearization range.
    """
    if not bumps:
        return coeffs, c
    coeffs = np.array(coeffs, dtype=complex)
    bump_nodes = [
        np.polynomial.polynomial.polyval((quad.nodes - center) / scale, b) for b in bumps
    ]
    alphas = np.zeros(len(bumps), dtype=complex)

    def combined(alpha):
        total = coeffs.copy()
        for a, b in zip(alpha, bumps):
            total = total + a * b
        return total

    best = None
    for _ in range(max_rounds):
        g_now = combined(alphas)
        with np.errstate(over="ignore", invalid="ignore"):
            vals, integrand, _ = quad.values(c, center, scale, g_now)
        r = vals - values
        if not np.all(np.isfinite(r)):
            break
        C = np.array([np.mean(r[sl]) for sl in slices])
        c_shift = np.mean(C)
        c -= c_shift
        C -= c_shift
        worst = float(np.max(np.abs(C)))
        if best is None or worst < best[0]:
            best = (worst, alphas.copy(), c)
        if worst < 0.2 * eps:
            break
        J = np.empty((len(slices), len(bumps)), dtype=complex)
        for ell, bn in enumerate(bump_nodes):
            col = quad.column_for(integrand, bn)
            J[:, ell] = [np.mean(col[sl]) for sl in slices]
        J = J - J.mean(axis=0, keepdims=True)  # c absorbs the common mode
        step, *_ = np.linalg.lstsq(J, -C, rcond=None)
        cap = float(np.max(np.abs(step)))
        if cap > 0.7:
            step *= 0.7 / cap
        if cap < 1e-14:
            break
        alphas = alphas + step
    if best is not None:
        _, alphas, c = best
    return combined(alphas), c


def _real_stack(Z: np.ndarray) -> np.ndarray:
    return np.vstack([np.hstack([Z.real, -Z.imag]), np.hstack([Z.imag, Z.real])])


class ArnoldiStepBasis:
    """Orthonormal polynomial basis on a sample set, with node evaluations.

    Gauss-Newton steps taken in monomial coordinates are wrecked by the
    Vandermonde conditioning of clustered sample sets; in this basis the
    step subproblems are well scaled.  The basis also carries its monomial
    conversion (for the final representation) and its values at the
    quadrature nodes (for Jacobian columns).
    """

    def __init__(self, scaled_samples: np.ndarray, degree: int, scaled_nodes: np.ndarray):
        W = scaled_samples
        self.points = W
        n = len(W)
        degree = min(degree, n - 1)
        Q = np.zeros((n, degree + 1), dtype=complex)
        H = np.zeros((degree + 1, degree), dtype=complex)
        Q[:, 0] = 1.0
        node_vals = [np.ones_like(scaled_nodes)]
        mono = np.zeros((degree + 1, degree + 1), dtype=complex)
        mono[0, 0] = 1.0
        used = degree
        for k in range(degree):
            v = W * Q[:, k]
            nv = scaled_nodes * node_vals[k]
            mv = np.zeros(degree + 1, dtype=complex)
            mv[1:] = mono[k][:-1]
            for j in range(k + 1):
                H[j, k] = np.vdot(Q[:, j], v) / n
                v = v - H[j, k] * Q[:, j]
                nv = nv - H[j, k] * node_vals[j]
                mv = mv - H[j, k] * mono[j]
            h = math.sqrt(max(np.vdot(v, v).real, 0.0) / n)
            if h < 1e-14:
                used = k
                break
            H[k + 1, k] = h
            Q[:, k + 1] = v / h
            node_vals.append(nv / h)
            mono[k + 1] = mv / h
        self.samples = Q[:, : used + 1]
        self.node_vals = node_vals[: used + 1]
        self.mono = mono[: used + 1]
        self.size = used + 1

    def project(self, mono_coeffs: np.ndarray) -> np.ndarray:
        """Coordinates of a monomial polynomial in this basis (exact when the
        polynomial is in the span)."""
        target = np.polynomial.polynomial.polyval(self.points, mono_coeffs)
        y, *_ = np.linalg.lstsq(self.samples, target, rcond=None)
        return y

    def to_mono(self, y: np.ndarray) -> np.ndarray:
        return (y[:, None] * self.mono).sum(axis=0)


def _offset_constrained_gn(quad: PathQuadrature, values, slices, coeffs, c0,
                           crit_points, center, scale, anchor,
                           opts: SolverOptions, eps: float, far=None,
                           sample_weights=None):
    """Levenberg refinement in the sample-set Arnoldi basis, with the per-box
    mean residuals carried as heavily weighted extra rows.

    The fit must track each target's shape inside its box and transport the
    right constants across the gaps.  Monomial step coordinates mix those
    scales catastrophically (Vandermonde conditioning), so steps are taken in
    an orthonormal basis adapted to the samples; the transported constants
    enter the residual as weighted mean rows, which the well-scaled steps can
    actually drive to zero.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    c = complex(c0)
    degree = len(coeffs) - 1
    scaled_nodes = (quad.nodes - center) / scale
    far_pts = far_cap = None
    basis_points = (quad.samples - center) / scale
    if far is not None:
        far_pts, far_seed = far
        far_cap = float(np.max(far_seed.real)) + 14.0
        # the basis must span the far points too, else projecting the seed
        # through it silently rewrites the gap behavior
        basis_points = np.concatenate([basis_points, far_pts])
    basis = ArnoldiStepBasis(basis_points, degree, scaled_nodes)
    y = basis.project(coeffs)
    w_off = math.sqrt(len(values))

    sample_w = np.ones(len(values)) if sample_weights is None else np.asarray(sample_weights)

    def assemble(cc, yy):
        with np.errstate(over="ignore", invalid="ignore"):
            vals, integrand, _ = quad.values(cc, center, scale, basis.to_mono(yy))
        r_val = (vals - values) * sample_w
        means = np.array([np.mean((r_val / sample_w)[sl]) for sl in slices])
        return np.concatenate([r_val, w_off * means]), integrand

    def far_ok(yy):
        if far_pts is None:
            return True
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.polynomial.polynomial.polyval(far_pts, basis.to_mono(yy))
        return bool(np.all(np.isfinite(vals)) and np.max(vals.real) <= far_cap)

    n_val = len(values)
    r, integrand = assemble(c, y)
    shift = complex(np.mean(r[n_val:])) / w_off
    c -= shift
    r, integrand = assemble(c, y)
    obj = float(np.mean(np.abs(r) ** 2))
    lam = 1e-4
    iters = 0
    for it in range(opts.max_iters):
        if float(np.max(np.abs(r[:n_val]))) < 0.3 * eps:
            break
        iters = it + 1
        J = np.zeros((len(r), basis.size + 1), dtype=complex)
        J[:n_val, 0] = 1.0
        weighted = quad.weights * integrand
        for k in range(basis.size):
            J[:n_val, k + 1] = np.sum(weighted * basis.node_vals[k], axis=1)
        for j, sl in enumerate(slices):
            J[n_val + j] = w_off * np.mean(J[sl.start:sl.stop], axis=0)
        J[:n_val] *= sample_w[:, None]
        A = _real_stack(J)
        b = -np.concatenate([r.real, r.imag])
        AtA = A.T @ A
        Atb = A.T @ b
        diag = np.diag(AtA).copy()
        diag[diag == 0] = 1.0
        accepted = False
        for _ in range(10):
            try:
                step = np.linalg.solve(AtA + lam * np.diag(diag), Atb)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            n = basis.size + 1
            dz = step[:n] + 1j * step[n:]
            dc = complex(dz[0])
            dy = dz[1:]
            if not far_ok(y + dy):
                lam *= 10
                continue
            r_new, integrand_new = assemble(c + dc, y + dy)
            obj_new = float(np.mean(np.abs(r_new) ** 2))
            if math.isfinite(obj_new) and obj_new < obj:
                c, y = c + dc, y + dy
                r, integrand = r_new, integrand_new
                improvement = (obj - obj_new) / max(obj, 1e-300)
                obj = obj_new
                lam = max(lam / 3, 1e-13)
                accepted = True
                break
            lam *= 10
        if not accepted:
            break
        if improvement < 1e-12:
            break
    return c, y, basis, iters


def _alm_refine(quad, values, slices, coeffs, c0, crit_points, center, scale, anchor,
                opts, eps, far):
    """Arnoldi-space refinement with soft-max reweighting.

    The mean-square objective underweights the localized corner spikes left
    by the gap switching, so after each converged pass the sample weights are
    raised where the residual is large (an IRLS realization of the soft
    max-error term) and the refinement repeats from the warm start.
    """
    weights = None
    best = None
    c_cur, coeffs_cur = c0, np.asarray(coeffs, dtype=complex)
    total_iters = 0
    for round_ in range(4):
        c, y, basis, iters = _offset_constrained_gn(
            quad, values, slices, coeffs_cur, c_cur, crit_points, center, scale,
            anchor, opts, eps, far, sample_weights=weights,
        )
        total_iters += iters
        mono = basis.to_mono(y)
        out = np.zeros(len(coeffs_cur), dtype=complex)
        out[: len(mono)] = mono
        with np.errstate(over="ignore", invalid="ignore"):
            vals, _, _ = quad.values(c, center, scale, out)
        resid = np.abs(vals - values)
        sup = float(resid.max())
        if best is None or sup < best[0]:
            best = (sup, c, out)
        if sup < 0.5 * eps:
            break
        rms = float(np.sqrt(np.mean(resid ** 2))) or 1.0
        weights = np.minimum(1.0 + (resid / rms) ** 2, 40.0)
        c_cur, coeffs_cur = c, out
    _, c, out = best
    rep = EntireRep(anchor, c, tuple(crit_points), center, scale, tuple(out))
    return rep, total_iters


def _gauss_newton(quad: PathQuadrature, values, crit_points, center, scale, coeffs, c0,
                  anchor, opts: SolverOptions, eps: float, far=None,
                  far_weight: float = 1e-3):
    """Damped Gauss-Newton on the value residuals; variables are the anchor
    value and the exponent coefficients.  Deterministic: fixed iteration and
    damping schedules, no randomness.  Stops early once the residual sup sits
    comfortably under the eps budget (keeps the zero-target base from sliding
    toward the trivial scale-zero limit).

    ``far`` carries soft pins (scaled points, seed exponent values): small
    extra residuals forbidding wild gap excursions while leaving room for the
    O(1) phase adjustments that tune inter-box value transport.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    c = complex(c0)
    degree = len(coeffs) - 1
    far_pts = far_cap = None
    if far is not None:
        far_pts, far_seed = far
        far_cap = float(np.max(far_seed.real)) + 12.0

    def far_ok(gg):
        if far_pts is None:
            return True
        vals = np.polynomial.polynomial.polyval(far_pts, gg)
        return bool(np.max(vals.real) <= far_cap)

    def residuals(cc, gg):
        vals, integrand, w = quad.values(cc, center, scale, gg)
        return vals - values, integrand, w

    n_val = len(values)
    r, integrand, w = residuals(c, coeffs)
    # re-pin the anchor value to the mean value residual before iterating
    shift = complex(np.mean(r[:n_val]))
    c = c - shift
    r[:n_val] -= shift
    obj = float(np.mean(np.abs(r) ** 2))
    lam = 1e-3
    iters = 0
    for it in range(opts.max_iters):
        if float(np.max(np.abs(r[:n_val]))) < 0.3 * eps:
            break
        iters = it + 1
        J = np.zeros((n_val, degree + 2), dtype=complex)
        J[:, 0] = 1.0
        J[:, 1:] = quad.jacobian_columns(integrand, w, degree)
        # column equilibration keeps the Levenberg solve well scaled across
        # wildly different coefficient sensitivities
        col = np.sqrt(np.sum(np.abs(J) ** 2, axis=0))
        col[col == 0] = 1.0
        Js = J / col
        A = np.vstack([np.hstack([Js.real, -Js.imag]), np.hstack([Js.imag, Js.real])])
        b = -np.concatenate([r.real, r.imag])
        AtA = A.T @ A
        Atb = A.T @ b
        diag = np.diag(AtA).copy()
        diag[diag == 0] = 1.0
        accepted = False
        for _ in range(9):
            try:
                step = np.linalg.solve(AtA + lam * np.diag(diag), Atb)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            n = degree + 2
            scaled = (step[:n] + 1j * step[n:]) / col
            dc = complex(scaled[0])
            dg = scaled[1:]
            with np.errstate(over="ignore", invalid="ignore"):
                r_new, integrand_new, w_new = residuals(c + dc, coeffs + dg)
                obj_new = float(np.mean(np.abs(r_new) ** 2))
            if math.isfinite(obj_new) and obj_new < obj and far_ok(coeffs + dg):
                c, coeffs = c + dc, coeffs + dg
                r, integrand, w = r_new, integrand_new, w_new
                improvement = (obj - obj_new) / max(obj, 1e-300)
                obj = obj_new
                lam = max(lam / 3, 1e-12)
                accepted = True
                break
            lam *= 10
        if not accepted or obj == 0:
            break
        if improvement < 1e-10:
            break
    rep = EntireRep(anchor, c, tuple(crit_points), center, scale, tuple(coeffs))
    return rep, iters


def _measure_sup(rep: EntireRep, targets, opts: SolverOptions) -> list[float]:
    """Per-target sup error over a dense confirmation set, with a panel-count
    refinement guard on the quadrature."""
    sups = []
    for box, target in targets:
        pts = np.concatenate(
            [
                boundary_samples(box, opts.boundary_count * opts.dense_factor),
                interior_samples(box, opts.interior_count * opts.dense_factor),
            ]
        )
        want = _target_values(target, pts)
        got = _batch_values(rep, pts, opts.panel_len, opts.gl_order)
        got_fine = _batch_values(rep, pts, opts.panel_len / 2, opts.gl_order + 4)
        drift = float(np.max(np.abs(got - got_fine)))
        errs = np.abs(got_fine - want)
        sups.append(float(np.max(errs)) + drift)
    return sups


def _batch_values(rep: EntireRep, pts: np.ndarray, panel_len: float, order: int) -> np.ndarray:
    quad = PathQuadrature(rep.anchor, pts, rep.crit_set, panel_len, order)
    vals, _, _ = quad.values(
        rep.anchor_value, rep.basis_center, rep.basis_scale, np.asarray(rep.g_coeffs)
    )
    return vals


# ---------------------------------------------------------------------------
# restricted regions and the ledger

@dataclass(frozen=True)
class RestrictedRegion:
    """Region box with the level margin removed from the boundary and balls
    of the same radius removed around the section points, plus its fixed
    sample grid."""

    base: Box
    level: int
    margin: float
    excluded: tuple[complex, ...]
    samples: np.ndarray

    @property
    def pitch(self) -> float:
        return 2.0 ** (-self.level - 2)


def restricted_region(base: Box, level: int, section_points: list[complex]) -> RestrictedRegion:
    margin = 2.0 ** (-level)
    xl, xh, yl, yh = box_floats(base)
    xl, xh, yl, yh = xl + margin, xh - margin, yl + margin, yh - margin
    if xl >= xh or yl >= yh:
        raise ValueError(f"margin {margin} exceeds the box; no survivor set at level {level}")
    pitch = 2.0 ** (-level - 2)
    xs = np.arange(xl, xh + pitch / 2, pitch)
    ys = np.arange(yl, yh + pitch / 2, pitch)
    grid = (xs[None, :] + 1j * ys[:, None]).ravel()
    near = [p for p in section_points if xl - margin <= p.real <= xh + margin
            and yl - margin <= p.imag <= yh + margin]
    keep = np.ones(len(grid), dtype=bool)
    for p in near:
        keep &= np.abs(grid - p) > margin
    survivors = grid[keep]
    if len(survivors) == 0:
        raise ValueError(f"no survivor samples: region too small for level {level}")
    return RestrictedRegion(base, level, margin, tuple(near), survivors)


def measure_delta(rep: EntireRep, rr: RestrictedRegion) -> float:
    """Min |F'| over the region's sample grid.

    Exponent overflow far from the fitted data reads as "astronomically
    large", which cannot be the minimizer; an exact zero among the finite
    values means a critical point leaked into the restricted set and is a
    bug, not data.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.abs(rep.derivative_at(rr.samples))
    finite = vals[np.isfinite(vals)]
    if len(finite) == 0:
        raise AssertionError("no finite derivative samples on the restricted region")
    lo = float(finite.min())
    if lo == 0.0:
        raise AssertionError("critical point inside a restricted region")
    return lo


def choose_epsilon(n: int, subregion_deltas: list[float]) -> float:
    """min(2^-n, min_i delta_{n-1}(c_i) * 2^-n / 2): every point of the finer
    restricted regions is at least 2^{-(n-1)} inside, so a sup bound of eps_n
    gives a gradient bound of eps_n * 2^{n-1} by the Cauchy estimate, and the
    formula keeps that below half the current gradient floor."""
    cap = 2.0 ** (-n)
    if not subregion_deltas:
        return cap
    return min(cap, min(subregion_deltas) * cap / 2)


@dataclass
class LedgerRow:
    level: int
    region_id: str
    eps: float
    delta_raw: float
    delta_clamped: float
    sup_err: float
    grad_diff_sup: float

    def csv(self) -> list:
        return [
            self.level,
            self.region_id,
            repr(self.eps),
            repr(self.delta_raw),
            repr(self.delta_clamped),
            repr(self.sup_err),
            repr(self.grad_diff_sup),
        ]


@dataclass
class EpsDeltaLedger:
    rows: list[LedgerRow] = field(default_factory=list)
    nesting: dict[str, list[str]] = field(default_factory=dict)  # region -> nested child ids

    def row(self, region_id: str) -> LedgerRow:
        for r in self.rows:
            if r.region_id == region_id:
                return r
        raise KeyError(region_id)

    def rows_at(self, level: int) -> list[LedgerRow]:
        return [r for r in self.rows if r.level == level]

    def max_level(self) -> int:
        return max((r.level for r in self.rows), default=-1)

    def check_chain(self) -> list[str]:
        """Violations of the ledger invariants, empty when the chain holds."""
        issues = []
        for r in self.rows:
            if r.level >= 1 and not r.eps <= 2.0 ** (-r.level):
                issues.append(f"{r.region_id}: eps {r.eps} above 2^-{r.level}")
            if r.level >= 1 and not r.sup_err < r.eps:
                issues.append(f"{r.region_id}: measured sup {r.sup_err} not below eps {r.eps}")
        for parent_id, children in self.nesting.items():
            parent = self.row(parent_id)
            for child_id in children:
                child = self.row(child_id)
                if not parent.delta_clamped <= child.delta_clamped / 2:
                    issues.append(
                        f"{parent_id}: clamped delta {parent.delta_clamped} above half of "
                        f"{child_id}'s {child.delta_clamped}"
                    )
        for r in self.rows:
            if r.level >= 1:
                for child_id in self.nesting.get(r.region_id, []):
                    child = self.row(child_id)
                    if not r.grad_diff_sup < child.delta_clamped / 2:
                        issues.append(
                            f"{r.region_id}: gradient drift {r.grad_diff_sup} not below "
                            f"half of {child_id}'s floor {child.delta_clamped}"
                        )
        return issues


def rep_to_json_dict(rep: EntireRep) -> dict:
    from .serialize import complex_pair

    return {
        "anchor": complex_pair(rep.anchor),
        "anchor_value": complex_pair(rep.anchor_value),
        "crit_set": [complex_pair(p) for p in rep.crit_set],
        "g": {
            "basis_center": complex_pair(rep.basis_center),
            "basis_scale": rep.basis_scale,
            "coeffs": [complex_pair(c) for c in rep.g_coeffs],
        },
    }


def rep_from_json_dict(doc: dict) -> EntireRep:
    from .serialize import parse_complex

    return EntireRep(
        parse_complex(doc["anchor"]),
        parse_complex(doc["anchor_value"]),
        tuple(parse_complex(p) for p in doc["crit_set"]),
        parse_complex(doc["g"]["basis_center"]),
        doc["g"]["basis_scale"],
        tuple(parse_complex(c) for c in doc["g"]["coeffs"]),
    )


# ---------------------------------------------------------------------------
# the induction over a toast

def region_id(region: Region) -> str:
    return f"L{region.level}@" + ",".join(region.center.as_strings())


def _local_pattern(region: Region, section_points: list[GroupPoint]) -> tuple:
    """Exact center-relative section pattern inside the region (the catalogue
    key ingredient); returned as rational strings for hashability."""
    box = region.absolute()
    inside = [p for p in section_points if box.contains_point(p)]
    rel = [tuple((p - region.center).as_strings()) for p in inside]
    return tuple(sorted(rel))


def _pattern_floats(pattern: tuple) -> list[complex]:
    out = []
    for coords in pattern:
        out.append(complex(float(Fraction(coords[0])), float(Fraction(coords[1]))))
    return out


@dataclass
class InductionResult:
    toast: Toast
    section_points: list[GroupPoint]
    functions: dict[str, EntireRep]  # region id -> absolute-frame function
    keys: dict[str, tuple]  # region id -> catalogue key
    key_functions: dict[tuple, EntireRep]  # catalogue key -> local-frame function
    ledger: EpsDeltaLedger
    top_ids: list[str]


def run_induction(
    toast: Toast,
    section_points: list[GroupPoint],
    opts: SolverOptions = SolverOptions(),
    eps0: float = 1.0,
) -> InductionResult:
    """Build one entire function per catalogue key, level by level.

    Level 0 fits against the zero target with the loose eps0 budget (the base
    only needs the right critical points); level n fits against the level-
    (n-1) functions of its subregions, translated by the exact center
    cocycles, with eps from the ledger rule.  Functions are memoized per
    catalogue key: regions with identical shape, section pattern, and
    subregion configuration share coefficients bit for bit.
    """
    if toast.d != 1:
        raise PreconditionError("the entire-function induction is implemented for d = 1 only")
    ledger = EpsDeltaLedger()
    functions: dict[str, EntireRep] = {}
    keys: dict[str, tuple] = {}
    key_functions: dict[tuple, EntireRep] = {}
    restricted: dict[str, RestrictedRegion] = {}
    section_f = [p.to_complex() for p in section_points]

    for level in toast.levels:
        n = level.n
        for region in sorted(level.regions, key=lambda r: r.center.sort_key()):
            rid = region_id(region)
            center_c = region.center.to_complex()
            pattern = _local_pattern(region, section_points)
            local_P = _pattern_floats(pattern)
            sup_err = 0.0
            grad_sup = 0.0
            if n == 0:
                key = ("base", region.shape.lo.coords, region.shape.hi.coords, pattern)
                if key not in key_functions:
                    fit = prescribe_and_approximate(
                        [(region.shape, ZERO_TARGET)], region.shape, local_P, eps0, opts
                    )
                    key_functions[key] = fit.rep
                eps_used = eps0
                children: list[str] = []
            else:
                subs = [
                    s
                    for s in toast.regions_at(n - 1)
                    if region.absolute().contains_box(s.absolute())
                ]
                subs.sort(key=lambda s: s.center.sort_key())
                children = [region_id(s) for s in subs]
                deltas = [ledger.row(cid).delta_clamped for cid in children]
                eps_used = choose_epsilon(n, deltas)
                target_list = []
                key_parts = []
                for s in subs:
                    offset = s.center - region.center
                    local_box = s.shape.translated(offset)
                    local_target = functions[region_id(s)].translated(-center_c)
                    target_list.append((local_box, local_target))
                    key_parts.append(
                        (tuple(offset.as_strings()), keys[region_id(s)])
                    )
                key = (
                    "level",
                    n,
                    region.shape.lo.coords,
                    region.shape.hi.coords,
                    pattern,
                    tuple(key_parts),
                    eps_used,
                )
                if key not in key_functions:
                    fit = prescribe_and_approximate(
                        target_list, region.shape, local_P, eps_used, opts
                    )
                    key_functions[key] = fit.rep
            rep_abs = key_functions[key].translated(center_c)
            if n >= 1:
                for s in subs:
                    cid = region_id(s)
                    rr = restricted[cid]
                    prev = functions[cid]
                    diff = np.abs(rep_abs.derivative_at(rr.samples) - prev.derivative_at(rr.samples))
                    grad_sup = max(grad_sup, float(diff.max()))
                    dense = np.concatenate(
                        [boundary_samples(s.absolute(), 128), interior_samples(s.absolute(), 64)]
                    )
                    got = _batch_values(rep_abs, dense, opts.panel_len, opts.gl_order)
                    want = _batch_values(prev, dense, opts.panel_len, opts.gl_order)
                    sup_err = max(sup_err, float(np.max(np.abs(got - want))))
            functions[rid] = rep_abs
            keys[rid] = key
            rr = restricted_region(region.absolute(), n, section_f)
            restricted[rid] = rr
            delta_raw = measure_delta(rep_abs, rr)
            # the raw value is a grid minimum, so keep a factor-two safety
            # margin, then clamp against every nested one-level-down region
            clamp = delta_raw / 2
            if n >= 1:
                for cid in children:
                    clamp = min(clamp, ledger.row(cid).delta_clamped / 2)
            ledger.rows.append(
                LedgerRow(n, rid, eps_used, delta_raw, clamp, sup_err, grad_sup)
            )
            ledger.nesting[rid] = children
    top_ids = [region_id(r) for r in toast.top.regions]
    return InductionResult(toast, section_points, functions, keys, key_functions, ledger, top_ids)
