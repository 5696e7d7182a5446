"""End-to-end runs: window ensembles, separating sections, toasts, builds.

Everything here is a pure function of the configuration, so two runs with
the same config produce identical artifacts byte for byte.  The CLI wraps
these with file output and exit codes; the test suite calls them directly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .config import RunConfig
from .cross_section import (
    BooleanEncoderRegistry,
    BooleanWindow,
    Filtration,
    PointLabels,
    SelectorTable,
    SeparatingCrossSection,
    SeparationReport,
    beta,
    build_filtration,
    build_selectors,
    build_separating_case1,
    build_separating_case2,
    check_case2_triangles,
    decode_encoder_case1,
    verify_separation,
)
from .entire import InductionResult, SolverOptions, run_induction
from .group_model import BoolGroupElement, DeltaSet, GroupPoint, boolean_pair_sequence
from .orbit_window import LabelStream, OrbitWindow, generate_window, labels_for
from .toast import (Toast, ToastConstructionError, ToastParams, ToastReport, build_grid_toast,
    validate_polyconvex_toast, validate_toast)


@dataclass
class WindowRun:
    window: OrbitWindow
    filtration: Filtration
    selectors: SelectorTable
    labels: PointLabels
    section: SeparatingCrossSection


@dataclass
class SimulateResult:
    runs: list[WindowRun]
    report: SeparationReport
    decode_failures: list[str]

    def ok(self) -> bool:
        return self.report.all_distinguished() and not self.decode_failures


def _build_one_window(args) -> WindowRun:
    config, index = args
    seed = config.seed + index
    window = generate_window(
        seed, config.d, config.radius, config.depth, window_id=f"w{index:03d}"
    )
    filtration = build_filtration(window.c_points)
    selectors = build_selectors(filtration)
    labels = PointLabels(window.c_points, labels_for(window))
    ds = DeltaSet(config.delta, 2 * config.d)
    section = build_separating_case1(window, filtration, selectors, labels, ds)
    return WindowRun(window, filtration, selectors, labels, section)


def simulate_ensemble(config: RunConfig) -> SimulateResult:
    """Generate windows, build the enriched sections, verify separation and
    the encoder decode oracle across the whole ensemble."""
    tasks = [(config, i) for i in range(config.windows)]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            runs = list(pool.map(_build_one_window, tasks))
    else:
        runs = [_build_one_window(t) for t in tasks]
    report = verify_separation(
        [(r.window, r.section) for r in runs], config.schedule()
    )
    decode_failures = []
    for run in runs:
        for rec in run.section.added:
            got_n, got_tuple = decode_encoder_case1(run.section, rec.anchor, config.delta)
            if got_n != rec.level or got_tuple != rec.tuple:
                decode_failures.append(
                    f"{run.window.window_id}: decode mismatch at level {rec.level}"
                )
    return SimulateResult(runs, report, decode_failures)


# ---------------------------------------------------------------------------
# Boolean case

@dataclass
class BooleanRun:
    bwindow: BooleanWindow
    filtration: Filtration
    selectors: SelectorTable
    labels: PointLabels
    section: SeparatingCrossSection | None = None


@dataclass
class BooleanResult:
    runs: list[BooleanRun]
    registry: BooleanEncoderRegistry
    pair_seq: tuple
    decode_failures: list[str]

    def ok(self) -> bool:
        return not self.decode_failures


def synthetic_boolean_window(window_id: str, truncation: int, depth: int) -> BooleanWindow:
    """Harness-provided norm-lacunary section: singleton supports at indices
    2, 3, ... so distances are fixed dyadic sums."""
    count = 2 ** depth
    points = tuple(
        BoolGroupElement.of({2 + i}, truncation) for i in range(count)
    )
    return BooleanWindow(window_id, truncation, points)


def boolean_ensemble(config: RunConfig) -> BooleanResult:
    """Case-2 runs on synthetic Boolean windows: triangle geometry plus the
    registry-based decode oracle."""
    truncation = config.boolean_truncation
    pair_seq = boolean_pair_sequence(truncation)
    runs = []
    structures = []
    for i in range(config.boolean_windows):
        bwindow = synthetic_boolean_window(f"b{i:03d}", truncation, config.boolean_depth)
        filtration = build_filtration(bwindow.c_points)
        selectors = build_selectors(filtration)
        labels = PointLabels(
            bwindow.c_points, LabelStream(bwindow.window_id, bwindow.label_salt)
        )
        structures.append((filtration, selectors, labels))
        runs.append(BooleanRun(bwindow, filtration, selectors, labels))
    registry = BooleanEncoderRegistry.collect(structures)
    decode_failures = []
    for run in runs:
        section = build_separating_case2(
            run.bwindow, run.filtration, run.selectors, run.labels, pair_seq, registry
        )
        check_case2_triangles(section, pair_seq)
        run.section = section
        for rec in section.added:
            got_n, got_tuple = registry.decode(rec.index, run.bwindow.truncation)
            truth = beta(run.filtration, run.selectors, run.labels, rec.level, rec.anchor)
            if got_n != rec.level or got_tuple != truth:
                decode_failures.append(
                    f"{run.bwindow.window_id}: decode mismatch at level {rec.level}"
                )
    return BooleanResult(runs, registry, pair_seq, decode_failures)


# ---------------------------------------------------------------------------
# toasts

@dataclass
class ToastRun:
    window: OrbitWindow
    toast: Toast
    report: ToastReport
    polyconvex: bool

    def ok(self) -> bool:
        return self.report.ok() and self.polyconvex


def toast_params_from(config: RunConfig, offset_seed: int) -> ToastParams:
    return ToastParams(
        cell_side0=config.toast_cell0,
        corridor0=config.toast_corridor0,
        levels=config.toast_levels,
        branch=config.toast_branch,
        offset_seed=offset_seed,
        misalign_axes=config.toast_misalign,
        min_piece=config.toast_min_piece,
        corridor_schedule=config.toast_corridors or None,
    )


def toast_frame(config: RunConfig, tag: str) -> OrbitWindow:
    """A bare window (no section points) carrying the box the toast lives in."""
    return OrbitWindow(tag, config.d, config.radius, (), config.seed)


def _build_one_toast(args) -> ToastRun:
    config, index = args
    window = toast_frame(config, f"toast{index:03d}")
    params = toast_params_from(config, config.seed + index)
    toast = build_grid_toast(window, params)
    report = validate_toast(toast, window)
    poly = validate_polyconvex_toast(toast)
    return ToastRun(window, toast, report, poly)


def toast_ensemble(config: RunConfig) -> list[ToastRun]:
    tasks = [(config, i) for i in range(config.toast_seeds)]
    if config.jobs > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_build_one_toast, tasks))
    return [_build_one_toast(t) for t in tasks]


# ---------------------------------------------------------------------------
# the full d = 1 build

@dataclass
class BuildResult:
    window: OrbitWindow
    toast: Toast
    toast_report: ToastReport
    polyconvex: bool
    section: SeparatingCrossSection
    induction: InductionResult

    def ok(self) -> bool:
        return self.toast_report.ok() and self.polyconvex


class BuildError(RuntimeError):
    pass


def select_hosts(toast: Toast, count: int, spacing: Fraction = Fraction(4)) -> list[GroupPoint]:
    """Deterministic choice of section anchors among level-0 region centers
    whose shapes contain the unit ball (so adjoined encoder points stay in
    the same region), thinned to the required pairwise spacing."""
    candidates = [
        r.center
        for r in toast.regions_at(0)
        if r.shape.min_halfwidth() >= 1
    ]
    candidates.sort(key=lambda p: (p.norm2(), p.sort_key()))
    chosen: list[GroupPoint] = []
    s2 = spacing * spacing
    for p in candidates:
        if all((p - q).norm2() >= s2 for q in chosen):
            chosen.append(p)
        if len(chosen) == count:
            return sorted(chosen, key=lambda p: p.sort_key())
    raise BuildError(
        f"only {len(chosen)} unit-ball level-0 regions at spacing {spacing}; need {count}"
    )


def solver_options(config: RunConfig) -> SolverOptions:
    return SolverOptions(
        m0=config.solver_m0,
        m_max=config.solver_m_max,
        m_step=config.solver_m_step,
        panel_len=config.solver_panel_len,
        gl_order=config.solver_gl_order,
        max_iters=config.solver_iters,
    )


def build_run(config: RunConfig) -> BuildResult:
    """simulate -> toast -> induction, on one window frame.

    The section anchors come from the toast's own level-0 centers (encoder
    points at distance < 1 then stay inside the anchor's level-0 region, so
    the whole section lives in the bottom layer of the hierarchy).
    """
    if config.d != 1:
        raise BuildError("the build pipeline requires d = 1")
    window_frame = toast_frame(config, f"build-{config.seed:08x}")
    # deterministic scan: not every grid offset leaves enough unit-ball
    # level-0 regions to anchor the section, so walk seeds until one does
    toast = hosts = None
    for attempt in range(64):
        try:
            candidate = build_grid_toast(
                window_frame, toast_params_from(config, config.seed + attempt)
            )
            hosts = select_hosts(candidate, 2 ** config.depth)
            toast = candidate
            break
        except (ToastConstructionError, BuildError):
            continue
    if toast is None:
        raise BuildError("no grid offset within 64 seeds hosts the requested section")
    report = validate_toast(toast, window_frame)
    poly = validate_polyconvex_toast(toast)
    if not (report.ok() and poly):
        raise BuildError("toast validation failed; aborting the build")
    window = OrbitWindow(
        window_frame.window_id, 1, config.radius, tuple(hosts), config.seed
    )
    filtration = build_filtration(window.c_points)
    selectors = build_selectors(filtration)
    labels = PointLabels(window.c_points, labels_for(window))
    ds = DeltaSet(config.delta, 2)
    section = build_separating_case1(window, filtration, selectors, labels, ds)

    level0_boxes = [r.absolute() for r in toast.regions_at(0)]
    for p in section.points():
        if not any(box.contains_point(p) for box in level0_boxes):
            raise BuildError(f"section point {p.as_strings()} escapes the bottom layer")

    induction = run_induction(
        toast, section.points(), solver_options(config), eps0=config.solver_eps0
    )
    return BuildResult(window, toast, report, poly, section, induction)
