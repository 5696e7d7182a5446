"""Batch driver: seeded runs, artifact serialization, reports.

Subcommands: simulate | toast | build | verify | report.  Exit codes:
0 all enabled checks passed, 1 configuration or runtime error, 2 checks ran
and some failed, 3 the approximation budget was exhausted (a legitimate
outcome reported distinctly).  TOASTLAB_OUT overrides --out.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis
from .config import RunConfig, build_defaults, load_config, simulate_defaults, toast_defaults
from .cross_section import section_to_json
from .entire import ApproximationBudgetError, rep_to_json_dict
from .orbit_window import window_to_json
from .pipeline import (
    BuildError,
    boolean_ensemble,
    build_run,
    simulate_ensemble,
    toast_ensemble,
)
from .serialize import dump_json, load_json, rat_str, write_csv
from .svg import toast_svg
from .toast import toast_from_json, toast_to_json, validate_polyconvex_toast, validate_toast
from .orbit_window import window_from_json
from .cross_section import verify_separation, SeparatingCrossSection, AddedRecord, BetaTuple
from .group_model import GroupPoint

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2
EXIT_BUDGET = 3


def _out_dir(args) -> Path:
    out = os.environ.get("TOASTLAB_OUT") or args.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _config_for(args, defaults: RunConfig) -> RunConfig:
    cfg = defaults
    if args.config:
        cfg = load_config(args.config, base=cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    if args.case == "boolean":
        cfg = _config_for(args, simulate_defaults())
        result = boolean_ensemble(cfg)
        rows = []
        for run in result.runs:
            for rec in run.section.added:
                a0, a1 = rec.adjoined
                rows.append(
                    [
                        run.bwindow.window_id,
                        rec.level,
                        rec.index,
                        "{" + " ".join(rec.anchor.as_strings()) + "}",
                        "{" + " ".join(a0.as_strings()) + "}",
                        "{" + " ".join(a1.as_strings()) + "}",
                        "OK",
                    ]
                )
        write_csv(out / "boolean_triangles.csv",
                  ["window", "level", "gamma_index", "anchor", "adj0", "adj1", "status"], rows)
        for run in result.runs:
            section_to_json(run.section, out / f"{run.bwindow.window_id}_section.json")
        print(f"boolean: {len(result.runs)} windows, "
              f"{sum(len(r.section.added) for r in result.runs)} triangles, "
              f"decode failures: {len(result.decode_failures)}")
        return EXIT_OK if result.ok() else EXIT_CHECK_FAILED

    cfg = _config_for(args, simulate_defaults())
    result = simulate_ensemble(cfg)
    for run in result.runs:
        window_to_json(run.window, out / f"{run.window.window_id}_window.json")
        section_to_json(run.section, out / f"{run.window.window_id}_section.json")
    write_csv(
        out / "separation.csv",
        ["pair", "distinguished_at", "skipped_radii"],
        [row.csv() for row in result.report.rows],
    )
    rep = result.report
    print(
        f"separation: {rep.distinguished}/{rep.comparable} pairs distinguished, "
        f"{rep.clipped_pairs} fully clipped, {rep.skipped_comparisons} skipped comparisons, "
        f"decode failures: {len(result.decode_failures)}"
    )
    return EXIT_OK if result.ok() else EXIT_CHECK_FAILED


def cmd_toast(args) -> int:
    cfg = _config_for(args, toast_defaults(args.d))
    if args.d != cfg.d:
        cfg = replace(cfg, d=args.d)
    out = _out_dir(args)
    runs = toast_ensemble(cfg)
    all_rows = []
    ok = True
    for i, run in enumerate(runs):
        toast_to_json(run.toast, out / f"{run.toast.window_id}.json")
        planes = [(0, 1)] if cfg.d == 1 else [(0, 1), (2, 3)]
        for plane in planes:
            toast_svg(
                run.toast,
                out / f"{run.toast.window_id}_p{plane[0]}{plane[1]}.svg",
                plane=plane,
            )
        for row in run.report.rows():
            all_rows.append([run.toast.window_id] + row)
        all_rows.append([run.toast.window_id, "polyconvex", "", "", "",
                         "OK" if run.polyconvex else "FAIL", ""])
        ok = ok and run.ok()
    write_csv(out / "toast_validation.csv",
              ["toast", "item", "passed", "failed", "skipped", "status", "notes"], all_rows)
    n_ok = sum(1 for r in runs if r.ok())
    print(f"toast: {n_ok}/{len(runs)} toasts valid and polynomially convex")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_build(args) -> int:
    cfg = _config_for(args, build_defaults())
    out = _out_dir(args)
    try:
        result = build_run(cfg)
    except ApproximationBudgetError as err:
        print(f"build: approximation budget exhausted: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except BuildError as err:
        print(f"build: {err}", file=sys.stderr)
        return EXIT_ERROR

    window_to_json(result.window, out / "build_window.json")
    section_to_json(result.section, out / "build_section.json")
    toast_to_json(result.toast, out / "build_toast.json")
    ind = result.induction
    dump_json(
        out / "build_functions.json",
        {
            "kind": "entire_functions",
            "window_id": result.window.window_id,
            "functions": {rid: rep_to_json_dict(rep) for rid, rep in sorted(ind.functions.items())},
            "top_ids": sorted(ind.top_ids),
        },
    )
    write_csv(
        out / "build_ledger.csv",
        ["level", "region", "eps", "delta_raw", "delta_clamped", "sup_err", "grad_diff_sup"],
        [row.csv() for row in ind.ledger.rows],
    )

    failures: list[str] = []
    chain_issues = ind.ledger.check_chain()
    failures.extend(chain_issues)

    crit_rows = []
    regions = {
        f"L{lvl.n}@" + ",".join(r.center.as_strings()): r
        for lvl in result.toast.levels
        for r in lvl.regions
    }
    located_points = []
    for rid in sorted(ind.functions):
        rep = ind.functions[rid]
        region = regions[rid]
        found = analysis.locate_critical_points(rep, region.absolute(), tol=1e-6)
        expected = sorted(
            (p for p in rep.crit_set if region.absolute().contains_point(
                GroupPoint.of(*_complex_to_rat(p)))),
            key=lambda z: (z.real, z.imag),
        )
        agree = len(found) == len(expected) and all(
            m == 1 and abs(z - p) <= 1e-6 for (z, m), p in zip(found, expected)
        )
        crit_rows.append([rid, len(expected), len(found), "OK" if agree else "FAIL"])
        located_points.extend((z.real, z.imag) for z, _ in found)
        if not agree:
            failures.append(f"{rid}: located critical points disagree with the prescription")
    write_csv(out / "build_critical_points.csv",
              ["region", "expected", "located", "status"], crit_rows)

    floor_report = analysis.verify_gradient_floor(ind)
    write_csv(out / "build_gradient_floor.csv",
              ["region", "level", "floor", "measured_min", "status"],
              [row.csv() for row in floor_report.rows])
    if not floor_report.ok():
        failures.append("gradient floor violated")

    decay = analysis.error_decay_report(ind.ledger)
    write_csv(out / "build_error_decay.csv",
              ["level", "eps", "measured_sup", "tail"], [row.csv() for row in decay])
    for row in decay:
        if row.level >= 1 and row.measured_sup >= row.eps:
            failures.append(f"level {row.level} sup {row.measured_sup} at or above eps budget")

    toast_svg(
        result.toast,
        out / "build_overlay.svg",
        points=[(float(p.coords[0]), float(p.coords[1])) for p in result.section.points()],
        located=located_points,
    )

    for line in failures:
        print(f"build: FAIL {line}", file=sys.stderr)
    print(
        f"build: {len(ind.functions)} functions over {len(regions)} regions, "
        f"{len(result.section.points())} section points, "
        f"{'all checks passed' if not failures else f'{len(failures)} failures'}"
    )
    return EXIT_OK if not failures else EXIT_CHECK_FAILED


def _complex_to_rat(z: complex) -> tuple[str, str]:
    # exact binary float -> rational strings, for exact box membership
    from fractions import Fraction

    return (str(Fraction(z.real)), str(Fraction(z.imag)))


def cmd_verify(args) -> int:
    """Re-run checks against artifacts already on disk."""
    out = _out_dir(args)
    failures = []
    windows = {}
    for path in sorted(out.glob("*_window.json")):
        w = window_from_json(path)
        windows[w.window_id] = w
    sections = {}
    for path in sorted(out.glob("*_section.json")):
        doc = load_json(path)
        if doc["case"] != "r2d":
            continue
        sections[doc["window_id"]] = _section_from_doc(doc)
    ensemble = [(windows[wid], sections[wid]) for wid in sorted(sections) if wid in windows]
    if ensemble:
        cfg = _config_for(args, simulate_defaults())
        report = verify_separation(ensemble, cfg.schedule())
        if not report.all_distinguished():
            failures.append(f"{len(report.failures())} pairs not distinguished")
        print(f"verify: separation {report.distinguished}/{report.comparable}")
    for path in sorted(out.glob("toast*.json")) + sorted(out.glob("build_toast.json")):
        toast = toast_from_json(path)
        frame_radius = max(
            (abs(c) for lvl in toast.levels for r in lvl.regions
             for c in r.absolute().lo.coords + r.absolute().hi.coords),
            default=None,
        )
        if frame_radius is None:
            continue
        from .orbit_window import OrbitWindow

        frame = OrbitWindow(toast.window_id, toast.d, frame_radius, (), 0)
        report = validate_toast(toast, frame)
        poly = validate_polyconvex_toast(toast)
        if not (report.ok() and poly):
            failures.append(f"{path.name}: toast re-validation failed")
        print(f"verify: {path.name} items "
              f"{'OK' if report.ok() else 'FAIL'}, polyconvex {'OK' if poly else 'FAIL'}")
    fn_path = out / "build_functions.json"
    if fn_path.exists():
        from .entire import rep_from_json_dict

        doc = load_json(fn_path)
        toast = toast_from_json(out / "build_toast.json")
        regions = {
            f"L{lvl.n}@" + ",".join(r.center.as_strings()): r
            for lvl in toast.levels
            for r in lvl.regions
        }
        for rid, rep_doc in sorted(doc["functions"].items()):
            rep = rep_from_json_dict(rep_doc)
            found = analysis.locate_critical_points(rep, regions[rid].absolute(), tol=1e-6)
            inside = [
                p
                for p in rep.crit_set
                if regions[rid].absolute().contains_point(GroupPoint.of(*_complex_to_rat(p)))
            ]
            if len(found) != len(inside):
                failures.append(f"{rid}: critical point count mismatch on reload")
        print(f"verify: {len(doc['functions'])} reloaded functions re-checked")
    for line in failures:
        print(f"verify: FAIL {line}", file=sys.stderr)
    return EXIT_OK if not failures else EXIT_CHECK_FAILED


def _section_from_doc(doc) -> SeparatingCrossSection:
    base = tuple(GroupPoint.from_strings(p) for p in doc["base"])
    added = []
    for rec in doc["added"]:
        entries = tuple(
            (
                GroupPoint.from_strings(e["cocycle"]),
                tuple(int(b) for b in e["labels"]),
            )
            for e in rec["tuple"]["entries"]
        )
        added.append(
            AddedRecord(
                GroupPoint.from_strings(rec["anchor"]),
                rec["level"],
                BetaTuple(rec["tuple"]["n"], entries),
                tuple(GroupPoint.from_strings(p) for p in rec["adjoined"]),
                int(rec["index"]),
            )
        )
    return SeparatingCrossSection(doc["window_id"], doc["case"], base, tuple(added))


def cmd_report(args) -> int:
    out = _out_dir(args)
    found = False
    for name in sorted(p.name for p in out.glob("*.csv")):
        found = True
        lines = (out / name).read_text().splitlines()
        print(f"== {name}: {len(lines) - 1} rows")
        for line in lines[:6]:
            print(f"   {line}")
        if len(lines) > 6:
            print(f"   ... ({len(lines) - 6} more)")
    if not found:
        print(f"report: no artifacts under {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="toastlab",
        description="Separating cross-sections, corridor toasts, and entire functions "
        "with prescribed critical points, on finite orbit windows.",
    )
    parser.add_argument("--config", type=str, default=None, help="config file path")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--jobs", type=int, default=None, help="worker bound (deterministic)")
    parser.add_argument("--out", type=str, default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="windows + separating sections + separation report")
    p_sim.add_argument("--case", choices=["r2d", "boolean"], default="r2d")
    p_sim.set_defaults(func=cmd_simulate)

    p_toast = sub.add_parser("toast", help="grid/corridor toasts + validation + figures")
    p_toast.add_argument("--d", type=int, choices=[1, 2], default=1)
    p_toast.set_defaults(func=cmd_toast)

    p_build = sub.add_parser("build", help="full d=1 pipeline with verification")
    p_build.set_defaults(func=cmd_build)

    p_verify = sub.add_parser("verify", help="re-run checks on existing artifacts")
    p_verify.set_defaults(func=cmd_verify)

    p_report = sub.add_parser("report", help="summarize artifact CSVs")
    p_report.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as err:
        print(f"toastlab: error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
