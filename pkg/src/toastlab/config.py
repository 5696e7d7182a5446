"""Run configuration: flat sectioned key/value files, validated on load.

The format is TOML-like but deliberately minimal (diff-friendly experiment
tracking): ``[section]`` headers, one ``key = value`` per line, ``#``
comments.  Exact rationals are written "num/den"; lists are comma-separated.
Unknown sections or keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

from .serialize import parse_rat


@dataclass
class RunConfig:
    # [run]
    d: int = 1
    seed: int = 20260801
    windows: int = 20
    depth: int = 3
    radius: Fraction = Fraction(40)
    delta: Fraction = Fraction(1, 4)
    jobs: int = 1
    # [schedule]
    radii: tuple[Fraction, ...] = ()
    # [boolean]
    boolean_truncation: int = 64
    boolean_windows: int = 10
    boolean_depth: int = 2
    # [toast]
    toast_cell0: Fraction = Fraction(4)
    toast_corridor0: Fraction = Fraction(1, 10)
    toast_levels: int = 3
    toast_branch: int = 4
    toast_misalign: int | None = None
    toast_min_piece: Fraction = Fraction(9, 16)
    toast_corridors: tuple = ()
    toast_seeds: int = 20
    # [solver]
    solver_m0: int = 8
    solver_m_max: int = 32
    solver_m_step: int = 4
    solver_iters: int = 40
    solver_panel_len: float = 1.5
    solver_gl_order: int = 10
    solver_eps0: float = 1.0
    # [output]
    out_dir: str = "out"

    def __post_init__(self):
        self.radius = Fraction(self.radius)
        self.delta = Fraction(self.delta)
        self.toast_cell0 = Fraction(self.toast_cell0)
        self.toast_corridor0 = Fraction(self.toast_corridor0)
        self.toast_min_piece = Fraction(self.toast_min_piece)
        self.radii = tuple(Fraction(r) for r in self.radii)
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if not 0 < self.delta < Fraction(1, 2):
            raise ValueError(f"delta must lie in (0, 1/2), got {self.delta}")
        for name in ("radius", "toast_cell0", "toast_corridor0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("windows", "depth", "toast_levels", "toast_branch", "solver_m0",
                     "solver_m_max", "jobs"):
            if getattr(self, name) < 0 or (name != "depth" and getattr(self, name) == 0):
                raise ValueError(f"{name} must be positive")

    def schedule(self) -> tuple[Fraction, ...]:
        """Configured view radii, or doubling steps capped at radius/2."""
        if self.radii:
            return self.radii
        out = []
        r = Fraction(1)
        while r < self.radius / 2:
            out.append(r)
            r *= 2
        out.append(self.radius / 2)
        return tuple(out)


# the three stock configurations the subcommands start from
def simulate_defaults() -> RunConfig:
    return RunConfig()


def toast_defaults(d: int = 1) -> RunConfig:
    if d == 2:
        # quarter-scale tower: 4D cell counts grow with the fourth power, so
        # the demo halves the branch and misaligns two of the four axes
        return RunConfig(
            d=2, radius=Fraction(16), toast_branch=2, toast_misalign=2, toast_seeds=5
        )
    return RunConfig(d=1, radius=Fraction(64), toast_seeds=20)


def build_defaults() -> RunConfig:
    # wide corridors keep the approximation geometry mild: big gaps between
    # the level-0 boxes are what the exponent-degree budget can bridge
    return RunConfig(
        d=1,
        depth=2,
        radius=Fraction(50),
        toast_cell0=Fraction(16),
        toast_corridor0=Fraction(12),
        toast_corridors=(Fraction(12), Fraction(51, 4)),
        toast_levels=2,
        toast_branch=2,
        toast_min_piece=Fraction(55, 16),
        solver_m0=16,
        solver_m_max=64,
        solver_m_step=16,
        seed=20260801,
    )


_SCHEMA: dict[tuple[str, str], tuple[str, str]] = {
    ("run", "d"): ("d", "int"),
    ("run", "seed"): ("seed", "int"),
    ("run", "windows"): ("windows", "int"),
    ("run", "depth"): ("depth", "int"),
    ("run", "radius"): ("radius", "rat"),
    ("run", "delta"): ("delta", "rat"),
    ("run", "jobs"): ("jobs", "int"),
    ("schedule", "radii"): ("radii", "ratlist"),
    ("boolean", "truncation"): ("boolean_truncation", "int"),
    ("boolean", "windows"): ("boolean_windows", "int"),
    ("boolean", "depth"): ("boolean_depth", "int"),
    ("toast", "cell_side0"): ("toast_cell0", "rat"),
    ("toast", "corridor0"): ("toast_corridor0", "rat"),
    ("toast", "levels"): ("toast_levels", "int"),
    ("toast", "branch"): ("toast_branch", "int"),
    ("toast", "misalign_axes"): ("toast_misalign", "int"),
    ("toast", "min_piece"): ("toast_min_piece", "rat"),
    ("toast", "corridors"): ("toast_corridors", "ratlist"),
    ("toast", "seeds"): ("toast_seeds", "int"),
    ("solver", "m0"): ("solver_m0", "int"),
    ("solver", "m_max"): ("solver_m_max", "int"),
    ("solver", "m_step"): ("solver_m_step", "int"),
    ("solver", "max_iters"): ("solver_iters", "int"),
    ("solver", "panel_len"): ("solver_panel_len", "float"),
    ("solver", "gl_order"): ("solver_gl_order", "int"),
    ("solver", "eps0"): ("solver_eps0", "float"),
    ("output", "dir"): ("out_dir", "str"),
}


def _convert(kind: str, raw: str):
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "rat":
        return parse_rat(raw)
    if kind == "ratlist":
        return tuple(parse_rat(part) for part in raw.split(",") if part.strip())
    return raw


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    """Parse a config file on top of a base configuration."""
    cfg = base if base is not None else RunConfig()
    updates = {}
    section = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if not any(s == section for s, _ in _SCHEMA):
                raise ValueError(f"{path}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        if section is None:
            raise ValueError(f"{path}:{lineno}: key outside any section")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        spec = _SCHEMA.get((section, key))
        if spec is None:
            raise ValueError(f"{path}:{lineno}: unknown key {section}.{key}")
        field_name, kind = spec
        updates[field_name] = _convert(kind, raw)
    return replace(cfg, **updates)
