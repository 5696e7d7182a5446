"""Exact-rational string codecs and versioned JSON artifact I/O.

All geometric quantities cross process boundaries as "num/den" strings so
that round trips are bit-exact.  Floats (entire-function data) are written
with repr precision, which round-trips exactly for IEEE doubles.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

SCHEMA_VERSION = 1


def rat_str(q: Fraction) -> str:
    """Render a Fraction as "num/den" (den always present, canonical form)."""
    return f"{q.numerator}/{q.denominator}"


def parse_rat(s: str) -> Fraction:
    """Parse "num/den" or a plain integer string into a Fraction."""
    s = s.strip()
    if "/" in s:
        num, den = s.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(s))


def complex_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def parse_complex(pair) -> complex:
    return complex(pair[0], pair[1])


def dump_json(path: str | Path, payload: dict) -> None:
    """Write a schema-versioned JSON document with stable key order."""
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_json(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r} in {path}")
    return doc


def write_csv(path: str | Path, header: list[str], rows: list[list]) -> None:
    """Plain deterministic CSV writer (no quoting needs in our artifacts)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
