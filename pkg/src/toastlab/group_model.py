"""Exact group models: rational vectors in R^{2d} and a truncated Boolean vector group.

Group elements double as positions and as cocycle values.  All arithmetic is
exact (fractions.Fraction / frozensets over Z/2Z); floating point appears only
when a norm is reported as a real number.  Exact comparisons against radii go
through squared norms, which stay rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .serialize import parse_rat, rat_str

Rational = Fraction


@dataclass(frozen=True)
class GroupPoint:
    """Element of R^{2d} with exact rational coordinates (always lies in the
    dense rational subgroup, by representation)."""

    coords: tuple[Fraction, ...]

    def __post_init__(self):
        if any(type(c) is not Fraction for c in self.coords):
            object.__setattr__(self, "coords", tuple(Fraction(c) for c in self.coords))
        elif type(self.coords) is not tuple:
            object.__setattr__(self, "coords", tuple(self.coords))

    @staticmethod
    def of(*coords) -> "GroupPoint":
        return GroupPoint(tuple(Fraction(c) for c in coords))

    @staticmethod
    def zero(dim: int) -> "GroupPoint":
        return GroupPoint((Fraction(0),) * dim)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __add__(self, other: "GroupPoint") -> "GroupPoint":
        return GroupPoint(tuple(a + b for a, b in zip(self.coords, other.coords, strict=True)))

    def __sub__(self, other: "GroupPoint") -> "GroupPoint":
        return GroupPoint(tuple(a - b for a, b in zip(self.coords, other.coords, strict=True)))

    def __neg__(self) -> "GroupPoint":
        return GroupPoint(tuple(-a for a in self.coords))

    def is_identity(self) -> bool:
        return all(c == 0 for c in self.coords)

    def norm2(self) -> Fraction:
        """Exact squared Euclidean norm."""
        return sum((c * c for c in self.coords), Fraction(0))

    def sort_key(self):
        """Lexicographic key on exact coordinates (the total order on points)."""
        return self.coords

    def dist_key(self, other: "GroupPoint") -> Fraction:
        """Exact quantity monotone in the distance to ``other`` (squared norm)."""
        return (self - other).norm2()

    def as_strings(self) -> list[str]:
        return [rat_str(c) for c in self.coords]

    @staticmethod
    def from_strings(items: Sequence[str]) -> "GroupPoint":
        return GroupPoint(tuple(parse_rat(s) for s in items))

    def to_complex(self) -> complex:
        """View a 2-coordinate point as one complex number (d = 1 only)."""
        if len(self.coords) != 2:
            raise ValueError("to_complex requires exactly 2 coordinates")
        return complex(float(self.coords[0]), float(self.coords[1]))


def norm(g: GroupPoint) -> float:
    """Euclidean norm, evaluated in floating point.

    Zero is decided exactly on the rationals: norm(g) == 0.0 iff g is the
    identity, regardless of float underflow on tiny coordinates.
    """
    if g.is_identity():
        return 0.0
    val = math.sqrt(float(g.norm2()))
    # a nonzero rational can underflow to 0.0; report the smallest positive
    # float instead so the "norm == 0 iff identity" contract holds.
    return val if val > 0.0 else math.ulp(0.0)


def cocycle(x: GroupPoint, y: GroupPoint) -> GroupPoint:
    """The group element carrying x to y: exactly y - x in the abelian model."""
    return y - x


@dataclass(frozen=True)
class DeltaSet:
    """Enumeration rule for the norm-band set used by the non-Boolean encoder.

    Element k is (1/2 + 1/(k+3), 0, ..., 0); all norms lie strictly between
    1/2 and 1, first coordinates are positive (so the set misses its own
    negatives), and elements are pairwise distinct.
    """

    delta: Fraction
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "delta", Fraction(self.delta))
        if self.delta >= Fraction(1, 2):
            raise ValueError(f"delta must be < 1/2 to leave room in the norm band, got {self.delta}")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")

    def element(self, k: int) -> GroupPoint:
        if k < 0:
            raise ValueError("index must be a natural number")
        first = Fraction(1, 2) + Fraction(1, k + 3)
        return GroupPoint((first,) + (Fraction(0),) * (self.dim - 1))


def delta_element(ds: DeltaSet, k: int) -> GroupPoint:
    return ds.element(k)


# ---------------------------------------------------------------------------
# truncated Boolean vector group

@dataclass(frozen=True)
class BoolGroupElement:
    """Vector over Z/2Z supported on {0..N-1}, stored as its support set.

    Addition is symmetric difference, so every element is its own inverse.
    The (non-proper, truncation-scale) norm is sum of weights 2^{-i} over the
    support, kept exact as a Fraction.
    """

    bits: frozenset[int]
    truncation: int

    def __post_init__(self):
        object.__setattr__(self, "bits", frozenset(self.bits))
        if any(b < 0 or b >= self.truncation for b in self.bits):
            raise ValueError(f"support {sorted(self.bits)} outside truncation {self.truncation}")

    @staticmethod
    def of(bits: Iterable[int], truncation: int) -> "BoolGroupElement":
        return BoolGroupElement(frozenset(bits), truncation)

    @staticmethod
    def identity(truncation: int) -> "BoolGroupElement":
        return BoolGroupElement(frozenset(), truncation)

    def __add__(self, other: "BoolGroupElement") -> "BoolGroupElement":
        if self.truncation != other.truncation:
            raise ValueError("mixed truncations")
        return BoolGroupElement(self.bits ^ other.bits, self.truncation)

    # subtraction and negation coincide with addition in a Boolean group
    __sub__ = __add__

    def __neg__(self) -> "BoolGroupElement":
        return self

    def is_identity(self) -> bool:
        return not self.bits

    def norm2(self) -> Fraction:
        # kept under the same name as GroupPoint for the generic machinery;
        # for Boolean elements the weight sum itself is the exact key.
        return self.bool_norm()

    def bool_norm(self) -> Fraction:
        return sum((Fraction(1, 2 ** i) for i in self.bits), Fraction(0))

    def sort_key(self):
        return tuple(sorted(self.bits))

    def dist_key(self, other: "BoolGroupElement") -> Fraction:
        return (self + other).bool_norm()

    def as_strings(self) -> list[str]:
        return [str(b) for b in sorted(self.bits)]


def bool_norm(g: BoolGroupElement) -> float:
    return float(g.bool_norm())


def boolean_pair_sequence(
    truncation: int,
) -> tuple[BoolGroupElement, BoolGroupElement, list[BoolGroupElement]]:
    """Return (g0, g1, gammas) over the truncated Boolean group.

    g0 = {0}, g1 = {1}; candidate gammas are the disjoint pairs {2k+2, 2k+3}.
    Candidates whose doubled norm reaches min(|g0|, |g1|, |g0+g1|) are dropped
    from the front, so every returned gamma satisfies the separation bound.
    Disjoint supports make {g0, g1, gamma_0, ...} linearly independent.
    """
    if truncation < 8:
        raise ValueError("truncation must be >= 8 to host g0, g1 and at least one gamma")
    g0 = BoolGroupElement.of({0}, truncation)
    g1 = BoolGroupElement.of({1}, truncation)
    bound = min(g0.bool_norm(), g1.bool_norm(), (g0 + g1).bool_norm())
    gammas = []
    k = 0
    while 2 * k + 3 < truncation:
        gamma = BoolGroupElement.of({2 * k + 2, 2 * k + 3}, truncation)
        if 2 * gamma.bool_norm() < bound:
            gammas.append(gamma)
        k += 1
    if not gammas:
        raise ValueError(f"truncation {truncation} too small for any valid gamma")
    return g0, g1, gammas
