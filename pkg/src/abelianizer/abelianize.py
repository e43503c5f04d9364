"""Abelianized holonomies, the splitting check and spectral coordinates.

A loop is a list of legs starting and ending at a base point. A transport leg
carries a raw matrix (a return of the exchange or an edge gluing). A
deviation leg from h to h' applies the slithering deviation sigma_{h'h}.
The abelianized holonomy is the composition of the legs, read in the stable
basis (E+, E-) at the base point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .cocycle import Direction, stable_line
from .errors import InvalidArgumentError, NotSplitError, UncertifiedError
from .iet import LanePoint
from .plane import Mat2, ProjLine, Vec2, sine_distance
from .slithering import LINE_TOL, JumpField

BASIS_STEPS = 48
SPLIT_TOL_REL = 1e-3


@dataclass(frozen=True)
class TransportLeg:
    start: float
    end: float
    matrix: Mat2


@dataclass(frozen=True)
class DeviationLeg:
    start: float
    end: float


Leg = Union[TransportLeg, DeviationLeg]


@dataclass(frozen=True)
class Loop:
    label: str
    base: float
    legs: tuple[Leg, ...]

    def __post_init__(self) -> None:
        if not self.legs:
            return
        pos = self.base
        for k, leg in enumerate(self.legs):
            if abs(leg.start - pos) > 1e-12 * max(1.0, abs(pos)):
                raise InvalidArgumentError("loop legs do not chain", leg=k, expected=pos, got=leg.start)
            pos = leg.end
        if abs(pos - self.base) > 1e-12 * max(1.0, abs(pos)):
            raise InvalidArgumentError("loop does not close at its base point", base=self.base, end=pos)


@dataclass(frozen=True)
class StableBasis:
    plus: Vec2
    minus: Vec2
    residual: float

    def lines(self) -> tuple[ProjLine, ProjLine]:
        return ProjLine.through(self.plus), ProjLine.through(self.minus)


def stable_basis(field: JumpField, point: float, n: int = BASIS_STEPS) -> StableBasis:
    p = LanePoint(point)
    plus = stable_line(field.coc, p, Direction.FORWARD, n)
    minus = stable_line(field.coc, p, Direction.BACKWARD, n)
    return StableBasis(plus.vector, minus.vector, max(plus.residual, minus.residual))


@dataclass(frozen=True)
class AbelianizedHolonomy:
    loop_label: str
    matrix: Mat2
    stable_basis: tuple[ProjLine, ProjLine]
    diagonal: tuple[float, float]
    off_diag_residual: float
    tail_bound: float
    basis_residual: float = 0.0


def compose_loop(field: JumpField, loop: Loop) -> tuple[Mat2, float]:
    """Composition of the legs and a bound on its distance from the untruncated composition."""
    total = Mat2.identity()
    exact_norm = 1.0  # product of norms of the computed legs
    padded_norm = 1.0  # product of (norm + tail)
    for leg in loop.legs:
        if isinstance(leg, TransportLeg):
            m, tail = leg.matrix, 0.0
        else:
            r = field.deviation(leg.end, leg.start)
            m, tail = r.value, r.tail_bound
        total = m @ total
        n = m.op_norm()
        exact_norm *= n
        padded_norm *= n + tail
    return total, padded_norm - exact_norm


def read_in_basis(matrix: Mat2, basis: StableBasis) -> tuple[tuple[float, float], float]:
    p = Mat2.from_columns(basis.plus, basis.minus)
    h = p.inv() @ matrix @ p
    return (h.a, h.d), max(abs(h.b), abs(h.c))


def abelianized_holonomy(
    field: JumpField, loop: Loop, basis: StableBasis | None = None, line_tol: float = LINE_TOL
) -> AbelianizedHolonomy:
    basis = basis or stable_basis(field, loop.base)
    if basis.residual > line_tol:
        raise UncertifiedError("stable basis at the base point is not converged", residual=basis.residual)
    matrix, tail = compose_loop(field, loop)
    diagonal, off = read_in_basis(matrix, basis)
    return AbelianizedHolonomy(loop.label, matrix, basis.lines(), diagonal, off, tail, basis.residual)


@dataclass(frozen=True)
class SplittingReport:
    grade: int
    half_grade: int
    samples: int
    max_plus: float
    max_minus: float
    max_plus_half: float
    max_minus_half: float
    mean_tail: float

    @property
    def worst(self) -> float:
        return max(self.max_plus, self.max_minus)

    @property
    def worst_half(self) -> float:
        return max(self.max_plus_half, self.max_minus_half)


def _max_pairwise(vs: Sequence[Vec2]) -> float:
    return max((sine_distance(u, v) for i, u in enumerate(vs) for v in vs[i + 1 :]), default=0.0)


def splitting_report(
    field: JumpField,
    samples: Sequence[LanePoint],
    base: float,
    truncation_grade: int | None = None,
    n: int = BASIS_STEPS,
) -> SplittingReport:
    """Spread of the abelianized stable lines F+-_h = sigma_{ah} E+-_h over the samples."""
    g = field.truncation_grade if truncation_grade is None else truncation_grade
    half = g // 2
    full, coarse = field.truncated(g), field.truncated(half)
    bases = [stable_basis(field, s.coord, n) for s in samples]
    out = []
    tails = []
    for fld in (full, coarse):
        plus, minus = [], []
        for s, b in zip(samples, bases):
            r = fld.deviation(base, s.coord)
            plus.append(r.value @ b.plus)
            minus.append(r.value @ b.minus)
            if fld is full:
                tails.append(r.tail_bound)
        out.append((_max_pairwise(plus), _max_pairwise(minus)))
    mean_tail = sum(tails) / len(tails) if tails else 0.0
    return SplittingReport(g, half, len(samples), out[0][0], out[0][1], out[1][0], out[1][1], mean_tail)


@dataclass(frozen=True)
class SpectralCoordinates:
    a_plus: float
    b_plus: float
    lean: str


def spectral_coordinates(
    first: AbelianizedHolonomy, second: AbelianizedHolonomy, lean: str, split_tol_rel: float = SPLIT_TOL_REL
) -> SpectralCoordinates:
    """Holonomies of the forward-stable line system around the two loops."""
    for h in (first, second):
        tol = split_tol_rel * h.matrix.op_norm()
        if not h.off_diag_residual <= tol:
            raise NotSplitError(
                f"holonomy '{h.loop_label}' is not diagonal in the stable basis",
                residual=h.off_diag_residual,
                split_tol=tol,
            )
    a, b = first.diagonal[0], second.diagonal[0]
    if not (math.isfinite(a) and math.isfinite(b)) or a == 0 or b == 0:
        raise NotSplitError("degenerate spectral read-off", a_plus=a, b_plus=b)
    return SpectralCoordinates(a, b, lean)
