"""SL(2,R) interval cocycles over an interval exchange.

The cocycle assigns a matrix to each cell of a refinement of the exchanged
pieces. ``transport(coc, p, n)`` is the parallel transport along n steps of
the orbit of p (backward for negative n).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import DegenerateError, InvalidArgumentError, OrbitTerminatedError
from .iet import IntervalExchange, Lane, LanePoint, _num
from .plane import DET_TOL, Mat2, ProjLine, Vec2

RENORM_EVERY = 64
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True, slots=True)
class Cell:
    left: float
    length: float
    matrix: Mat2

    @property
    def right(self) -> float:
        return self.left + self.length


class IntervalCocycle:
    def __init__(self, iet: IntervalExchange, cells: Sequence[Cell], det_tol: float = DET_TOL) -> None:
        self.iet = iet
        self.cells = tuple(cells)
        tol = max(iet.tol, 1e-15)
        if not self.cells:
            raise InvalidArgumentError("cocycle has no cells")
        edge = iet.lo
        for k, c in enumerate(self.cells):
            if c.length <= 0 or abs(c.left - edge) > tol:
                raise InvalidArgumentError("cells do not tile the base", cell=k)
            if not c.matrix.is_finite() or not c.matrix.is_special(det_tol):
                raise InvalidArgumentError("cell matrix is not in SL(2)", cell=k, det=c.matrix.det())
            edge = c.right
        if abs(edge - iet.hi) > tol:
            raise InvalidArgumentError("cells do not reach the right end", end=edge)

        # cells grouped by the piece that contains them
        self._piece_cells: list[list[int]] = [[] for _ in iet.pieces]
        for k, c in enumerate(self.cells):
            mid = c.left + 0.5 * c.length
            owner = iet.piece_index(LanePoint(mid))
            p = iet.pieces[owner]
            if c.left < p.left - tol or c.right > p.right + tol:
                raise InvalidArgumentError("cell straddles a piece boundary", cell=k)
            self._piece_cells[owner].append(k)

    def _cell(self, piece: int, x: float, lane: Lane) -> Mat2:
        ks = self._piece_cells[piece]
        if len(ks) == 1:
            return self.cells[ks[0]].matrix
        lefts = [self.cells[k].left for k in ks]
        i = max(bisect_right(lefts, x) - 1, 0)
        # on an interior cell boundary only the right lane uses the right-hand cell
        if i > 0 and abs(x - lefts[i]) <= self.iet.tol and lane is not Lane.RIGHT:
            i -= 1
        elif i + 1 < len(ks) and abs(x - lefts[i + 1]) <= self.iet.tol and lane is Lane.RIGHT:
            i += 1
        return self.cells[ks[i]].matrix

    def step(self, p: LanePoint) -> tuple[Mat2, LanePoint] | None:
        """Matrix from the fibre at p to the fibre at alpha(p), and alpha(p)."""
        k = self.iet.piece_index(p)
        if k is None:
            return None
        return self._cell(k, p.coord, p.lane), LanePoint(p.coord + self.iet.pieces[k].shift, p.lane)

    def step_inverse(self, p: LanePoint) -> tuple[Mat2, LanePoint] | None:
        """Matrix from the fibre at p to the fibre at alpha^-1(p), and alpha^-1(p)."""
        k = self.iet.inverse_piece_index(p)
        if k is None:
            return None
        q = LanePoint(p.coord - self.iet.pieces[k].shift, p.lane)
        return self._cell(k, q.coord, q.lane).inv(), q

    def matrix_at(self, p: LanePoint) -> Mat2 | None:
        s = self.step(p)
        return None if s is None else s[0]

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "iet": self.iet.to_dict(),
            "cells": [{"left": c.left, "length": c.length, "matrix": c.matrix.rows()} for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> IntervalCocycle:
        if not isinstance(d, dict) or d.get("format", 1) != 1:
            raise InvalidArgumentError("malformed or unsupported cocycle description")
        try:
            iet = IntervalExchange.from_dict(d["iet"])
            cells = []
            for c in d["cells"]:
                rows = [[_num(t) for t in row] for row in c["matrix"]]
                if len(rows) != 2 or any(len(r) != 2 for r in rows):
                    raise InvalidArgumentError("cell matrix must be 2x2")
                cells.append(Cell(_num(c["left"]), _num(c["length"]), Mat2.from_rows(rows)))
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed cocycle description: {exc}") from exc
        return cls(iet, cells)

    @classmethod
    def constant(cls, iet: IntervalExchange, matrix: Mat2) -> IntervalCocycle:
        return cls(iet, [Cell(p.left, p.length, matrix) for p in iet.pieces])


def walk(coc: IntervalCocycle, p: LanePoint, n: int):
    """Yield (step matrix, next point) along n steps; raise if the orbit stops."""
    step = coc.step if n >= 0 else coc.step_inverse
    for k in range(abs(n)):
        s = step(p)
        if s is None:
            raise OrbitTerminatedError("orbit fell into a break", step=k, coord=p.coord, lane=p.lane.value)
        yield s
        p = s[1]


def transport(coc: IntervalCocycle, p: LanePoint, n: int) -> Mat2:
    """Unnormalized parallel transport; may overflow for very long orbits (see transport_log)."""
    t = Mat2.identity()
    for m, _ in walk(coc, p, n):
        t = m @ t
    return t


def transport_log(coc: IntervalCocycle, p: LanePoint, n: int) -> tuple[Mat2, float]:
    """(T / s, log s) with T the transport, renormalized every RENORM_EVERY steps."""
    t = Mat2.identity()
    log_scale = 0.0
    for k, (m, _) in enumerate(walk(coc, p, n), 1):
        t = m @ t
        if k % RENORM_EVERY == 0:
            s = t.op_norm()
            t = t * (1.0 / s)
            log_scale += math.log(s)
    return t, log_scale


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_hat: float
    n: int
    sample_count: int
    spread: float
    skipped: int = 0


def finite_time_exponents(coc: IntervalCocycle, samples: Sequence[LanePoint], n: int) -> list[float | None]:
    """(1/n) log |transport(s, n)| per sample; None where the orbit terminates."""
    out: list[float | None] = []
    for s in samples:
        try:
            t, ls = transport_log(coc, s, n)
        except OrbitTerminatedError:
            out.append(None)
            continue
        out.append((math.log(t.op_norm()) + ls) / n)
    return out


def lyapunov_estimate(coc: IntervalCocycle, samples: Sequence[LanePoint], n: int) -> LyapunovEstimate:
    if n < 1 or not samples:
        raise InvalidArgumentError("need n >= 1 and at least one sample", n=n, samples=len(samples))
    raw = finite_time_exponents(coc, samples, n)
    vals = [v for v in raw if v is not None]
    skipped = len(raw) - len(vals)
    if not vals:
        raise OrbitTerminatedError("every sample orbit terminated", step=0, skipped=skipped)
    return LyapunovEstimate(sum(vals) / len(vals), n, len(vals), max(vals) - min(vals), skipped)


def sample_points(iet: IntervalExchange, count: int, avoid: Sequence[float] = (), offset: float = 0.5) -> list[LanePoint]:
    """Low-discrepancy plain points (golden-ratio sequence) avoiding the given coordinates and all breaks."""
    bad = sorted(set(avoid) | set(iet.breaks) | set(iet.inverse_breaks))
    out: list[LanePoint] = []
    k = 0
    margin = 2 * iet.tol
    while len(out) < count:
        x = iet.lo + ((offset + k * GOLDEN) % 1.0) * iet.length
        k += 1
        if x - iet.lo <= margin or iet.hi - x <= margin:
            continue
        i = bisect_right(bad, x)
        if (i > 0 and x - bad[i - 1] <= margin) or (i < len(bad) and bad[i] - x <= margin):
            continue
        out.append(LanePoint(x))
    return out


@dataclass(frozen=True)
class StableLineResult:
    line: ProjLine
    direction: Direction
    iterations_used: int
    residual: float

    @property
    def vector(self) -> Vec2:
        return self.line.representative


def _contracted(t: Mat2, at: LanePoint, n: int) -> Vec2:
    smax, smin = t.singular_values()
    if smax - smin <= 1e-12 * smax:
        raise DegenerateError("transport does not contract any line", coord=at.coord, n=n, smax=smax, smin=smin)
    return t.right_singular_vectors()[1]


def stable_line(coc: IntervalCocycle, p: LanePoint, direction: Direction | str, n: int) -> StableLineResult:
    """Most contracted line of transport(p, +-n), compared against the 2n estimate."""
    direction = Direction(direction)
    if n < 1:
        raise InvalidArgumentError("stable line needs n >= 1", n=n)
    sgn = 1 if direction is Direction.FORWARD else -1
    t = Mat2.identity()
    first = None
    for k, (m, _) in enumerate(walk(coc, p, sgn * 2 * n), 1):
        t = m @ t
        if k % RENORM_EVERY == 0 or k == n:
            t = t * (1.0 / t.op_norm())
        if k == n:
            first = _contracted(t, p, n)
    second = _contracted(t, p, 2 * n)
    return StableLineResult(ProjLine.through(first), direction, n, ProjLine.through(first).distance(ProjLine.through(second)))


def _positive_in(t: Mat2, basis_inv: Mat2, basis: Mat2) -> bool:
    q = basis_inv @ t @ basis
    return q.a > 0 and q.b > 0 and q.c > 0 and q.d > 0


def eventual_positivity_certificate(coc: IntervalCocycle, n_max: int, basis: Mat2 | None = None) -> int | None:
    """Smallest n <= n_max with every n-step transport strictly positive.

    Positivity is taken in the cone spanned by the columns of ``basis``
    (standard cone by default). Returns None if no such n exists up to n_max.
    """
    if n_max < 1:
        raise InvalidArgumentError("n_max must be at least 1", n_max=n_max)
    basis = basis or Mat2.identity()
    basis_inv = basis.inv()
    iet = coc.iet
    tol = iet.tol
    level0 = sorted({c.left for c in coc.cells[1:]})
    cuts = list(level0)
    for n in range(1, n_max + 1):
        edges = [iet.lo] + cuts + [iet.hi]
        ok = True
        for a, b in zip(edges, edges[1:]):
            if b - a <= 2 * tol:
                continue
            try:
                t = transport(coc, LanePoint(0.5 * (a + b)), n)
            except OrbitTerminatedError:
                ok = False
                break
            if not _positive_in(t, basis_inv, basis):
                ok = False
                break
        if ok:
            return n
        # refine: itinerary of length n+1 also depends on where alpha^n lands
        pulled = set(level0)
        for x in cuts:
            for lane in (Lane.LEFT, Lane.RIGHT):
                q = iet.apply_inverse(LanePoint(x, lane))
                if q is not None and iet.lo + tol < q.coord < iet.hi - tol:
                    pulled.add(q.coord)
        merged: list[float] = []
        for x in sorted(pulled):
            if not merged or x - merged[-1] > tol:
                merged.append(x)
        cuts = merged
    return None
