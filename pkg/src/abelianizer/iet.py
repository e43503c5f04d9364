"""Interval exchange transformations on a divided interval.

A point of the divided interval is a coordinate plus a lane. Away from break
points all lanes behave alike. At a break point the left lane follows the
left-continuous extension of the map, the right lane follows the
right-continuous extension, and the median has no image.

Points of the same orbit share a lane tag, so a left-lane orbit keeps using
left-continuous extensions whenever it meets a break.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .errors import InvalidArgumentError


class Lane(str, Enum):
    PLAIN = "plain"
    LEFT = "left"
    MEDIAN = "median"
    RIGHT = "right"


class Criticality(str, Enum):
    FORWARD = "forward-critical"  # on the backward orbit of a break of alpha
    BACKWARD = "backward-critical"  # on the forward orbit of a break of alpha^-1


@dataclass(frozen=True, slots=True)
class LanePoint:
    coord: float
    lane: Lane = Lane.PLAIN


@dataclass(frozen=True, slots=True)
class Piece:
    left: float
    length: float
    shift: float

    @property
    def right(self) -> float:
        return self.left + self.length


def _num(x) -> float:
    try:
        v = float(x)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"not a number: {x!r}") from exc
    if not math.isfinite(v):
        raise InvalidArgumentError(f"non-finite number: {x!r}")
    return v


class IntervalExchange:
    """Piecewise translation of the open interval (lo, hi).

    ``noncritical`` lists piece boundaries (of the map or of its inverse) that
    are artifacts of the chosen return interval rather than singular leaves.
    Points landing on them are continued with the left-hand piece and they are
    left out of the grading.
    """

    def __init__(
        self,
        base: tuple[float, float],
        pieces: Sequence[Piece],
        noncritical: Iterable[float] = (),
        rel_tol: float = 1e-12,
    ) -> None:
        lo, hi = (_num(t) for t in base)
        if not lo < hi:
            raise InvalidArgumentError("empty base interval", base=(lo, hi))
        if not pieces:
            raise InvalidArgumentError("no pieces")
        self.lo, self.hi = lo, hi
        self.tol = rel_tol * (hi - lo)
        self.pieces = tuple(pieces)
        tol = max(self.tol, 1e-15)

        edge = lo
        for k, p in enumerate(self.pieces):
            if p.length <= 0:
                raise InvalidArgumentError("piece with non-positive length", piece=k)
            if abs(p.left - edge) > tol:
                raise InvalidArgumentError("pieces do not tile the base", piece=k, expected=edge, got=p.left)
            edge = p.right
        if abs(edge - hi) > tol:
            raise InvalidArgumentError("pieces do not reach the right end", end=edge)

        order = sorted(range(len(self.pieces)), key=lambda k: self.pieces[k].left + self.pieces[k].shift)
        edge = lo
        for k in order:
            p = self.pieces[k]
            if abs(p.left + p.shift - edge) > tol:
                raise InvalidArgumentError("image pieces do not tile the base", piece=k)
            edge = p.right + p.shift
        if abs(edge - hi) > tol:
            raise InvalidArgumentError("image pieces do not reach the right end", end=edge)

        self._bounds = [lo] + [p.left for p in self.pieces[1:]] + [hi]
        self._image_order = order
        self._image_bounds = [lo] + [self.pieces[k].left + self.pieces[k].shift for k in order[1:]] + [hi]

        self.noncritical = tuple(sorted(_num(t) for t in noncritical))
        for t in self.noncritical:
            if not (self._near_any(t, self._bounds[1:-1]) or self._near_any(t, self._image_bounds[1:-1])):
                raise InvalidArgumentError("noncritical coordinate is not a piece boundary", coord=t)
        self._bound_nc = [self._near_any(t, self.noncritical) for t in self._bounds]
        self._image_nc = [self._near_any(t, self.noncritical) for t in self._image_bounds]

    def _near_any(self, x: float, pts: Iterable[float]) -> bool:
        return any(abs(x - t) <= self.tol for t in pts)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def breaks(self) -> list[float]:
        """Interior discontinuities of alpha."""
        return self._bounds[1:-1]

    @property
    def inverse_breaks(self) -> list[float]:
        """Interior discontinuities of alpha^-1."""
        return self._image_bounds[1:-1]

    @property
    def critical_breaks(self) -> list[float]:
        return [t for t, nc in zip(self._bounds[1:-1], self._bound_nc[1:-1]) if not nc]

    @property
    def critical_inverse_breaks(self) -> list[float]:
        return [t for t, nc in zip(self._image_bounds[1:-1], self._image_nc[1:-1]) if not nc]

    def _locate(self, bounds: list[float], noncrit: list[bool], x: float, lane: Lane) -> int | None:
        n = len(bounds) - 1
        if x < bounds[0] - self.tol or x > bounds[-1] + self.tol:
            return None
        i = min(max(bisect_right(bounds, x) - 1, 0), n - 1)
        j = None
        if abs(x - bounds[i]) <= self.tol:
            j = i
        elif abs(x - bounds[i + 1]) <= self.tol:
            j = i + 1
        if j is None:
            return i
        if j == 0:
            return 0
        if j == n:
            return n - 1
        if lane is Lane.LEFT:
            return j - 1
        if lane is Lane.RIGHT:
            return j
        return j - 1 if noncrit[j] else None

    def piece_index(self, p: LanePoint) -> int | None:
        return self._locate(self._bounds, self._bound_nc, p.coord, p.lane)

    def apply(self, p: LanePoint) -> LanePoint | None:
        k = self.piece_index(p)
        if k is None:
            return None
        return LanePoint(p.coord + self.pieces[k].shift, p.lane)

    def inverse_piece_index(self, p: LanePoint) -> int | None:
        """Index of the piece whose image contains p."""
        k = self._locate(self._image_bounds, self._image_nc, p.coord, p.lane)
        return None if k is None else self._image_order[k]

    def apply_inverse(self, p: LanePoint) -> LanePoint | None:
        k = self.inverse_piece_index(p)
        if k is None:
            return None
        return LanePoint(p.coord - self.pieces[k].shift, p.lane)

    def orbit(self, p: LanePoint, n: int) -> list[LanePoint]:
        step = self.apply if n >= 0 else self.apply_inverse
        out = [p]
        for _ in range(abs(n)):
            q = step(out[-1])
            if q is None:
                break
            out.append(q)
        return out

    def to_dict(self) -> dict:
        d = {
            "format": 1,
            "base": [self.lo, self.hi],
            "pieces": [{"left": p.left, "length": p.length, "shift": p.shift} for p in self.pieces],
        }
        if self.noncritical:
            d["noncritical"] = list(self.noncritical)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> IntervalExchange:
        if not isinstance(d, dict):
            raise InvalidArgumentError("IET description must be an object")
        if d.get("format", 1) != 1:
            raise InvalidArgumentError("unsupported IET format", format=d.get("format"))
        try:
            base = d["base"]
            raw = d["pieces"]
            pieces = [Piece(_num(q["left"]), _num(q["length"]), _num(q["shift"])) for q in raw]
            if len(base) != 2:
                raise InvalidArgumentError("base must be [lo, hi]")
        except (KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"malformed IET description: {exc}") from exc
        return cls((base[0], base[1]), pieces, d.get("noncritical", ()))


def rotation(t: float, lo: float = 0.0, hi: float = 1.0) -> IntervalExchange:
    """Rotation x -> x + t modulo the base interval, as a two-piece exchange."""
    L = hi - lo
    t = t % L
    if t == 0:
        raise InvalidArgumentError("rotation by zero has no break")
    cut = hi - t
    return IntervalExchange((lo, hi), [Piece(lo, cut - lo, t), Piece(cut, hi - cut, t - L)])


def apply(iet: IntervalExchange, p: LanePoint) -> LanePoint | None:
    return iet.apply(p)


def orbit(iet: IntervalExchange, p: LanePoint, n: int) -> list[LanePoint]:
    return iet.orbit(p, n)


# grading ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GradingEntry:
    coord: float
    sign: Criticality
    grade: int
    origin: float  # grade-0 break this entry descends from
    near_saddle: bool = False

    @property
    def key(self) -> tuple[float, int]:
        """Total order on entries; forward-critical first on exact ties."""
        return (self.coord, 0 if self.sign is Criticality.FORWARD else 1)


@dataclass(frozen=True)
class SaddleConnection:
    origin: float
    sign: Criticality
    steps: int  # orbit steps from origin until it falls into a break


@dataclass(frozen=True)
class GradingTable:
    entries: tuple[GradingEntry, ...]
    K: float
    max_grade: int
    tol: float
    saddle_connections: tuple[SaddleConnection, ...] = ()
    _coords: list[float] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_coords", [e.coord for e in self.entries])

    def check_point(self, x: float) -> None:
        i = bisect_left(self._coords, x)
        for j in (i - 1, i):
            if 0 <= j < len(self._coords) and abs(self._coords[j] - x) <= self.tol:
                raise InvalidArgumentError(
                    "point lies on a critical coordinate; use lane semantics", point=x, coord=self._coords[j]
                )

    def between(self, a: float, b: float) -> tuple[GradingEntry, ...]:
        lo, hi = (a, b) if a < b else (b, a)
        return self.entries[bisect_right(self._coords, lo) : bisect_left(self._coords, hi)]

    def grade_between(self, a: float, b: float) -> int | None:
        """Lowest grade strictly between a and b, or None when resolution is exhausted."""
        inside = self.between(a, b)
        return min(e.grade for e in inside) if inside else None

    def truncated(self, max_grade: int) -> GradingTable:
        return GradingTable(
            tuple(e for e in self.entries if e.grade <= max_grade),
            self.K,
            min(max_grade, self.max_grade),
            self.tol,
            tuple(s for s in self.saddle_connections if s.steps <= max_grade),
        )

    @property
    def flagged(self) -> list[GradingEntry]:
        return [e for e in self.entries if e.near_saddle]


def build_grading(iet: IntervalExchange, K: float, max_grade: int = 40) -> GradingTable:
    if not K > 1:
        raise InvalidArgumentError("steepness K must exceed 1", K=K)
    if max_grade < 0:
        raise InvalidArgumentError("max_grade must be non-negative", max_grade=max_grade)
    raw: list[GradingEntry] = []
    saddles: list[SaddleConnection] = []
    for sign, seeds, n in (
        (Criticality.FORWARD, iet.critical_breaks, -max_grade),
        (Criticality.BACKWARD, iet.critical_inverse_breaks, max_grade),
    ):
        for b in seeds:
            pts = iet.orbit(LanePoint(b, Lane.MEDIAN), n)
            raw.extend(GradingEntry(p.coord, sign, k, b) for k, p in enumerate(pts))
            if len(pts) <= max_grade:
                saddles.append(SaddleConnection(b, sign, len(pts) - 1))

    raw.sort(key=lambda e: (e.coord, e.grade))
    tol = iet.tol
    kept: list[GradingEntry] = []
    for e in raw:
        dup = False
        for j in range(len(kept) - 1, -1, -1):
            if e.coord - kept[j].coord > tol:
                break
            if kept[j].sign is e.sign:
                if e.grade < kept[j].grade:
                    kept[j] = e
                dup = True
                break
        if not dup:
            kept.append(e)

    out = []
    for i, e in enumerate(kept):
        near = any(
            abs(kept[j].coord - e.coord) <= tol and kept[j].sign is not e.sign
            for j in range(max(0, i - 2), min(len(kept), i + 3))
            if j != i
        )
        out.append(GradingEntry(e.coord, e.sign, e.grade, e.origin, near))
    out.sort(key=lambda e: e.key)
    return GradingTable(tuple(out), float(K), max_grade, tol, tuple(saddles))


def division_distance(table: GradingTable, a: float, b: float) -> float:
    """K^-g for the lowest grade g strictly between a and b.

    Returns 0.0 when no entry lies between them; ``table.grade_between``
    distinguishes that case (resolution exhausted).
    """
    if a == b:
        raise InvalidArgumentError("division distance needs distinct points", point=a)
    table.check_point(a)
    table.check_point(b)
    g = table.grade_between(a, b)
    return 0.0 if g is None else table.K ** (-g)


def gap_function(table: GradingTable, n: int) -> float:
    if n > table.max_grade:
        raise InvalidArgumentError("grade beyond table depth", n=n, max_grade=table.max_grade)
    xs = sorted(e.coord for e in table.entries if e.grade <= n)
    if len(xs) < 2:
        raise InvalidArgumentError("gap undefined with fewer than two points", n=n, points=len(xs))
    return min(b - a for a, b in zip(xs, xs[1:]))


@dataclass(frozen=True)
class FatGapRow:
    n: int
    gap: float
    value: float
    running_min: float


def fat_gap_report(table: GradingTable, lam: float, n_max: int) -> list[FatGapRow]:
    """The sequence K^(lam n) * gap(n) for n = 1..n_max and its running minimum."""
    if lam < 0:
        raise InvalidArgumentError("lambda must be non-negative", lam=lam)
    rows = []
    low = math.inf
    for n in range(1, n_max + 1):
        g = gap_function(table, n)
        v = table.K ** (lam * n) * g
        low = min(low, v)
        rows.append(FatGapRow(n, g, v, low))
    return rows


def minimality_diagnostic(iet: IntervalExchange, p: LanePoint, n: int, epsilon: float) -> float:
    """Fraction of the base within epsilon of one of p, alpha p, ..., alpha^n p."""
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive", epsilon=epsilon)
    xs = sorted(q.coord for q in iet.orbit(p, n))
    covered = 0.0
    cur_lo = cur_hi = None
    for x in xs:
        lo, hi = max(iet.lo, x - epsilon), min(iet.hi, x + epsilon)
        if cur_hi is not None and lo <= cur_hi:
            cur_hi = max(cur_hi, hi)
            continue
        if cur_hi is not None:
            covered += cur_hi - cur_lo
        cur_lo, cur_hi = lo, hi
    if cur_hi is not None:
        covered += cur_hi - cur_lo
    return min(1.0, covered / iet.length)
