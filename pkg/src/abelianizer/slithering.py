"""Slithering jumps and deviations.

At a forward-critical point w the jump s_w is the unit-determinant shear that
fixes the backward-stable line E-_w and carries the forward-stable line of the
right lane onto that of the left lane. Backward-critical points are handled
the same way with the roles of E+ and E- exchanged.

Jumps are computed from stable lines only at grade-0 points. Deeper jumps are
conjugates of those by parallel transport along the orbit. The conjugation
is carried out in factored form: a shear is I + k v (x) D(v, .) with v its
fixed line, so transporting it by T gives I + k |Tv|^2 w (x) D(w, .) where w
is the direction of Tv. When T contracts v the direction w is taken from
the (well-conditioned) contracted singular vector of a longer transport
instead of from T v itself, which keeps deep jumps accurate to relative
precision even though their norms fall far below machine epsilon.

The deviation between y and x is the ordered product of jumps strictly
between them, in increasing coordinate order, and its inverse when y > x.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cocycle import Direction, IntervalCocycle, stable_line, walk
from .errors import (
    DegenerateError,
    InvalidArgumentError,
    NoCertificateError,
    OrbitTerminatedError,
    UncertifiedJumpError,
)
from .iet import Criticality, GradingEntry, GradingTable, Lane, LanePoint
from .plane import Mat2, Vec2, solve_shear
from .products import OrderedFactor, estimate_tail, product_in_order, product_inverse

LINE_TOL = 1e-7
LINE_STEPS = 32
CONTINUATION = 48


@dataclass(frozen=True)
class Jump:
    coord: float
    sign: Criticality
    grade: int
    origin: float
    matrix: Mat2
    off_diag_norm: float
    fixed_line: Vec2  # unit vector spanning the line the shear fixes
    residual: float = 0.0  # worst stable-line residual behind the grade-0 jump
    lane_continued: bool = False  # shared line followed the left lane past a saddle connection

    @property
    def key(self) -> tuple[float, int]:
        return (self.coord, 0 if self.sign is Criticality.FORWARD else 1)


def _shear(kappa: float, w: Vec2) -> Mat2:
    # I + kappa * w (x) D(w, .)
    return Mat2(1.0 - kappa * w.x * w.y, kappa * w.x * w.x, -kappa * w.y * w.y, 1.0 + kappa * w.x * w.y)


def _kappa(matrix: Mat2, v: Vec2) -> float:
    n = matrix - Mat2.identity()
    return (n @ v.perp()).dot(v)


def _line(coc, p: LanePoint, direction: Direction, n: int, line_tol: float, what: str):
    try:
        r = stable_line(coc, p, direction, n)
    except DegenerateError as exc:
        raise UncertifiedJumpError(f"degenerate stable line ({what})", coord=p.coord, **exc.quantity) from exc
    if r.residual > line_tol:
        raise UncertifiedJumpError(
            f"stable line residual too large ({what})", coord=p.coord, residual=r.residual, line_tol=line_tol
        )
    return r


def jump_at(
    coc: IntervalCocycle,
    entry: GradingEntry,
    n: int = LINE_STEPS,
    line_tol: float = LINE_TOL,
) -> Jump:
    w = entry.coord
    if entry.sign is Criticality.FORWARD:
        shared_dir, moving_dir = Direction.BACKWARD, Direction.FORWARD
    else:
        shared_dir, moving_dir = Direction.FORWARD, Direction.BACKWARD
    continued = False
    try:
        shared = _line(coc, LanePoint(w, Lane.MEDIAN), shared_dir, n, line_tol, "shared")
    except OrbitTerminatedError:
        # saddle connection: the shared line is only defined up to the lane we continue on
        shared = _line(coc, LanePoint(w, Lane.LEFT), shared_dir, n, line_tol, "shared")
        continued = True
    right = _line(coc, LanePoint(w, Lane.RIGHT), moving_dir, n, line_tol, "right lane")
    left = _line(coc, LanePoint(w, Lane.LEFT), moving_dir, n, line_tol, "left lane")
    v = shared.vector
    try:
        m = solve_shear(v, right.vector, left.vector)
    except DegenerateError as exc:
        raise UncertifiedJumpError("stable lines do not form a basis", coord=w, **exc.quantity) from exc
    # rebuild from the factored form so the result is an exact shear along v
    m = _shear(_kappa(m, v), v)
    res = max(shared.residual, right.residual, left.residual)
    return Jump(w, entry.sign, entry.grade, entry.origin, m, m.deviation_norm(), v, res, continued)


def _contracts(sign: Criticality, d: int) -> bool:
    return (sign is Criticality.FORWARD and d < 0) or (sign is Criticality.BACKWARD and d > 0)


def push_series(coc: IntervalCocycle, base: Jump, steps: int, extra: int = CONTINUATION) -> list[Jump]:
    """[base, pushed by 1, ..., pushed by steps] along the contracting direction of its fixed line."""
    d = -1 if base.sign is Criticality.FORWARD else 1
    return _push(coc, base, d * steps, extra)


def _push(coc: IntervalCocycle, base: Jump, n: int, extra: int) -> list[Jump]:
    if n == 0:
        return [base]
    d = 1 if n > 0 else -1
    steps = abs(n)
    # the median orbit must survive the push itself
    list(walk(coc, LanePoint(base.coord, Lane.MEDIAN), n))
    contracting = _contracts(base.sign, d)
    total = steps + (extra if contracting else 0)
    mats: list[Mat2] = []
    pts = [LanePoint(base.coord, Lane.LEFT)]
    for m, q in walk(coc, pts[0], d * total):
        mats.append(m)
        pts.append(q)

    if contracting:
        dirs: list[Vec2] = [Vec2(0.0, 0.0)] * (steps + 1)
        q = Mat2.identity()
        for k in range(total - 1, -1, -1):
            q = q @ mats[k]
            q = q * (1.0 / q.op_norm())
            if k <= steps:
                dirs[k] = q.right_singular_vectors()[1]
        if total == steps:
            dirs[steps] = (mats[-1] @ dirs[steps - 1]).normalized()
    else:
        dirs = [base.fixed_line]
        for k in range(steps):
            dirs.append((mats[k] @ dirs[k]).normalized())

    kappa = _kappa(base.matrix, base.fixed_line)
    out = [base]
    log_len = 0.0
    for k in range(steps):
        log_len += math.log((mats[k] @ dirs[k]).norm())
        w = dirs[k + 1]
        m = _shear(kappa * math.exp(2.0 * log_len), w)
        g = base.grade + k + 1 if contracting else max(base.grade - k - 1, 0)
        out.append(replace(base, coord=pts[k + 1].coord, grade=g, matrix=m, off_diag_norm=m.deviation_norm(), fixed_line=w))
    return out


def pushed_jump(coc: IntervalCocycle, base: Jump, n: int, extra: int = CONTINUATION) -> Jump:
    """The jump transported n steps along the orbit: T base T^-1 with T = transport(w, n)."""
    return _push(coc, base, n, extra)[-1]


@dataclass(frozen=True)
class DecaySeries:
    rows: tuple[tuple[int, float], ...]  # (grade, max jump deviation norm)
    slope: float | None
    intercept: float | None
    fit_range: tuple[int, int]

    @property
    def all_zero(self) -> bool:
        return all(v == 0.0 for _, v in self.rows)


def fit_decay(rows: Sequence[tuple[int, float]], fit_range: tuple[int, int]) -> DecaySeries:
    lo, hi = fit_range
    pts = [(n, v) for n, v in rows if lo <= n <= hi and v > 0.0]
    if len(pts) < 2:
        return DecaySeries(tuple(rows), None, None, fit_range)
    slope, intercept = np.polyfit([n for n, _ in pts], [math.log(v) for _, v in pts], 1)
    return DecaySeries(tuple(rows), float(slope), float(intercept), fit_range)


@dataclass(frozen=True)
class DeviationResult:
    value: Mat2
    tail_bound: float
    truncation_grade: int
    norm_sum: float
    factors_used: int = 0


class JumpField:
    """All jumps of a grading table, plus the decay fit used for tail bounds."""

    def __init__(
        self,
        coc: IntervalCocycle,
        table: GradingTable,
        jumps: Sequence[Jump],
        decay: DecaySeries,
        truncation_grade: int | None = None,
    ) -> None:
        self.coc = coc
        self.table = table
        self.jumps = tuple(sorted(jumps, key=lambda j: j.key))
        self.decay = decay
        self.truncation_grade = table.max_grade if truncation_grade is None else truncation_grade
        self._coords = [j.coord for j in self.jumps]
        self.per_grade = sum(1 for e in table.entries if e.grade == 0)

    @classmethod
    def build(
        cls,
        coc: IntervalCocycle,
        table: GradingTable,
        n: int = LINE_STEPS,
        line_tol: float = LINE_TOL,
        fit_range: tuple[int, int] | None = None,
    ) -> JumpField:
        wanted = {(e.origin, e.sign, e.grade): e for e in table.entries}
        jumps = []
        for e in table.entries:
            if e.grade != 0:
                continue
            series = push_series(coc, jump_at(coc, e, n, line_tol), _depth(table, e))
            for j in series:
                hit = wanted.get((e.origin, e.sign, j.grade))
                if hit is not None:
                    jumps.append(replace(j, coord=hit.coord))
        rows = [(g, 0.0) for g in range(table.max_grade + 1)]
        for j in jumps:
            if j.off_diag_norm > rows[j.grade][1]:
                rows[j.grade] = (j.grade, j.off_diag_norm)
        G = table.max_grade
        decay = fit_decay(rows, fit_range or (G // 2 if G > 1 else 0, G))
        return cls(coc, table, jumps, decay)

    def truncated(self, grade: int) -> JumpField:
        if grade > self.table.max_grade:
            raise InvalidArgumentError("truncation beyond table depth", grade=grade, max_grade=self.table.max_grade)
        keep = [j for j in self.jumps if j.grade <= grade]
        return JumpField(self.coc, self.table.truncated(grade), keep, self.decay, grade)

    def omitted_norm_sum(self) -> float:
        """Bound on the summed deviation norms of all jumps above the truncation grade."""
        if self.decay.all_zero:
            return 0.0
        s = self.decay.slope
        if s is None or s >= 0:
            raise NoCertificateError("jump norms are not decaying", slope=s, fit_range=self.decay.fit_range)
        lo, hi = self.decay.fit_range
        env = max(v * math.exp(-s * n) for n, v in self.decay.rows if lo <= n <= hi)
        g = self.truncation_grade
        return self.per_grade * 2.0 * env * math.exp(s * (g + 1)) / (1.0 - math.exp(s))

    def deviation(self, y: float, x: float) -> DeviationResult:
        if y == x:
            return DeviationResult(Mat2.identity(), 0.0, self.truncation_grade, 0.0)
        self.table.check_point(y)
        self.table.check_point(x)
        lo, hi = (y, x) if y < x else (x, y)
        inside = self.jumps[bisect_right(self._coords, lo) : bisect_left(self._coords, hi)]
        factors = [OrderedFactor(j.key, j.matrix, j.off_diag_norm) for j in inside]
        res = product_in_order(factors)
        value = res.value if y < x else product_inverse(factors)
        tail = estimate_tail(self.omitted_norm_sum(), res.norm_sum)
        return DeviationResult(value, tail, self.truncation_grade, res.norm_sum, res.factors_used)


def _depth(table: GradingTable, e: GradingEntry) -> int:
    return max((t.grade for t in table.entries if t.origin == e.origin and t.sign is e.sign), default=0)


def jump_decay_series(
    coc: IntervalCocycle,
    table: GradingTable,
    n_max: int | None = None,
    field: JumpField | None = None,
    fit_range: tuple[int, int] | None = None,
) -> DecaySeries:
    field = field or JumpField.build(coc, table)
    n_max = table.max_grade if n_max is None else min(n_max, table.max_grade)
    rows = field.decay.rows[: n_max + 1]
    return fit_decay(rows, fit_range or (n_max // 2, n_max))


def deviation(
    coc: IntervalCocycle,
    table: GradingTable,
    y: float,
    x: float,
    field: JumpField | None = None,
) -> DeviationResult:
    field = field or JumpField.build(coc, table)
    return field.deviation(y, x)
