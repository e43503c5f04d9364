"""The slanted torus model.

The torus is a parallelogram of base 1 and height 1 whose top edge is shifted
sideways by m (to the left for the left lean, to the right for the right
lean). Bottom and top are glued by a translation and so are the two slanted
sides. The return interval Z is the horizontal segment at height 1/2,
identified with (-1, 0).

A local system is given by the gluing matrices: crossing the top edge upward
multiplies by B, crossing the slanted sides rightward multiplies by A^-1
(leftward by A), with

    A = [[mu, rho], [rho, nu]],  rho = sqrt(mu nu - 1),   B = diag(lam, 1/lam).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .cocycle import Cell, IntervalCocycle
from .errors import InvalidArgumentError, SaddleConnectionError
from .iet import GradingTable, IntervalExchange, Lane, LanePoint, Piece, build_grading
from .abelianize import DeviationLeg, Loop, TransportLeg
from .plane import Mat2

LEANS = ("left", "right")


@dataclass(frozen=True)
class TorusParams:
    m: float
    mu: float
    nu: float
    lam: float
    lean: str = "left"

    def __post_init__(self) -> None:
        for name in ("m", "mu", "nu", "lam"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0 < self.m < 1:
            raise InvalidArgumentError("slope parameter m must lie in (0, 1)", m=self.m)
        if not self.mu * self.nu > 1:
            raise InvalidArgumentError("need mu * nu > 1", mu=self.mu, nu=self.nu)
        if not 0 < abs(self.lam) < 1:
            raise InvalidArgumentError("need 0 < |lambda| < 1", lam=self.lam)
        if self.lean not in LEANS:
            raise InvalidArgumentError("lean must be 'left' or 'right'", lean=self.lean)

    @property
    def rho(self) -> float:
        return math.sqrt(self.mu * self.nu - 1.0)

    @property
    def A(self) -> Mat2:
        return Mat2(self.mu, self.rho, self.rho, self.nu)

    @property
    def A_inv(self) -> Mat2:
        return Mat2(self.nu, -self.rho, -self.rho, self.mu)

    @property
    def B(self) -> Mat2:
        return Mat2.diag(self.lam, 1.0 / self.lam)

    def to_dict(self) -> dict:
        return {"format": 1, "m": self.m, "mu": self.mu, "nu": self.nu, "lambda": self.lam, "lean": self.lean}

    @classmethod
    def from_dict(cls, d: dict) -> TorusParams:
        if not isinstance(d, dict) or d.get("format", 1) != 1:
            raise InvalidArgumentError("malformed or unsupported torus config")
        try:
            return cls(float(d["m"]), float(d["mu"]), float(d["nu"]), float(d["lambda"]), str(d.get("lean", "left")))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"malformed torus config: {exc}") from exc


@dataclass(frozen=True)
class TorusSystem:
    params: TorusParams
    iet: IntervalExchange
    cocycle: IntervalCocycle
    break_forward: float
    break_backward: float
    non_critical_vanishing: tuple[float, float]


def build(params: TorusParams) -> TorusSystem:
    m, A, Ai, B = params.m, params.A, params.A_inv, params.B
    if params.lean == "left":
        layout = [(-1.0, 1.0 - m, m, B), (-m, m / 2, m - 1.0, Ai @ B), (-m / 2, m / 2, m - 1.0, B @ Ai)]
        bf, bb, nc = -m / 2, -1.0 + m / 2, (-m, -1.0 + m)
    else:
        layout = [(-1.0, m / 2, 1.0 - m, B @ A), (-1.0 + m / 2, m / 2, 1.0 - m, A @ B), (-1.0 + m, 1.0 - m, -m, B)]
        bf, bb, nc = -1.0 + m / 2, -m / 2, (-1.0 + m, -m)
    iet = IntervalExchange((-1.0, 0.0), [Piece(l, n, t) for l, n, t, _ in layout], noncritical=nc)
    coc = IntervalCocycle(iet, [Cell(l, n, M) for l, n, _, M in layout])
    return TorusSystem(params, iet, coc, bf, bb, nc)


def rational_proximity(m: float, max_den: int = 10**6) -> tuple[Fraction, float]:
    """Closest fraction with denominator <= max_den and its distance from m."""
    f = Fraction(m).limit_denominator(max_den)
    return f, abs(m - float(f))


def flow_return(params: TorusParams, s: float) -> tuple[float, Mat2, list[str]]:
    """Flow the point s of Z upward through the parallelogram until it returns to Z.

    Returns the return coordinate, the product of gluing matrices met on the
    way and the list of edges crossed.
    """
    m, left = params.m, params.lean == "left"
    x = s + 1.0 - m / 2 if left else s + 1.0 + m / 2
    y, target = 0.5, 1.0
    M = Mat2.identity()
    crossed: list[str] = []
    while True:
        # the slanted side the upward ray can leave through
        ys = (1.0 - x) / m if left else x / m
        if y < ys < target:
            y = ys
            if left:
                x, M = x - 1.0, params.A_inv @ M
                crossed.append("right")
            else:
                x, M = x + 1.0, params.A @ M
                crossed.append("left")
            continue
        if target == 1.0:
            x, y, target = (x + m if left else x - m), 0.0, 0.5
            M = params.B @ M
            crossed.append("top")
            continue
        break
    return (x - 1.0 + m / 2 if left else x - 1.0 - m / 2), M, crossed


def saddle_connection_steps(sys: TorusSystem, limit: int = 200) -> int | None:
    """Steps j <= limit with alpha^j(c) falling into the forward break b, or None."""
    pts = sys.iet.orbit(LanePoint(sys.break_backward, Lane.MEDIAN), limit)
    return len(pts) - 1 if len(pts) <= limit else None


def grading(sys: TorusSystem, K: float = 2.0, max_grade: int = 40) -> GradingTable:
    j = saddle_connection_steps(sys, max_grade)
    if j is not None:
        raise SaddleConnectionError(
            "a break orbit returns to a break within the requested grade",
            steps=j,
            max_grade=max_grade,
            m=sys.params.m,
        )
    return build_grading(sys.iet, K, max_grade)


def safe_grade(sys: TorusSystem, grade: int) -> int:
    """Largest grade <= grade that passes the saddle-connection guard."""
    j = saddle_connection_steps(sys, grade)
    return grade if j is None else j - 1


def loops(sys: TorusSystem, base: float = -0.5) -> tuple[Loop, Loop]:
    lo, hi = sys.iet.lo, sys.iet.hi
    horizontal = Loop(
        "horizontal",
        base,
        (DeviationLeg(base, lo), TransportLeg(lo, hi, sys.params.A), DeviationLeg(hi, base)),
    )
    step = sys.cocycle.step(LanePoint(base))
    if step is None:
        raise InvalidArgumentError("base point lies on a break", base=base)
    M, q = step
    vertical = Loop("vertical", base, (TransportLeg(base, q.coord, M), DeviationLeg(q.coord, base)))
    return horizontal, vertical


def _lower(x: float) -> Mat2:
    return Mat2(1.0, 0.0, x, 1.0)


def _upper(x: float) -> Mat2:
    return Mat2(1.0, x, 0.0, 1.0)


@dataclass(frozen=True)
class PredictedLimits:
    A_ab: Mat2
    B_ab: Mat2
    a_plus: float
    b_plus: float
    s_b: Mat2  # jump at the forward break
    s_c: Mat2  # jump at the backward break
    deviation_half_from_right_end: Mat2  # sigma_{-1/2, 0}
    deviation_left_end_from_half: Mat2  # sigma_{-1, -1/2}

    def pushed_s_b(self, n: int, lam: float) -> Mat2:
        """Limit of the jump at alpha^-n(b): B^-n s_b B^n."""
        return _lower(self.s_b.c * lam ** (2 * n))

    def jump_limits(self) -> list[tuple[str, Mat2]]:
        return [("s_b", self.s_b), ("s_c", self.s_c)]


def predicted_limits(params: TorusParams) -> PredictedLimits:
    """Closed-form m -> 0 limits. The right lean follows from the left one by the mirror map."""
    mu, nu, lam, rho = params.mu, params.nu, params.lam, params.rho
    r = rho / mu if params.lean == "left" else rho / nu
    shear = (lam * lam - 1.0) * r
    B = params.B
    if params.lean == "left":
        return PredictedLimits(
            Mat2.diag(mu, 1.0 / mu), B, mu, lam, _lower(shear), _upper(shear), _lower(-r), _upper(-r)
        )
    return PredictedLimits(
        Mat2.diag(1.0 / nu, nu), B, 1.0 / nu, lam, _lower(shear), _upper(shear), _upper(-r), _lower(-r)
    )


def mirror_params(params: TorusParams) -> TorusParams:
    """Parameters of the opposite lean whose system is the mirror image of this one.

    The mirror sends s to -1 - s and conjugates every matrix by diag(1, -1).
    """
    other = "right" if params.lean == "left" else "left"
    return TorusParams(params.m, params.nu, params.mu, params.lam, other)
