"""Linear algebra of the oriented Euclidean plane.

Vectors and 2x2 matrices are small immutable value types backed by plain
floats. The operator norm and singular directions use the closed-form 2x2
SVD, so nothing here is iterative.

Lines are compared with the sine metric: the distance between two lines is
the sine of the angle between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateError, InvalidArgumentError

DET_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def __neg__(self) -> Vec2:
        return Vec2(-self.x, -self.y)

    def __mul__(self, k: float) -> Vec2:
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def dot(self, other: Vec2) -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def normalized(self) -> Vec2:
        n = self.norm()
        if n == 0.0 or not math.isfinite(n):
            raise InvalidArgumentError("cannot normalize a zero or non-finite vector", norm=n)
        return Vec2(self.x / n, self.y / n)

    def perp(self) -> Vec2:
        """Quarter turn counterclockwise, so volume_form(v, v.perp()) = |v|^2."""
        return Vec2(-self.y, self.x)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class Mat2:
    """Row-major 2x2 matrix [[a, b], [c, d]]."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls) -> Mat2:
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def diag(cls, p: float, q: float) -> Mat2:
        return cls(p, 0.0, 0.0, q)

    @classmethod
    def from_rows(cls, rows) -> Mat2:
        (a, b), (c, d) = rows
        return cls(float(a), float(b), float(c), float(d))

    @classmethod
    def from_columns(cls, u: Vec2, v: Vec2) -> Mat2:
        return cls(u.x, v.x, u.y, v.y)

    def rows(self) -> list[list[float]]:
        return [[self.a, self.b], [self.c, self.d]]

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def trace(self) -> float:
        return self.a + self.d

    def transpose(self) -> Mat2:
        return Mat2(self.a, self.c, self.b, self.d)

    def inv(self) -> Mat2:
        det = self.det()
        if det == 0.0 or not math.isfinite(det):
            raise DegenerateError("singular matrix", det=det)
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def __matmul__(self, other):
        if isinstance(other, Mat2):
            return Mat2(
                self.a * other.a + self.b * other.c,
                self.a * other.b + self.b * other.d,
                self.c * other.a + self.d * other.c,
                self.c * other.b + self.d * other.d,
            )
        if isinstance(other, Vec2):
            return Vec2(self.a * other.x + self.b * other.y, self.c * other.x + self.d * other.y)
        return NotImplemented

    def __add__(self, other: Mat2) -> Mat2:
        return Mat2(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)

    def __sub__(self, other: Mat2) -> Mat2:
        return Mat2(self.a - other.a, self.b - other.b, self.c - other.c, self.d - other.d)

    def __neg__(self) -> Mat2:
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def __mul__(self, k: float) -> Mat2:
        return Mat2(self.a * k, self.b * k, self.c * k, self.d * k)

    __rmul__ = __mul__

    def _svd_parts(self) -> tuple[float, float, float]:
        e = 0.5 * (self.a + self.d)
        f = 0.5 * (self.a - self.d)
        g = 0.5 * (self.c + self.b)
        h = 0.5 * (self.c - self.b)
        q = math.hypot(e, h)
        r = math.hypot(f, g)
        theta = 0.5 * (math.atan2(h, e) - math.atan2(g, f))
        return q, r, theta

    def op_norm(self) -> float:
        q, r, _ = self._svd_parts()
        return q + r

    def singular_values(self) -> tuple[float, float]:
        q, r, _ = self._svd_parts()
        smax = q + r
        smin = abs(self.det()) / smax if smax > 0.0 else 0.0
        return smax, smin

    def right_singular_vectors(self) -> tuple[Vec2, Vec2]:
        """Unit vectors (most expanded, most contracted)."""
        _, _, theta = self._svd_parts()
        ct, st = math.cos(theta), math.sin(theta)
        return Vec2(ct, -st), Vec2(st, ct)

    def deviation_norm(self) -> float:
        """Operator norm of self - 1."""
        return Mat2(self.a - 1.0, self.b, self.c, self.d - 1.0).op_norm()

    def max_abs(self) -> float:
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def is_finite(self) -> bool:
        return all(math.isfinite(t) for t in (self.a, self.b, self.c, self.d))

    def is_special(self, tol: float = DET_TOL) -> bool:
        return abs(self.det() - 1.0) <= tol

    def conjugate(self, q: Mat2) -> Mat2:
        """q @ self @ q^-1."""
        return q @ self @ q.inv()

    def allclose(self, other: Mat2, tol: float) -> bool:
        return (self - other).max_abs() <= tol


@dataclass(frozen=True, slots=True)
class ProjLine:
    """A line through the origin, stored as a canonical unit representative."""

    representative: Vec2

    @classmethod
    def through(cls, v: Vec2) -> ProjLine:
        u = v.normalized()
        if u.x < 0.0 or (u.x == 0.0 and u.y < 0.0):
            u = -u
        return cls(u)

    def distance(self, other: ProjLine) -> float:
        return sine_distance(self.representative, other.representative)

    def as_tuple(self) -> tuple[float, float]:
        return self.representative.as_tuple()


def volume_form(u: Vec2, v: Vec2) -> float:
    return u.x * v.y - u.y * v.x


def sine_distance(u: Vec2, v: Vec2) -> float:
    nu, nv = u.norm(), v.norm()
    if nu == 0.0 or nv == 0.0:
        raise InvalidArgumentError("sine distance of a zero vector", norm_u=nu, norm_v=nv)
    return min(1.0, abs(volume_form(u, v)) / (nu * nv))


def solve_shear(v: Vec2, u: Vec2, u_prime: Vec2, tol: float = 1e-14) -> Mat2:
    """Unit-determinant shear fixing v and carrying the line of u to the line of u_prime.

    The representatives of u and u_prime are rescaled so that both span unit
    volume with v; the shear is then [v | u'] [v | u]^-1.
    """
    dvu = volume_form(v, u)
    dvu2 = volume_form(v, u_prime)
    nv = v.norm()
    if abs(dvu) <= tol * nv * u.norm() or abs(dvu2) <= tol * nv * u_prime.norm():
        raise DegenerateError("fixed line is collinear with a moving line", volume_u=dvu, volume_u_prime=dvu2)
    u = u * (1.0 / dvu)
    u_prime = u_prime * (1.0 / dvu2)
    # [v|u]^-1 has unit determinant after the rescaling
    src_inv = Mat2(u.y, -u.x, -v.y, v.x)
    return Mat2.from_columns(v, u_prime) @ src_inv
