"""Acceptance criteria, one test (or small group of tests) per criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
``criterion N: PASS/FAIL`` line per criterion with the measured quantities.
"""

import math

import numpy as np
import pytest

from abelianizer.abelianize import splitting_report
from abelianizer.cocycle import (
    Direction,
    IntervalCocycle,
    lyapunov_estimate,
    sample_points,
    stable_line,
    transport,
)
from abelianizer.errors import InvalidArgumentError
from abelianizer.iet import LanePoint, division_distance, rotation
from abelianizer.pipeline import analyze_torus, prepare, random_samples
from abelianizer.plane import Mat2, Vec2, sine_distance, volume_form
from abelianizer.products import OrderedFactor, product_in_order, product_inverse
from abelianizer.slithering import jump_decay_series
from abelianizer.torus import TorusParams, build, flow_return, safe_grade

M_SWEEP = (0.1, 0.05, 0.02, 0.01)
GRADE = 40


def acceptance_params(m=0.02, lean="left"):
    return TorusParams(m, 2.0, 1.0, 0.5, lean)


def monotone_with_slack(errors, slack=0.1):
    return all(b <= (1 + slack) * a for a, b in zip(errors, errors[1:]))


@pytest.fixture(scope="module")
def sweep():
    """Full analyses across the m sweep. Rational m with an early saddle connection is run at the deepest safe grade."""
    out = {}
    for m in M_SWEEP:
        p = acceptance_params(m)
        g = safe_grade(build(p), GRADE)
        out[m] = analyze_torus(p, grade=g)
    return out


@pytest.fixture(scope="module")
def system():
    return prepare(acceptance_params(), GRADE)


# 1 -------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_spectral_limit(sweep, record_property):
    errs = [abs(sweep[m].spectral_coordinates.a_plus - 2.0) for m in M_SWEEP]
    grades = [sweep[m].grade for m in M_SWEEP]
    secs = max(sweep[m].seconds for m in M_SWEEP)
    record_property("detail", f"|a+ - 2| over m={M_SWEEP}: {['%.2g' % e for e in errs]} at grades {grades}")
    record_property("detail", f"max runtime {secs:.2f}s")
    assert errs[M_SWEEP.index(0.02)] <= 0.1
    assert sweep[0.02].grade == GRADE and sweep[0.01].grade == GRADE
    assert monotone_with_slack(errs)
    assert secs <= 60.0


# 2 -------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_vertical_loop_inert(sweep, record_property):
    errs = [sweep[m].deltas["B_ab_max_entry"] for m in M_SWEEP]
    record_property("detail", f"max |B_ab - B| over m sweep: {['%.2g' % e for e in errs]}")
    assert errs[M_SWEEP.index(0.02)] <= 0.05
    assert monotone_with_slack(errs)


# 3 -------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_jump_decay_rate(system, record_property):
    sys, field = system
    series = jump_decay_series(sys.cocycle, field.table, 25, field, fit_range=(10, 25))
    pts = sample_points(sys.iet, 32, [e.coord for e in field.table.entries])
    lam = lyapunov_estimate(sys.cocycle, pts, 4096).lambda_hat
    lam2 = lyapunov_estimate(sys.cocycle, pts, 8192).lambda_hat
    record_property("detail", f"slope {series.slope:.4f} vs -2*lambda_hat {-2 * lam:.4f}; lambda_hat {lam:.4f} (n doubled: {lam2:.4f})")
    assert abs(series.slope - (-2 * lam)) <= 0.2 * 2 * lam
    assert abs(lam - math.log(2)) <= 0.2 * math.log(2)
    assert abs(lam2 - lam) <= 0.05 * lam


# 4 -------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_deviation_lipschitz(system, record_property):
    _, field = system
    table = field.table
    rng = np.random.default_rng(4)
    ratios, violations, unresolved = [], 0, 0
    while len(ratios) < 200:
        y = float(rng.uniform(-1, 0))
        x = y + float(rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(-4, 0))
        if not -1 < x < 0:
            continue
        try:
            table.check_point(y)
            table.check_point(x)
        except InvalidArgumentError:
            continue
        d = division_distance(table, y, x)
        if d == 0.0:
            unresolved += 1  # no table point between them at this grade
            continue
        r = field.deviation(y, x)
        norm = (r.value - Mat2.identity()).op_norm()
        c = r.norm_sum
        if norm > c * math.exp(c) + 1e-9:
            violations += 1
        ratios.append(norm / d)
    hi, lo = max(ratios), min(ratios)
    record_property("detail", f"ratio max {hi:.6g} min {lo:.3g}; bound violations {violations}; skipped unresolved {unresolved}")
    assert math.isfinite(hi) and lo > 0 and math.isfinite(hi / lo)
    assert violations == 0


# 5 -------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_splitting(system, record_property):
    sys, field = system
    pts = random_samples(field.table, sys.iet.lo, sys.iet.hi, 16, 0)
    rep = splitting_report(field, pts, -0.5)
    record_property("detail", f"grade 40: F+ {rep.max_plus:.2g} F- {rep.max_minus:.2g}; grade 20: {rep.worst_half:.2g}")
    assert rep.grade == 40 and rep.half_grade == 20 and rep.samples == 16
    assert rep.max_plus <= 1e-3 and rep.max_minus <= 1e-3
    assert rep.max_plus < rep.max_plus_half and rep.max_minus < rep.max_minus_half


# 6 -------------------------------------------------------------------------


def random_near_identity(rng, r):
    e = rng.normal(size=(2, 2))
    e *= r / np.linalg.norm(e, 2)
    return Mat2.from_rows(np.eye(2) + e)


@pytest.mark.criterion(6)
def test_ordered_product_suite(record_property):
    rng = np.random.default_rng(6)
    bound_bad = comp_bad = inv_bad = 0
    worst_comp = worst_inv = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 61))
        c, p = rng.uniform(0.05, 2.0), rng.uniform(1.5, 3.0)
        mats = [random_near_identity(rng, c * rng.uniform(0, 1) / (k + 1) ** p) for k in range(n)]
        fs = [OrderedFactor.of(k, m) for k, m in enumerate(mats)]
        full = product_in_order(fs)
        if full.value.op_norm() > math.exp(full.norm_sum) + 1e-9:
            bound_bad += 1
        cut = int(rng.integers(0, n + 1))
        split = product_in_order(fs[:cut]).value @ product_in_order(fs[cut:]).value
        scale = full.value.max_abs()
        rel = (split - full.value).max_abs() / scale
        worst_comp = max(worst_comp, rel)
        comp_bad += rel > 1e-9
        oracle = np.linalg.inv(np.array(full.value.rows()))
        inv = np.array(product_inverse(fs).rows())
        rel = np.abs(inv - oracle).max() / np.abs(oracle).max()
        worst_inv = max(worst_inv, rel)
        inv_bad += rel > 1e-9
    record_property("detail", f"violations bound/composition/inversion {bound_bad}/{comp_bad}/{inv_bad}; worst rel {worst_comp:.1g}, {worst_inv:.1g}")
    assert bound_bad == comp_bad == inv_bad == 0


# 7 -------------------------------------------------------------------------

TRIALS = 100_000


def vec(rng):
    return Vec2(*rng.normal(size=2))


def special(rng):
    m = rng.normal(size=(2, 2))
    if np.linalg.det(m) < 0:
        m[:, 0] *= -1
    return Mat2.from_rows(m / math.sqrt(np.linalg.det(m)))


@pytest.mark.criterion(7)
def test_law_of_sines(record_property):
    rng = np.random.default_rng(71)
    worst = 0.0
    for _ in range(TRIALS):
        u, v = vec(rng), vec(rng)
        w = u + v
        if w.norm() == 0:
            continue
        worst = max(worst, abs(u.norm() * sine_distance(u, w) - v.norm() * sine_distance(v, w)))
    record_property("detail", f"law of sines worst {worst:.1g}")
    assert worst <= 1e-10


@pytest.mark.criterion(7)
def test_motion_bound(record_property):
    rng = np.random.default_rng(72)
    worst = -math.inf
    for _ in range(TRIALS):
        t = Mat2(*rng.normal(size=4))
        u = vec(rng)
        tu = t @ u
        if tu.norm() == 0:
            continue
        worst = max(worst, sine_distance(u, tu) - (t - Mat2.identity()).op_norm())
    record_property("detail", f"motion bound worst slack {worst:.2g}")
    assert worst <= 1e-12


@pytest.mark.criterion(7)
def test_expansion_bound(record_property):
    rng = np.random.default_rng(73)
    worst = -math.inf
    for _ in range(TRIALS):
        t = special(rng)
        u, v = vec(rng), vec(rng)
        worst = max(worst, sine_distance(t @ u, t @ v) - t.inv().op_norm() ** 2 * sine_distance(u, v))
    record_property("detail", f"expansion bound worst slack {worst:.2g}")
    assert worst <= 1e-12


@pytest.mark.criterion(7)
def test_area_identity(record_property):
    rng = np.random.default_rng(74)
    worst = 0.0
    for _ in range(TRIALS):
        u, v = vec(rng), vec(rng)
        worst = max(worst, abs(abs(volume_form(u, v)) - u.norm() * v.norm() * sine_distance(u, v)))
    record_property("detail", f"area identity worst {worst:.1g}")
    assert worst <= 1e-12


# 8 -------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_constant_cocycle_oracle(record_property):
    cat = Mat2(2, 1, 1, 1)
    coc = IntervalCocycle.constant(rotation((math.sqrt(5) - 1) / 2), cat)
    est = lyapunov_estimate(coc, sample_points(coc.iet, 32), 4096)
    exact = math.log((3 + math.sqrt(5)) / 2)
    w, vecs = np.linalg.eigh(np.array(cat.rows()))
    contracting = Vec2(*vecs[:, int(np.argmin(w))])
    worst = max(
        sine_distance(stable_line(coc, p, Direction.FORWARD, 64).vector, contracting)
        for p in sample_points(coc.iet, 8)
    )
    record_property("detail", f"lambda_hat rel err {abs(est.lambda_hat - exact) / exact:.2g}; eigenvector sine {worst:.1g}")
    assert abs(est.lambda_hat - exact) <= 0.01 * exact
    assert worst <= 1e-8


# 9 -------------------------------------------------------------------------


@pytest.mark.criterion(9)
@pytest.mark.parametrize("lean", ["left", "right"])
def test_torus_construction_oracle(lean, record_property):
    p = acceptance_params(lean=lean)
    sys = build(p)
    A, Ai, B = p.A, p.A_inv, p.B
    expected = [B, Ai @ B, B @ Ai] if lean == "left" else [B @ A, A @ B, B]
    rng = np.random.default_rng(9)
    worst, mismatched = 0.0, 0
    for _ in range(100):
        x = float(rng.uniform(-1, 0))
        q = sys.iet.apply(LanePoint(x))
        y, oracle, _ = flow_return(p, x)
        worst = max(worst, abs(q.coord - y))
        t = transport(sys.cocycle, LanePoint(x), 1)
        mismatched += not (t == oracle == expected[sys.iet.piece_index(LanePoint(x))])
    record_property("detail", f"{lean}: worst coordinate error {worst:.1g}, matrix mismatches {mismatched}")
    assert worst <= 1e-10 and mismatched == 0


# 10 ------------------------------------------------------------------------


def multiscale_point(rng, near):
    return near + float(rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(-4, 0))


@pytest.mark.criterion(10)
def test_division_metric_ultrametric(system, record_property):
    _, field = system
    table = field.table

    def ok(x):
        try:
            table.check_point(x)
        except InvalidArgumentError:
            return False
        return -1 < x < 0

    rng = np.random.default_rng(10)
    violations = checked = 0
    while checked < 1000:
        a = float(rng.uniform(-1, 0))
        b = multiscale_point(rng, a)
        c = multiscale_point(rng, b)
        if not (ok(a) and ok(b) and ok(c)) or len({a, b, c}) < 3:
            continue
        dab, dbc, dac = division_distance(table, a, b), division_distance(table, b, c), division_distance(table, a, c)
        violations += dab != division_distance(table, b, a)
        violations += dac > max(dab, dbc)
        violations += dab > max(dac, dbc)
        violations += dbc > max(dab, dac)
        checked += 1
    record_property("detail", f"ultrametric: {checked} triples, {violations} violations")
    assert violations == 0


@pytest.mark.criterion(10)
def test_division_metric_lipschitz(system, record_property):
    sys, field = system
    table, iet, K = field.table, sys.iet, field.table.K
    rng = np.random.default_rng(11)
    violations = checked = 0
    while checked < 1000:
        a = float(rng.uniform(-1, 0))
        b = multiscale_point(rng, a)
        if not -1 < b < 0:
            continue
        pa, pb = LanePoint(a), LanePoint(b)
        if iet.piece_index(pa) != iet.piece_index(pb):
            continue
        try:
            d = division_distance(table, a, b)
            d_img = division_distance(table, iet.apply(pa).coord, iet.apply(pb).coord)
        except InvalidArgumentError:
            continue
        if d == 0.0:
            continue  # below the resolution of the truncated table
        violations += d_img > K * d
        checked += 1
    record_property("detail", f"Lipschitz: {checked} pairs, {violations} violations")
    assert violations == 0
