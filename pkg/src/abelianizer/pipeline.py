"""End-to-end abelianization of a torus system."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .abelianize import (
    AbelianizedHolonomy,
    DeviationLeg,
    SpectralCoordinates,
    SplittingReport,
    abelianized_holonomy,
    splitting_report,
    spectral_coordinates,
    stable_basis,
)
from .cocycle import LyapunovEstimate, lyapunov_estimate, sample_points
from .iet import GradingTable, LanePoint
from .slithering import DecaySeries, DeviationResult, JumpField
from .torus import (
    PredictedLimits,
    TorusParams,
    TorusSystem,
    build,
    grading,
    loops,
    predicted_limits,
    rational_proximity,
    saddle_connection_steps,
)

FIT_DEPTH = 16  # table depth used for the decay fit when the requested grade is shallower


def random_samples(table: GradingTable, lo: float, hi: float, count: int, seed: int) -> list[LanePoint]:
    """Seeded uniform plain points, redrawn when they land on a table coordinate."""
    rng = np.random.default_rng(seed)
    out: list[LanePoint] = []
    margin = 1e-9 * (hi - lo)
    while len(out) < count:
        x = float(rng.uniform(lo + margin, hi - margin))
        try:
            table.check_point(x)
        except ValueError:
            continue
        out.append(LanePoint(x))
    return out


@dataclass(frozen=True)
class LegDeviation:
    loop: str
    start: float
    end: float
    result: DeviationResult


@dataclass(frozen=True)
class TorusAnalysis:
    params: TorusParams
    grade: int
    K: float
    seed: int
    saddle_connection_steps: int | None
    nearest_fraction: str
    lyapunov: LyapunovEstimate
    decay: DecaySeries
    deviations: tuple[LegDeviation, ...]
    horizontal: AbelianizedHolonomy
    vertical: AbelianizedHolonomy
    splitting: SplittingReport
    spectral_coordinates: SpectralCoordinates
    predicted: PredictedLimits
    deltas: dict
    seconds: float


def prepare(params: TorusParams, grade: int, K: float = 2.0) -> tuple[TorusSystem, JumpField]:
    """Build the system and its jump field truncated at ``grade``.

    The table is built at least FIT_DEPTH deep (when the saddle guard allows)
    so that the decay fit behind the tail bounds has data even for small grades.
    """
    sys = build(params)
    j = saddle_connection_steps(sys, max(grade, FIT_DEPTH))
    depth = max(grade, FIT_DEPTH if j is None else min(FIT_DEPTH, j - 1))
    table = grading(sys, K, depth)
    field = JumpField.build(sys.cocycle, table)
    return sys, field.truncated(grade)


def analyze_torus(
    params: TorusParams,
    grade: int = 40,
    K: float = 2.0,
    samples: int = 16,
    seed: int = 0,
    lyapunov_n: int = 4096,
    lyapunov_samples: int = 32,
    base: float = -0.5,
) -> TorusAnalysis:
    t0 = time.perf_counter()
    sys, field = prepare(params, grade, K)
    lyap = lyapunov_estimate(
        sys.cocycle, sample_points(sys.iet, lyapunov_samples, [e.coord for e in field.table.entries]), lyapunov_n
    )
    horizontal_loop, vertical_loop = loops(sys, base)
    devs = tuple(
        LegDeviation(lp.label, leg.start, leg.end, field.deviation(leg.end, leg.start))
        for lp in (horizontal_loop, vertical_loop)
        for leg in lp.legs
        if isinstance(leg, DeviationLeg)
    )
    basis = stable_basis(field, base)
    hor = abelianized_holonomy(field, horizontal_loop, basis)
    ver = abelianized_holonomy(field, vertical_loop, basis)
    pts = random_samples(field.table, sys.iet.lo, sys.iet.hi, samples, seed)
    split = splitting_report(field, pts, base)
    coords = spectral_coordinates(hor, ver, params.lean)
    pred = predicted_limits(params)
    frac, dist = rational_proximity(params.m)
    deltas = {
        "a_plus": coords.a_plus - pred.a_plus,
        "b_plus": coords.b_plus - pred.b_plus,
        "A_ab_max_entry": (hor.matrix - pred.A_ab).max_abs(),
        "B_ab_max_entry": (ver.matrix - pred.B_ab).max_abs(),
    }
    return TorusAnalysis(
        params,
        grade,
        K,
        seed,
        saddle_connection_steps(sys),
        f"{frac.numerator}/{frac.denominator} (distance {dist:.3g})",
        lyap,
        field.decay,
        devs,
        hor,
        ver,
        split,
        coords,
        pred,
        deltas,
        time.perf_counter() - t0,
    )
