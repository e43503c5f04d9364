"""Command-line front end.

Exit codes: 0 success, 2 invalid input or configuration, 3 a computation
refused to certify its result (the failing stage and quantity go to stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .abelianize import DeviationLeg, Loop, TransportLeg, abelianized_holonomy, spectral_coordinates
from .cocycle import (
    Direction,
    IntervalCocycle,
    finite_time_exponents,
    lyapunov_estimate,
    stable_line,
)
from .errors import (
    AbelianizerError,
    DegenerateError,
    InvalidArgumentError,
    OrbitTerminatedError,
    UncertifiedError,
)
from .iet import IntervalExchange, LanePoint, build_grading, fat_gap_report
from .pipeline import analyze_torus, prepare, random_samples
from .plane import Mat2
from .report import dumps, jsonable
from .slithering import JumpField, jump_decay_series
from .torus import TorusParams, build, safe_grade
from .torus import loops as torus_loops

GRADE_CAP = 200
EXIT_OK, EXIT_INVALID, EXIT_UNCERTIFIED = 0, 2, 3


class ConfigError(Exception):
    pass


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _threads() -> int:
    raw = os.environ.get("ABELIANIZER_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"ABELIANIZER_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"ABELIANIZER_THREADS must be a positive integer, got {raw!r}")
    return n


def _grade(value: int) -> int:
    if not 0 <= value <= GRADE_CAP:
        raise ConfigError(f"grade must lie in [0, {GRADE_CAP}], got {value}")
    return value


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")


def _source(args) -> tuple[IntervalCocycle, TorusParams | None]:
    if getattr(args, "torus", None):
        params = TorusParams.from_dict(_load_json(args.torus))
        return build(params).cocycle, params
    if getattr(args, "cocycle", None):
        return IntervalCocycle.from_dict(_load_json(args.cocycle)), None
    raise ConfigError("one of --torus or --cocycle is required")


def _format(args) -> str:
    if args.format:
        return args.format
    if args.out and args.out.endswith(".csv"):
        return "csv"
    return "json"


def _emit(args, payload: dict, header: list[str] | None = None, rows: list | None = None) -> None:
    fmt = _format(args)
    if fmt == "csv":
        if header is None:
            raise ConfigError(f"command '{args.command}' has no CSV form; use --format json")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])
        text = buf.getvalue()
    else:
        text = dumps(payload)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _samples_for(coc: IntervalCocycle, count: int, seed: int):
    table = build_grading(coc.iet, 2.0, 0)
    return random_samples(table, coc.iet.lo, coc.iet.hi, count, seed)


def cmd_torus(args) -> int:
    params = TorusParams.from_dict(_load_json(args.config))
    grade = _grade(args.grade)
    if args.cap_grade:
        grade = safe_grade(build(params), grade)
    r = analyze_torus(
        params,
        grade=grade,
        K=args.K,
        samples=args.samples,
        seed=args.seed,
        lyapunov_n=args.lyapunov_n,
        lyapunov_samples=args.lyapunov_samples,
    )
    payload = {"format": 1, "command": "torus", "threads": _threads(), **jsonable(r)}
    payload.pop("seconds", None)
    _emit(args, payload)
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    coc, _ = _source(args)
    pts = _samples_for(coc, args.samples, args.seed)
    est = lyapunov_estimate(coc, pts, args.n)
    per = finite_time_exponents(coc, pts, args.n)
    payload = {"format": 1, "command": "lyapunov", "seed": args.seed, **jsonable(est),
               "samples": [{"x": p.coord, "exponent": v} for p, v in zip(pts, per)]}
    _emit(args, payload, ["x", "exponent"], [[p.coord, "" if v is None else v] for p, v in zip(pts, per)])
    return EXIT_OK


def cmd_stable_lines(args) -> int:
    coc, _ = _source(args)
    if args.points:
        try:
            xs = [float(t) for t in args.points.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --points list: {args.points}") from exc
        pts = [LanePoint(x) for x in xs]
    else:
        pts = _samples_for(coc, args.samples, args.seed)
    dirs = [Direction.FORWARD, Direction.BACKWARD] if args.direction == "both" else [Direction(args.direction)]
    rows = []
    for p in pts:
        for d in dirs:
            r = stable_line(coc, p, d, args.n)
            rows.append([p.coord, d.value, r.line.representative.x, r.line.representative.y, r.residual])
    header = ["x", "direction", "line_x", "line_y", "residual"]
    payload = {"format": 1, "command": "stable-lines", "seed": args.seed, "n": args.n,
               "lines": [dict(zip(header, r)) for r in rows]}
    _emit(args, payload, header, rows)
    return EXIT_OK


def cmd_fatgap(args) -> int:
    if args.iet:
        iet = IntervalExchange.from_dict(_load_json(args.iet))
    elif args.torus:
        iet = build(TorusParams.from_dict(_load_json(args.torus))).iet
    else:
        raise ConfigError("one of --iet or --torus is required")
    table = build_grading(iet, args.K, _grade(args.nmax))
    rows = fat_gap_report(table, args.lam, args.nmax)
    header = ["n", "gap", "value", "running_min"]
    data = [[r.n, r.gap, r.value, r.running_min] for r in rows]
    payload = {"format": 1, "command": "fatgap", "K": args.K, "lambda": args.lam,
               "near_saddle_entries": len(table.flagged), "rows": [dict(zip(header, r)) for r in data]}
    _emit(args, payload, header, data)
    return EXIT_OK


def cmd_decay(args) -> int:
    nmax = _grade(args.nmax)
    if args.torus:
        params = TorusParams.from_dict(_load_json(args.torus))
        _, field = prepare(params, nmax, args.K)
        coc, table = field.coc, field.table
    else:
        coc, _ = _source(args)
        table = build_grading(coc.iet, args.K, nmax)
        field = JumpField.build(coc, table)
    fit = (args.fit_lo, args.fit_hi) if args.fit_lo is not None and args.fit_hi is not None else None
    series = jump_decay_series(coc, table, nmax, field=field, fit_range=fit)
    header = ["n", "max_jump_norm"]
    payload = {"format": 1, "command": "decay", **jsonable(series),
               "slope_defined": series.slope is not None}
    _emit(args, payload, header, [list(r) for r in series.rows])
    return EXIT_OK


def _parse_loops(d: dict) -> list[Loop]:
    try:
        base = float(d["base"])
        out = []
        for lp in d["loops"]:
            legs = []
            for leg in lp["legs"]:
                if leg["kind"] == "deviation":
                    legs.append(DeviationLeg(float(leg["start"]), float(leg["end"])))
                elif leg["kind"] == "transport":
                    legs.append(TransportLeg(float(leg["start"]), float(leg["end"]), Mat2.from_rows(leg["matrix"])))
                else:
                    raise ConfigError(f"unknown leg kind {leg['kind']!r}")
            out.append(Loop(str(lp["label"]), base, tuple(legs)))
        return out
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed loops file: {exc}") from exc


def cmd_abelianize(args) -> int:
    grade = _grade(args.grade)
    if args.torus:
        params = TorusParams.from_dict(_load_json(args.torus))
        if args.cap_grade:
            grade = safe_grade(build(params), grade)
        sys_, field = prepare(params, grade, args.K)
        loop_list = list(torus_loops(sys_))
        lean = params.lean
    else:
        coc, _ = _source(args)
        if not args.loops:
            raise ConfigError("--loops is required with --cocycle")
        loop_list = _parse_loops(_load_json(args.loops))
        table = build_grading(coc.iet, args.K, max(grade, 16))
        field = JumpField.build(coc, table).truncated(grade)
        lean = args.lean
    hols = [abelianized_holonomy(field, lp) for lp in loop_list]
    payload = {"format": 1, "command": "abelianize", "grade": grade, "holonomies": jsonable(hols)}
    if len(hols) == 2:
        payload["spectral_coordinates"] = jsonable(spectral_coordinates(hols[0], hols[1], lean))
    _emit(args, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="abelianizer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def output(sp):
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=["json", "csv"], help="default: from --out extension, else json")

    def source(sp):
        sp.add_argument("--torus", help="torus config JSON")
        sp.add_argument("--cocycle", help="cocycle JSON")

    t = sub.add_parser("torus", help="abelianize a torus system end to end")
    t.add_argument("--config", required=True)
    t.add_argument("--grade", type=int, default=40)
    t.add_argument("--cap-grade", action="store_true", help="lower the grade below the first saddle connection")
    t.add_argument("--K", type=float, default=2.0)
    t.add_argument("--samples", type=int, default=16)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lyapunov-n", type=int, default=4096)
    t.add_argument("--lyapunov-samples", type=int, default=32)
    output(t)
    t.set_defaults(func=cmd_torus)

    ly = sub.add_parser("lyapunov", help="Lyapunov exponent estimate")
    source(ly)
    ly.add_argument("--n", type=int, default=4096)
    ly.add_argument("--samples", type=int, default=32)
    ly.add_argument("--seed", type=int, default=0)
    output(ly)
    ly.set_defaults(func=cmd_lyapunov)

    sl = sub.add_parser("stable-lines", help="forward/backward stable lines at points")
    source(sl)
    sl.add_argument("--points", help="comma-separated coordinates")
    sl.add_argument("--samples", type=int, default=8)
    sl.add_argument("--seed", type=int, default=0)
    sl.add_argument("--n", type=int, default=64)
    sl.add_argument("--direction", choices=["forward", "backward", "both"], default="both")
    output(sl)
    sl.set_defaults(func=cmd_stable_lines)

    fg = sub.add_parser("fatgap", help="fat gap diagnostic of the grading")
    fg.add_argument("--iet")
    fg.add_argument("--torus")
    fg.add_argument("--K", type=float, default=2.0)
    fg.add_argument("--lambda", dest="lam", type=float, default=0.1)
    fg.add_argument("--nmax", type=int, default=25)
    output(fg)
    fg.set_defaults(func=cmd_fatgap)

    de = sub.add_parser("decay", help="jump norm decay series and fitted slope")
    source(de)
    de.add_argument("--nmax", type=int, default=30)
    de.add_argument("--K", type=float, default=2.0)
    de.add_argument("--fit-lo", type=int)
    de.add_argument("--fit-hi", type=int)
    output(de)
    de.set_defaults(func=cmd_decay)

    ab = sub.add_parser("abelianize", help="abelianized holonomies and spectral coordinates")
    source(ab)
    ab.add_argument("--loops", help="loop decomposition JSON (with --cocycle)")
    ab.add_argument("--lean", choices=["left", "right"], default="left")
    ab.add_argument("--grade", type=int, default=40)
    ab.add_argument("--cap-grade", action="store_true")
    ab.add_argument("--K", type=float, default=2.0)
    output(ab)
    ab.set_defaults(func=cmd_abelianize)
    return p


def _refusal(exc: Exception, stage: str) -> str:
    q = getattr(exc, "quantity", {})
    return json.dumps({"error": type(exc).__name__, "stage": stage, "message": str(exc), "quantity": jsonable(q)},
                      default=str)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads()
        for name in ("K",):
            if hasattr(args, name):
                _positive(name, getattr(args, name))
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        sys.stderr.write(_refusal(exc, "config") + "\n")
        return EXIT_INVALID
    except UncertifiedError as exc:
        sys.stderr.write(_refusal(exc, exc.stage) + "\n")
        return EXIT_UNCERTIFIED
    except DegenerateError as exc:
        sys.stderr.write(_refusal(exc, "stable-line") + "\n")
        return EXIT_UNCERTIFIED
    except OrbitTerminatedError as exc:
        sys.stderr.write(_refusal(exc, "transport") + "\n")
        return EXIT_UNCERTIFIED
    except AbelianizerError as exc:
        sys.stderr.write(_refusal(exc, "unknown") + "\n")
        return EXIT_UNCERTIFIED


if __name__ == "__main__":
    sys.exit(main())
