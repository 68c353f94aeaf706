"""Command-line front end: solve, sweep, validate, export.

Exit codes: 0 success, 1 internal error or failed check, 2 non-positive
solution, 64 usage error, 65 malformed input data.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .basis import ProblemSpec, setup
from .errors import InvalidArgumentError, VortexError
from .functionals import flux
from .solver import SolverConfig, solve, sweep

log = logging.getLogger("photovortex")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_POSITIVE = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65

PROFILE_ROWS = 1024
PROFILE_HEADER = ["r", "u", "u_r", "u_rr"]
SWEEP_HEADER = ["m", "P0", "beta", "delta_beta", "beta_upper_bound", "converged",
                "positive", "error"]
SUMMARY_HEADER = ["R", "m", "alpha", "P0", "N", "beta", "delta_beta", "objective",
                  "iterations", "converged", "positive", "min_u", "grad_norm",
                  "beta_upper", "beta_ok", "peak_bound_sq", "peak_ok", "decay_applicable",
                  "epsilon0_fit", "epsilon0_floor", "decay_ok", "poincare_ratio"]
FLUX_RTOL = 1e-3

FIG3_P0 = (1, 50, 100, 200, 300, 400, 500, 600, 700, 800)


class UsageError(Exception):
    pass


class DataFormatError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    """Fixed 17-significant-digit text for numbers; lowercase booleans."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(path: Path, header, rows, kind: str = "csv") -> Path:
    if kind == "jsonl":
        path = path.with_suffix(".jsonl")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                rec = {k: (v.item() if isinstance(v, np.generic) else v)
                       for k, v in zip(header, row)}
                fh.write(json.dumps(rec) + "\n")
        return path
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


# configuration

def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _split_list(value, cast):
    if isinstance(value, list):
        return [cast(v) for v in value]
    return [cast(v) for v in str(value).split(",") if v.strip()]


_NUMERIC = {"R": float, "alpha": float, "N": int, "max_iters": int,
            "grad_tol": float, "panels": int, "nodes_per_panel": int, "workers": int}


def merged(args: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides built-in defaults."""
    defaults = {"alpha": 1.0, "N": 20, "max_iters": 10000, "grad_tol": 1e-8,
                "out_dir": ".", "format": "csv", "workers": 1}
    cfg = read_config(args.config) if getattr(args, "config", None) else {}
    out = dict(defaults)
    for key, value in cfg.items():
        out[key] = value
    for key, value in vars(args).items():
        if value is not None and key not in ("func", "config"):
            out[key] = value
    try:
        for key, cast in _NUMERIC.items():
            if key in out and out[key] is not None and not isinstance(out[key], list):
                out[key] = cast(out[key])
    except ValueError as exc:
        raise UsageError(f"bad numeric value: {exc}") from exc
    return out


def _need(conf: dict, key: str):
    if conf.get(key) is None:
        raise UsageError(f"--{key} is required")
    return conf[key]


def make_spec(conf: dict, m=None, P0=None) -> ProblemSpec:
    try:
        if m is None:
            m = int(_single(_need(conf, "m")))
        if P0 is None:
            P0 = float(_single(_need(conf, "P0")))
        return ProblemSpec(R=_need(conf, "R"), m=m, alpha=conf["alpha"], P0=P0, N=conf["N"])
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from exc


def _single(value):
    if isinstance(value, list):
        if len(value) != 1:
            raise UsageError("expected a single value, got a list")
        return value[0]
    return value


def make_config(conf: dict) -> SolverConfig:
    try:
        return SolverConfig(max_iters=conf["max_iters"], grad_tol=conf["grad_tol"])
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from exc


def _quad(conf: dict) -> dict:
    return {"panel_count": conf.get("panels"), "nodes_per_panel": conf.get("nodes_per_panel")}


def out_dir(conf: dict) -> Path:
    path = Path(conf["out_dir"])
    path.mkdir(parents=True, exist_ok=True)
    return path


# solve

def summary_row(result, report) -> list:
    s = result.spec
    return [s.R, s.m, s.alpha, s.P0, s.N, result.beta, result.delta_beta,
            result.objective, result.iterations, result.converged, result.positive,
            result.min_u, result.grad_norm, report.beta_upper, report.beta_ok,
            report.peak_bound_sq, report.peak_ok, report.decay_applicable,
            report.epsilon0_fit, report.epsilon0_floor, report.decay_ok,
            report.poincare_ratio]


def profile_rows(profile, n: int = PROFILE_ROWS) -> list:
    r = np.linspace(0.0, profile.R, n)
    u, ur, urr = (profile.eval(r, k) for k in range(3))
    return [list(row) for row in zip(r, u, ur, urr)]


def print_summary(rows: list, stream=None):
    stream = stream or sys.stdout
    for key, value in rows:
        print(f"{key:>16} = {fmt(value)}", file=stream)


def cmd_solve(args) -> int:
    conf = merged(args)
    spec = make_spec(conf)
    config = make_config(conf)
    result = solve(spec, config, **_quad(conf))
    report = analysis.bounds_report(result)
    dest = out_dir(conf)
    kind = conf["format"]
    write_table(dest / "profile.csv", PROFILE_HEADER, profile_rows(result.profile), kind)
    row = summary_row(result, report)
    write_table(dest / "summary.csv", SUMMARY_HEADER, [row], kind)
    print_summary(list(zip(SUMMARY_HEADER, row)))
    if not result.converged:
        print(f"error: not converged after {result.iterations} iterations", file=sys.stderr)
        return EXIT_ERROR
    if not result.positive:
        print(f"warning: profile is not positive (min u = {result.min_u:.3e})",
              file=sys.stderr)
        return EXIT_NOT_POSITIVE
    return EXIT_OK


# sweep

def sweep_rows(outcomes) -> list:
    rows = []
    for oc in outcomes:
        s = oc.spec
        bound = analysis.beta_upper_bound(s)
        if oc.ok:
            r = oc.result
            rows.append([s.m, s.P0, r.beta, r.delta_beta, bound, r.converged,
                         r.positive, ""])
        else:
            rows.append([s.m, s.P0, None, None, bound, False, False,
                         f"{type(oc.error).__name__}: {oc.error}"])
    return rows


def gnuplot_beta_script(csv_name: str, ms) -> str:
    lines = ["set datafile separator ','", "set key left top",
             "set xlabel 'P0'", "set ylabel 'beta'"]
    plots = []
    for i, m in enumerate(ms):
        plots.append(f"'{csv_name}' every ::1 using ($1=={m}?$2:1/0):3:4 "
                     f"with yerrorlines lt {i + 1} title 'm={m}'")
        plots.append(f"'{csv_name}' every ::1 using ($1=={m}?$2:1/0):5 "
                     f"with lines dt 2 lt {i + 1} notitle")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def run_sweep(conf: dict, ms, P0s, stem: str = "beta_vs_P0") -> int:
    config = make_config(conf)
    specs = [make_spec(conf, m=m, P0=P0) for m in ms for P0 in P0s]
    outcomes = sweep(specs, config, workers=conf["workers"], **_quad(conf))
    dest = out_dir(conf)
    path = write_table(dest / f"{stem}.csv", SWEEP_HEADER, sweep_rows(outcomes),
                       conf["format"])
    if conf.get("gnuplot"):
        (dest / f"{stem}.gp").write_text(gnuplot_beta_script(path.name, ms),
                                         encoding="utf-8")
    for oc in outcomes:
        if oc.ok:
            print(f"m={oc.spec.m} P0={fmt(oc.spec.P0)} beta={fmt(oc.result.beta)} "
                  f"delta_beta={fmt(oc.result.delta_beta)}")
        else:
            print(f"m={oc.spec.m} P0={fmt(oc.spec.P0)} error: {oc.error}", file=sys.stderr)
    return EXIT_OK if any(oc.ok for oc in outcomes) else EXIT_ERROR


def cmd_sweep(args) -> int:
    conf = merged(args)
    try:
        ms = _split_list(_need(conf, "m"), int)
        P0s = _split_list(_need(conf, "P0"), float)
    except ValueError as exc:
        raise UsageError(f"bad list value: {exc}") from exc
    return run_sweep(conf, ms, P0s)


# validate

@dataclass(frozen=True, eq=False)
class SampledProfile:
    """A profile known only through samples on a grid including 0 and R."""

    spec: ProblemSpec
    r: np.ndarray
    u: np.ndarray
    u_r: np.ndarray
    u_rr: np.ndarray

    @property
    def R(self) -> float:
        return self.spec.R

    def eval(self, r, order: int = 0):
        data = (self.u, self.u_r, self.u_rr)[order]
        return np.interp(r, self.r, data)

    __call__ = eval

    def sample_nodes(self, rule):
        return tuple(self.eval(rule.nodes, k) for k in range(3))

    def sample_max(self) -> float:
        return float(self.u.max())


def _read_csv(path: Path, header=None) -> list:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}:1: empty file")
    if header is not None and rows[0] != header:
        raise DataFormatError(f"{path}:1: expected header {','.join(header)}")
    return rows


def read_profile_csv(path: Path, spec: ProblemSpec) -> SampledProfile:
    rows = _read_csv(path, PROFILE_HEADER)
    data = []
    for lineno, row in enumerate(rows[1:], 2):
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            vals = [float(v) for v in row]
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("non-finite value")
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
        data.append(vals)
    if len(data) < 3:
        raise DataFormatError(f"{path}:{len(rows) + 1}: too few data rows")
    arr = np.array(data)
    r = arr[:, 0]
    if np.any(np.diff(r) <= 0):
        bad = int(np.flatnonzero(np.diff(r) <= 0)[0]) + 3
        raise DataFormatError(f"{path}:{bad}: radii must be strictly increasing")
    if not (math.isclose(r[0], 0.0, abs_tol=1e-12 * spec.R)
            and math.isclose(r[-1], spec.R, rel_tol=1e-12)):
        raise DataFormatError(f"{path}: radii must span [0, {spec.R}]")
    return SampledProfile(spec, r, arr[:, 1], arr[:, 2], arr[:, 3])


def read_summary_csv(path: Path) -> tuple:
    rows = _read_csv(path)
    header = rows[0]
    need = ["R", "m", "alpha", "P0", "N", "beta"]
    missing = [k for k in need if k not in header]
    if missing:
        raise DataFormatError(f"{path}:1: missing columns {','.join(missing)}")
    if len(rows) < 2:
        raise DataFormatError(f"{path}:2: missing data row")
    rec = dict(zip(header, rows[1]))
    try:
        spec = ProblemSpec(R=float(rec["R"]), m=int(rec["m"]), alpha=float(rec["alpha"]),
                           P0=float(rec["P0"]), N=int(rec["N"]))
        beta = float(rec["beta"])
    except (ValueError, InvalidArgumentError) as exc:
        raise DataFormatError(f"{path}:2: {exc}") from exc
    return spec, beta


@dataclass(frozen=True)
class _Checked:
    beta: float
    profile: object
    rule: object = None


def validation_rows(spec: ProblemSpec, beta: float, profile, rule, flux_value: float,
                    min_u: float) -> tuple:
    target = _Checked(beta, profile, rule)
    beta_upper, beta_ok = analysis.check_beta_bound(beta, spec)
    bound_sq, peak_ok = analysis.check_peak_bound(target, spec)
    decay = analysis.safe_fit_decay(target, spec)
    ratio, p_ok = analysis.check_poincare(profile, rule, spec)
    flux_ok = abs(flux_value - spec.P0) <= FLUX_RTOL * spec.P0
    rows = [
        ("positive", "min_u", min_u, min_u > 0),
        ("flux", "flux", flux_value, flux_ok),
        ("beta_bound", "beta_upper", beta_upper, beta_ok),
        ("peak_bound", "peak_bound_sq", bound_sq, peak_ok),
        ("decay", "epsilon0_fit", decay.epsilon0_fit,
         decay.passed if decay.applicable else None),
        ("poincare", "poincare_ratio", ratio, p_ok),
    ]
    ok = all(passed for *_, passed in rows if passed is not None)
    return rows, ok, decay


def cmd_validate(args) -> int:
    conf = merged(args)
    if conf.get("profile") or conf.get("summary"):
        if not (conf.get("profile") and conf.get("summary")):
            raise UsageError("--profile and --summary must be given together")
        spec, beta = read_summary_csv(Path(conf["summary"]))
        profile = read_profile_csv(Path(conf["profile"]), spec)
        _, rule = setup(spec, **_quad(conf))
        flux_value = flux(profile, rule)
        min_u = float(profile.u[1:-1].min())
    else:
        spec = make_spec(conf)
        result = solve(spec, make_config(conf), **_quad(conf))
        if not result.converged:
            print("error: solve did not converge", file=sys.stderr)
            return EXIT_ERROR
        profile, rule, beta = result.profile, result.rule, result.beta
        flux_value = flux(profile, rule)
        min_u = result.min_u
    rows, ok, decay = validation_rows(spec, beta, profile, rule, flux_value, min_u)
    print(f"validating R={fmt(spec.R)} m={spec.m} alpha={fmt(spec.alpha)} "
          f"P0={fmt(spec.P0)} beta={fmt(beta)}")
    for check, quantity, value, passed in rows:
        status = "n/a" if passed is None else ("PASS" if passed else "FAIL")
        print(f"  {check:<11} {status:<5} {quantity} = {fmt(value)}")
    if decay.applicable:
        print(f"  decay rate floor 2(beta + m^2/R^2 + 1) = {fmt(decay.epsilon0_floor)}")
    if conf.get("out_dir") is not None:
        write_table(out_dir(conf) / "validation.csv",
                    ["check", "quantity", "value", "pass"],
                    [[c, q, v, "n/a" if p is None else p] for c, q, v, p in rows],
                    conf["format"])
    return EXIT_OK if ok else EXIT_ERROR


# export

def _profile_family(conf: dict, specs, label, stem: str) -> int:
    config = make_config(conf)
    outcomes = sweep(specs, config, workers=conf["workers"], **_quad(conf))
    good = [oc for oc in outcomes if oc.ok]
    for oc in outcomes:
        if not oc.ok:
            print(f"{label(oc.spec)}: {oc.error}", file=sys.stderr)
    if not good:
        return EXIT_ERROR
    R = specs[0].R
    r = np.linspace(0.0, R, PROFILE_ROWS)
    cols = [oc.result.profile.eval(r) for oc in good]
    header = ["r"] + [f"u_{label(oc.spec)}" for oc in good]
    dest = out_dir(conf)
    path = write_table(dest / f"{stem}.csv", header,
                       [list(row) for row in zip(r, *cols)], conf["format"])
    if conf.get("gnuplot"):
        plots = [f"'{path.name}' every ::1 using 1:{i + 2} with lines title '{label(oc.spec)}'"
                 for i, oc in enumerate(good)]
        script = ["set datafile separator ','", "set xlabel 'r'", "set ylabel 'u'",
                  "plot " + ", \\\n     ".join(plots)]
        (dest / f"{stem}.gp").write_text("\n".join(script) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_export(args) -> int:
    conf = merged(args)
    conf.setdefault("gnuplot", True)
    fig = conf["figure"]
    N, alpha = conf["N"], conf["alpha"]
    if fig == 1:
        R = conf.get("R") or 40.0
        P0 = float(_single(conf.get("P0") or [200.0]))
        specs = [ProblemSpec(R=R, m=m, alpha=alpha, P0=P0, N=N) for m in range(1, 7)]
        return _profile_family(conf, specs, lambda s: f"m{s.m}", "fig1_profiles_vs_m")
    if fig == 2:
        R = conf.get("R") or 20.0
        m = int(conf.get("m") or 1)
        specs = [ProblemSpec(R=R, m=m, alpha=alpha, P0=float(p), N=N)
                 for p in range(10, 101, 10)]
        return _profile_family(conf, specs, lambda s: f"P{fmt(s.P0)}", "fig2_profiles_vs_P0")
    conf["R"] = conf.get("R") or 20.0
    conf["gnuplot"] = True
    P0s = _split_list(conf["P0"], float) if conf.get("P0") else list(FIG3_P0)
    return run_sweep(conf, list(range(1, 6)), P0s)


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--R", type=float, help="domain radius")
    common.add_argument("--alpha", type=float, help="coupling parameter (default 1)")
    common.add_argument("--N", type=int, help="basis dimension (default 20)")
    common.add_argument("--max-iters", dest="max_iters", type=int)
    common.add_argument("--grad-tol", dest="grad_tol", type=float)
    common.add_argument("--panels", type=int, help="quadrature panels (default max(8, N))")
    common.add_argument("--nodes-per-panel", dest="nodes_per_panel", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--format", choices=("csv", "jsonl"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="photovortex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", parents=[common], help="solve one problem")
    p.add_argument("--m", type=int)
    p.add_argument("--P0", type=float)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="beta against P0 for several m")
    p.add_argument("--m", type=int, action="append")
    p.add_argument("--P0", type=float, action="append")
    p.add_argument("--workers", type=int)
    p.add_argument("--gnuplot", action="store_true", default=None,
                   help="also write a gnuplot script")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", parents=[common], help="check bounds on a solution")
    p.add_argument("--m", type=int)
    p.add_argument("--P0", type=float)
    p.add_argument("--profile", help="profile.csv written by solve")
    p.add_argument("--summary", help="summary.csv written by solve")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export", parents=[common], help="data and gnuplot scripts for figures")
    p.add_argument("--figure", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--P0", type=float, action="append")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError(parser.format_usage().strip())
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except VortexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
