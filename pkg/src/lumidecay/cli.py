"""Command-line interface.

Exit codes: 0 success, 2 invalid arguments or input, 3 numerical failure,
4 fit did not converge (the result is still written), 5 operator
verification failed (the table is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, TextIO

import numpy as np

from lumidecay.decay_laws import (
    BecquerelParams,
    BiExponentialParams,
    CurrentDecayParams,
    DecayModel,
    StretchedParams,
    becquerel_intensity,
    eval_model,
    stretched_intensity,
)
from lumidecay.errors import (
    ConvergenceError,
    DomainError,
    LumidecayError,
    NonConvergence,
)
from lumidecay.fitting import (
    MODEL_KINDS,
    Comparison,
    FitResult,
    LMConfig,
    compare_models,
    fit,
    get_kind,
)
from lumidecay.frac_operator import (
    LogKernelOperator,
    QuadratureConfig,
    apply_detailed,
    residual_decay_eq,
)
from lumidecay.ml_core import MLParams, ml_decay, ml_eval
from lumidecay.timeseries import TimeSeries

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_NUMERIC = 3
EXIT_NONCONVERGENCE = 4
EXIT_VERIFY = 5

FIGURE_NUS = (0.25, 0.5, 0.75, 1.0)
FIGURE_PS = (1.0, 1.25, 1.5, 1.75, 2.0)

VERIFY_NUS = (0.3, 0.5, 0.7)
VERIFY_BETAS = (0.5, 1.0, 1.5, 2.0)
VERIFY_TIMES = (0.5, 2.0, 10.0)


class UsageError(Exception):
    """Invalid command-line input (exit code 2)."""


def fmt(x: float) -> str:
    """Fixed 17-significant-digit formatting used for every number."""
    return "%.17g" % x


# {{{ grid and input parsing


@dataclass(frozen=True)
class Grid:
    spacing: str
    t_min: float
    t_max: float
    points: int

    def __post_init__(self) -> None:
        if self.spacing not in ("log", "linear"):
            raise UsageError(f"grid: spacing must be 'log' or 'linear': got {self.spacing!r}")
        if self.points < 2:
            raise UsageError(f"grid: points must be >= 2: got {self.points}")
        if self.spacing == "log" and not self.t_min > 0:
            raise UsageError(f"grid: t_min must be positive for log spacing: got {self.t_min}")
        if not self.t_max > self.t_min:
            raise UsageError(f"grid: t_max must exceed t_min: got {self.t_min}, {self.t_max}")

    def times(self) -> np.ndarray:
        if self.spacing == "log":
            return np.logspace(math.log10(self.t_min), math.log10(self.t_max), self.points)
        return np.linspace(self.t_min, self.t_max, self.points)


def parse_grid(text: str) -> Grid:
    """Parse ``spacing:t_min:t_max:points``."""
    parts = text.split(":")
    if len(parts) != 4:
        raise UsageError(f"grid: expected spacing:t_min:t_max:points, got {text!r}")
    try:
        return Grid(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
    except ValueError as exc:
        raise UsageError(f"grid: {exc}") from None


def parse_floats(text: str, key: str) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise UsageError(f"{key}: expected comma-separated numbers, got {text!r}") from None
    if not np.all(np.isfinite(values)):
        raise UsageError(f"{key}: values must be finite")
    return values


def read_series(stream: TextIO, name: str = "<input>") -> TimeSeries:
    """Strictly parse a ``t,intensity[,weight]`` CSV file."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise UsageError(f"{name}: empty input") from None
    header = [h.strip() for h in header]
    if header not in (["t", "intensity"], ["t", "intensity", "weight"]):
        raise UsageError(
            f"{name}:1: header must be 't,intensity' or 't,intensity,weight', "
            f"got {','.join(header)!r}"
        )

    ncols = len(header)
    rows: list[list[float]] = []
    for row in reader:
        line = reader.line_num
        if len(row) != ncols:
            raise UsageError(f"{name}:{line}: expected {ncols} fields, got {len(row)}")
        try:
            values = [float(v) for v in row]
        except ValueError:
            raise UsageError(f"{name}:{line}: not a number in {','.join(row)!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise UsageError(f"{name}:{line}: non-finite value")
        if rows and values[0] <= rows[-1][0]:
            raise UsageError(
                f"{name}:{line}: t = {row[0].strip()} does not increase "
                f"(previous {fmt(rows[-1][0])})"
            )
        if ncols == 3 and values[2] < 0:
            raise UsageError(f"{name}:{line}: negative weight")
        rows.append(values)

    if not rows:
        raise UsageError(f"{name}: no data rows")
    data = np.array(rows)
    weights = data[:, 2] if ncols == 3 else None
    return TimeSeries(data[:, 0], data[:, 1], weights)


# }}}


# {{{ output


def write_table(out: TextIO, header: Sequence[str], columns: Sequence[np.ndarray], fmt_name: str) -> None:
    if fmt_name == "json":
        rows = [
            {h: float(c[i]) for h, c in zip(header, columns)}
            for i in range(len(columns[0]))
        ]
        json.dump(rows, out, indent=1)
        out.write("\n")
        return

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i in range(len(columns[0])):
        writer.writerow([fmt(float(c[i])) for c in columns])
    out.write(buf.getvalue())


def fit_to_dict(result: FitResult) -> dict[str, Any]:
    kind = get_kind(result.kind)
    out: dict[str, Any] = {"model": result.kind}
    out.update({k: float(v) for k, v in result.values.items()})
    out["residual_norm"] = float(result.residual_norm)
    out["aic"] = float(result.aic)
    out["iterations"] = int(result.iterations)
    out["converged"] = bool(result.converged)
    out["gradient_norm"] = float(result.gradient_norm)
    if result.param_stderr is None:
        out["param_stderr"] = None
    else:
        out["param_stderr"] = {
            name: float(s) for name, s in zip(kind.names, result.param_stderr)
        }
    out["boundary"] = bool(result.boundary)
    out["seed_index"] = int(result.seed_index)
    return out


def _dump(obj: Any, out: TextIO) -> None:
    json.dump(obj, out, indent=1, allow_nan=True)
    out.write("\n")


# }}}


# {{{ commands


def _require(args: argparse.Namespace, *keys: str) -> None:
    for key in keys:
        if getattr(args, key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required for --model {args.model}")


def build_model(args: argparse.Namespace) -> DecayModel:
    model = args.model
    try:
        if model == "becquerel":
            _require(args, "p", "tau0")
            if args.relaxed:
                return BecquerelParams.relaxed(args.p, args.tau0)
            return BecquerelParams(args.p, args.tau0)
        if model == "stretched":
            _require(args, "nu", "tau0")
            return StretchedParams(args.nu, args.tau0)
        if model == "current":
            if args.tau0 is not None:
                return CurrentDecayParams.from_tau0(args.tau0)
            _require(args, "L", "Rn")
            return CurrentDecayParams(args.i0 if args.i0 is not None else 1.0, args.L, args.Rn)
        if model == "biexp":
            _require(args, "a1", "k1", "k2")
            return BiExponentialParams.normalized(args.a1, args.k1, args.k2)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"--model: unknown model {model!r}")


def _times(args: argparse.Namespace) -> np.ndarray:
    if args.t is not None:
        t = parse_floats(args.t, "--t")
        if np.any(t < 0):
            raise UsageError("--t: times must be non-negative")
        return t
    return parse_grid(args.grid).times()


def cmd_eval(args: argparse.Namespace, out: TextIO) -> int:
    if args.ml:
        if args.nu is None:
            raise UsageError("--nu is required with --ml")
        try:
            params = MLParams(args.nu, args.beta, args.lam)
        except DomainError as exc:
            raise UsageError(str(exc)) from None
        if args.z is not None:
            z = parse_floats(args.z, "--z")
            values = np.atleast_1d(ml_eval(params, z))
            write_table(out, ["z", "value"], [z, values], args.format)
        else:
            t = _times(args)
            values = np.atleast_1d(ml_decay(params, t))
            write_table(out, ["t", "value"], [t, values], args.format)
        return EXIT_OK

    if args.model is None:
        raise UsageError("--model (or --ml) is required")
    model = build_model(args)
    t = _times(args)
    try:
        values = np.atleast_1d(eval_model(model, t))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    write_table(out, ["t", "intensity"], [t, values], args.format)
    return EXIT_OK


def cmd_figure1(args: argparse.Namespace, out: TextIO) -> int:
    grid = parse_grid(args.grid)
    x = grid.times()
    header = ["t_over_tau0"]
    columns = [x]
    for nu in FIGURE_NUS:
        header.append(f"nu={nu:g}")
        columns.append(np.asarray(stretched_intensity(StretchedParams(nu, 1.0), x)))
    for p in FIGURE_PS:
        header.append(f"p={p:g}")
        columns.append(np.asarray(becquerel_intensity(BecquerelParams(p, 1.0), x)))
    write_table(out, header, columns, args.format)
    return EXIT_OK


def _load(args: argparse.Namespace) -> TimeSeries:
    try:
        if args.input == "-":
            data = read_series(sys.stdin, "<stdin>")
        else:
            with open(args.input, newline="", encoding="utf-8") as f:
                data = read_series(f, args.input)
    except OSError as exc:
        raise UsageError(f"input: {exc}") from None
    except DomainError as exc:
        raise UsageError(f"{args.input}: {exc}") from None
    if args.weights == "poisson":
        data = data.with_poisson_weights()
    return data


def _lm(args: argparse.Namespace) -> LMConfig:
    try:
        return LMConfig(max_iterations=args.max_iterations)
    except DomainError as exc:
        raise UsageError(f"--max-iterations: {exc}") from None


def _parse_init(text: str | None, kind: str) -> dict[str, float] | None:
    if text is None:
        return None
    names = get_kind(kind).names
    init: dict[str, float] = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in names:
            raise UsageError(f"--init: expected name=value with names {names}, got {item!r}")
        try:
            init[key] = float(value)
        except ValueError:
            raise UsageError(f"--init: {key} is not a number: {value!r}") from None
    return init


def cmd_fit(args: argparse.Namespace, out: TextIO) -> int:
    data = _load(args)
    init = _parse_init(args.init, args.model)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergence)
        try:
            result = fit(data, args.model, init, config=_lm(args))
        except DomainError as exc:
            raise UsageError(str(exc)) from None
    for w in caught:
        if not issubclass(w.category, NonConvergence):
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)

    _dump(fit_to_dict(result), out)
    if not result.converged:
        print(f"warning: {result.message}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_compare(args: argparse.Namespace, out: TextIO) -> int:
    data = _load(args)
    kinds = [k.strip() for k in args.models.split(",")]
    for k in kinds:
        if k not in MODEL_KINDS:
            raise UsageError(f"--models: unknown model {k!r}")
    comparison: Comparison = compare_models(data, kinds, config=_lm(args))
    _dump(
        {
            "ranked": [fit_to_dict(r) for r in comparison.ranked],
            "failures": dict(sorted(comparison.failures.items())),
        },
        out,
    )
    if any(not r.converged for r in comparison.ranked):
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_verify_operator(args: argparse.Namespace, out: TextIO) -> int:
    nus = parse_floats(args.nu, "--nu") if args.nu is not None else np.array(VERIFY_NUS)
    betas = parse_floats(args.beta, "--beta") if args.beta is not None else np.array(VERIFY_BETAS)
    times = parse_floats(args.t, "--t") if args.t is not None else np.array(VERIFY_TIMES)
    try:
        quad = QuadratureConfig(
            nodes_per_panel=args.nodes,
            abs_tol=args.quad_tol,
            max_refinements=args.refinements,
            grading_levels=args.levels,
        )
        ops = [LogKernelOperator(float(nu), 1.0, 1.0, quad) for nu in nus]
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    if np.any(times <= 0):
        raise UsageError("--t: times must be positive")

    rows = []
    ok = True
    numeric_failure = False

    def record(kind: str, nu: float, beta: float, t: float, lhs: float, rhs: float, tol: float) -> None:
        nonlocal ok
        residual = abs(lhs - rhs)
        passed = residual <= tol
        ok = ok and passed
        rows.append([kind, fmt(nu), fmt(beta), fmt(t), fmt(lhs), fmt(rhs), fmt(residual), "ok" if passed else "FAIL"])

    for op in ops:
        nu = op.nu
        for beta in betas:
            beta = float(beta)
            for t in times:
                t = float(t)
                log_arg = math.log1p(t)
                rhs = math.exp(math.lgamma(beta + 1.0) - math.lgamma(beta + 1.0 - nu)) * log_arg ** (beta - nu)

                def f(tau: np.ndarray, b: float = beta) -> np.ndarray:
                    return np.log1p(tau) ** b

                def df(tau: np.ndarray, b: float = beta) -> np.ndarray:
                    return b * np.log1p(tau) ** (b - 1.0) / (1.0 + tau)

                try:
                    lhs = apply_detailed(op, f, t, df, endpoint_exponent=beta - 1.0).value
                except ConvergenceError as exc:
                    log.error("eigen nu=%g beta=%g t=%g: %s", nu, beta, t, exc)
                    numeric_failure = True
                    lhs = math.nan
                record("eigen", nu, beta, t, lhs, rhs, args.tol)

        params = StretchedParams(nu, 1.0)
        for t in times:
            t = float(t)
            try:
                residual = residual_decay_eq(op, params, t)
            except ConvergenceError as exc:
                log.error("decay nu=%g t=%g: %s", nu, t, exc)
                numeric_failure = True
                residual = math.nan
            record("decay", nu, math.nan, t, residual, 0.0, args.decay_tol)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["check", "nu", "beta", "t", "lhs", "rhs", "residual", "status"])
    writer.writerows(rows)
    out.write(buf.getvalue())

    if numeric_failure:
        return EXIT_NUMERIC
    return EXIT_OK if ok else EXIT_VERIFY


# }}}


# {{{ parser


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=sorted(MODEL_KINDS), help="decay law")
    p.add_argument("--p", type=float, help="Becquerel exponent")
    p.add_argument("--relaxed", action="store_true", help="allow p outside [1, 2]")
    p.add_argument("--tau0", type=float, help="time constant")
    p.add_argument("--nu", type=float, help="Mittag-Leffler order")
    p.add_argument("--a1", type=float, help="bi-exponential amplitude")
    p.add_argument("--k1", type=float, help="bi-exponential rate 1")
    p.add_argument("--k2", type=float, help="bi-exponential rate 2")
    p.add_argument("--i0", type=float, help="reference current")
    p.add_argument("--L", type=float, help="inductance")
    p.add_argument("--Rn", type=float, help="normal resistance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lumidecay",
        description="Hyperbolic and Mittag-Leffler luminescence decay laws.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument(
        "-o", "--output", default="-", help="output file (default: standard output)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a decay law or E_{nu,beta}")
    _add_model_args(p)
    p.add_argument("--ml", action="store_true", help="evaluate the Mittag-Leffler function")
    p.add_argument("--beta", type=float, default=1.0, help="second ML parameter")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="ML rate for t input")
    p.add_argument("--z", help="comma-separated ML arguments")
    p.add_argument("--t", help="comma-separated times (overrides --grid)")
    p.add_argument("--grid", default="log:0.01:100:41", help="spacing:t_min:t_max:points")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_eval)

    for name, func, help_text in (
        ("fit", cmd_fit, "fit one decay law to t,intensity data"),
        ("compare", cmd_compare, "fit and rank several decay laws"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input", help="CSV file with header t,intensity[,weight] ('-' for stdin)")
        if name == "fit":
            p.add_argument("--model", required=True, choices=sorted(MODEL_KINDS))
            p.add_argument("--init", help="initial guess, e.g. nu=0.5,tau0=2")
        else:
            p.add_argument("--models", default="becquerel,stretched,current,biexp")
        p.add_argument("--weights", choices=("uniform", "poisson"), default="uniform")
        p.add_argument("--max-iterations", type=int, default=200)
        p.set_defaults(func=func)

    p = sub.add_parser("figure1", help="stretched and Becquerel curves on a log grid")
    p.add_argument("--grid", default="log:0.01:1000:200", help="spacing:t_min:t_max:points (in units of tau0)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("verify-operator", help="check the operator eigenproperty and decay equation")
    p.add_argument("--nu", help="comma-separated orders (default 0.3,0.5,0.7)")
    p.add_argument("--beta", help="comma-separated powers (default 0.5,1,1.5,2)")
    p.add_argument("--t", help="comma-separated times (default 0.5,2,10)")
    p.add_argument("--tol", type=float, default=1.0e-8, help="eigenproperty tolerance")
    p.add_argument("--decay-tol", type=float, default=1.0e-6, help="decay-equation tolerance")
    p.add_argument("--nodes", type=int, default=QuadratureConfig.nodes_per_panel)
    p.add_argument("--levels", type=int, default=QuadratureConfig.grading_levels)
    p.add_argument("--quad-tol", type=float, default=QuadratureConfig.abs_tol)
    p.add_argument("--refinements", type=int, default=QuadratureConfig.max_refinements)
    p.set_defaults(func=cmd_verify_operator)

    return parser


# }}}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    out: TextIO
    if args.output == "-":
        out = sys.stdout
        close = False
    else:
        try:
            out = open(args.output, "w", newline="", encoding="utf-8")
        except OSError as exc:
            print(f"error: --output: {exc}", file=sys.stderr)
            return EXIT_ARGS
        close = True

    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except LumidecayError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        if close:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
