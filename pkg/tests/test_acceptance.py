"""One test per acceptance criterion.

Each test prints a single ``ACCEPTANCE <n> ... PASS|FAIL`` line (also when
it fails with an exception) and counts its wall-clock runtime budget as part
of the criterion.
"""

from __future__ import annotations

import csv
import io
import math
import subprocess
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from time import perf_counter

import numpy as np
import pytest

from _support import (
    NOISY_NU_BOUND,
    ROUND_TRIP,
    complete_monotonicity_violations,
    noisy_stretched,
    rel_errors,
)
from lumidecay.cli import EXIT_ARGS, EXIT_NONCONVERGENCE, EXIT_VERIFY, main
from lumidecay.decay_laws import (
    BecquerelParams,
    StretchedParams,
    becquerel_intensity,
    eval_model,
    stretched_intensity,
)
from lumidecay.fitting import MODEL_KINDS, fit, model_values
from lumidecay.frac_operator import LogKernelOperator, apply, residual_decay_eq
from lumidecay.kinetics import (
    KineticsProblem,
    NonlinearOrder,
    TimeDependentRate,
    integrate,
    observed_order,
)
from lumidecay.ml_core import MLParams, ml_eval
from lumidecay.reference_oracle import oracle_eigen_rhs, oracle_ml, oracle_scaled_erfc
from lumidecay.timeseries import TimeSeries


class Criterion:
    def __init__(self, number: int, title: str, limit: float) -> None:
        self.number = number
        self.title = title
        self.limit = limit
        self.failures: list[str] = []
        self.notes: list[str] = []

    def check(self, ok: bool, message: str) -> None:
        if not ok:
            self.failures.append(message)

    def note(self, message: str) -> None:
        self.notes.append(message)


@pytest.fixture
def criterion(capsys: pytest.CaptureFixture[str]):
    @contextmanager
    def run(number: int, title: str, limit: float) -> Iterator[Criterion]:
        c = Criterion(number, title, limit)
        start = perf_counter()
        error: BaseException | None = None
        try:
            yield c
        except Exception as exc:  # reported, then re-raised
            error = exc
            c.failures.append(f"{type(exc).__name__}: {exc}")
        elapsed = perf_counter() - start
        c.check(elapsed < limit, f"runtime {elapsed:.2f} s exceeds {limit:g} s")
        status = "PASS" if not c.failures else "FAIL"
        detail = "; ".join(c.failures or c.notes)
        with capsys.disabled():
            print(f"\nACCEPTANCE {number} {title}: {status} "
                  f"[{elapsed:.2f} s, budget {limit:g} s] {detail}")
        if error is not None:
            raise error
        assert not c.failures, "; ".join(c.failures)

    return run


def rel_err(value: float, ref: float) -> float:
    return abs(value - ref) / abs(ref)


def test_ml_correctness(criterion) -> None:
    with criterion(1, "Mittag-Leffler correctness", 1.0) as c:
        worst = 0.0
        for nu in (0.25, 0.5, 0.75, 1.0):
            for x in (0.0, 1e-3, 1.0, 10.0, 100.0):
                err = rel_err(ml_eval(MLParams(nu), -x), oracle_ml(nu, 1.0, -x))
                worst = max(worst, err)
                c.check(err <= 1e-10, f"nu={nu}, z={-x}: rel err {err:.2e}")
        worst_erfc = 0.0
        for x in (0.1, 1.0, 3.0):
            err = rel_err(ml_eval(MLParams(0.5), -x), oracle_scaled_erfc(x))
            worst_erfc = max(worst_erfc, err)
            c.check(err <= 1e-10, f"erfc identity x={x}: rel err {err:.2e}")
        c.note(f"max rel err {worst:.1e} vs oracle, {worst_erfc:.1e} vs exp(x^2) erfc(x)")


def test_reduction_chain(criterion) -> None:
    with criterion(2, "reduction chain nu=1 -> hyperbola", 1.0) as c:
        worst = 0.0
        for tau0 in (0.5, 1.0, 7.0):
            t = tau0 * np.geomspace(1e-3, 1e3, 200)
            dev = np.max(np.abs(
                stretched_intensity(StretchedParams(1.0, tau0), t)
                - becquerel_intensity(BecquerelParams(1.0, tau0), t)
            ))
            worst = max(worst, float(dev))
            c.check(dev <= 1e-12, f"tau0={tau0}: max deviation {dev:.2e}")
        c.note(f"max deviation {worst:.1e}")


def test_operator_eigenproperty(criterion) -> None:
    with criterion(3, "operator eigenproperty", 10.0) as c:
        worst = 0.0
        for nu in (0.3, 0.5, 0.7):
            op = LogKernelOperator(nu)
            for beta in (0.5, 1.0, 1.5, 2.0):
                def f(t, b=beta):
                    return np.log1p(t) ** b

                def df(t, b=beta):
                    return b * np.log1p(t) ** (b - 1.0) / (1.0 + t)

                for t in (0.5, 2.0, 10.0):
                    value = apply(op, f, t, df, endpoint_exponent=beta - 1.0)
                    res = abs(value - oracle_eigen_rhs(nu, beta, math.log1p(t)))
                    worst = max(worst, res)
                    c.check(res <= 1e-8, f"nu={nu}, beta={beta}, t={t}: residual {res:.2e}")
        c.note(f"max residual {worst:.1e} over 36 cases")


def test_solution_property(criterion) -> None:
    with criterion(4, "stretched law solves the decay equation", 10.0) as c:
        worst = 0.0
        for nu in (0.5, 0.75):
            params = StretchedParams(nu, 1.0)
            op = LogKernelOperator.for_decay(params)
            for t in (0.5, 2.0, 10.0):
                res = abs(residual_decay_eq(op, params, t))
                worst = max(worst, res)
                c.check(res <= 1e-6, f"nu={nu}, t={t}: residual {res:.2e}")
        c.note(f"max residual {worst:.1e}")


def test_kinetics_equivalence(criterion) -> None:
    with criterion(5, "kinetics equivalence (RK4)", 5.0) as c:
        min_order, worst = math.inf, 0.0
        for kind in (NonlinearOrder(1.5, 1.0), NonlinearOrder(2.0, 0.5),
                     TimeDependentRate(1.5, 1.0), TimeDependentRate(2.0, 0.5)):
            exact = BecquerelParams.relaxed(kind.p, kind.tau0)
            errors = []
            for h in (0.1, 0.05, 0.025):
                series = integrate(KineticsProblem(kind, 10.0, h))
                errors.append(float(np.max(np.abs(
                    series.intensity - becquerel_intensity(exact, series.t)))))
            orders = observed_order(np.array(errors))
            final = abs(integrate(KineticsProblem(kind, 10.0, 1e-3)).intensity[-1]
                        - becquerel_intensity(exact, 10.0))
            min_order = min(min_order, float(np.min(orders)))
            worst = max(worst, final)
            name = type(kind).__name__
            c.check(bool(np.all(orders >= 3.9)), f"{name} p={kind.p}: orders {orders}")
            c.check(final <= 1e-8, f"{name} p={kind.p}: final error {final:.2e}")
        c.note(f"min observed order {min_order:.2f}, max final error {worst:.1e}")


def test_complete_monotonicity(criterion) -> None:
    with criterion(6, "complete monotonicity sampling", 2.0) as c:
        grid = np.geomspace(1e-3, 1e3, 200)
        for nu in (0.3, 0.5, 0.7, 0.9):
            bad = complete_monotonicity_violations(lambda x, n=nu: ml_eval(MLParams(n), -x), grid)
            c.check(bad == [], f"nu={nu}: sign violations at {bad[:5]}")
        c.note("orders 1..4 alternate at all 200 points for 4 orders")


def test_fit_round_trip(criterion) -> None:
    with criterion(7, "fit round trip", 30.0) as c:
        worst = 0.0
        kinds = set()
        for model, t in ROUND_TRIP:
            kind, truth = model_values(model)
            kinds.add(kind)
            result = fit(TimeSeries(t, eval_model(model, t)), kind)
            err = rel_errors(result.values, truth)
            worst = max(worst, err)
            c.check(result.converged and err <= 1e-5, f"{kind} {truth}: rel err {err:.2e}")
        c.check(kinds == set(MODEL_KINDS), f"kinds covered {sorted(kinds)}")
        noisy = fit(noisy_stretched(0), "stretched")
        dev = abs(noisy.values["nu"] - 0.6)
        c.check(noisy.converged and dev <= NOISY_NU_BOUND,
                f"noisy nu deviation {dev:.2e} > {NOISY_NU_BOUND}")
        c.note(f"max noiseless rel err {worst:.1e}; noisy |nu - 0.6| = {dev:.1e} <= {NOISY_NU_BOUND}")


def test_figure_ordering(criterion, tmp_path: Path) -> None:
    with criterion(8, "figure1 data ordering", 2.0) as c:
        out = tmp_path / "figure1.csv"
        c.check(main(["-o", str(out), "figure1"]) == 0, "figure1 exit code")
        rows = list(csv.DictReader(io.StringIO(out.read_text(encoding="utf-8"))))
        columns = {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
        x = columns.pop("t_over_tau0")
        last = int(np.argmin(np.abs(x - 1e3)))
        c.check(abs(x[last] / 1e3 - 1.0) < 1e-12, f"last grid point {x[last]}")
        hyperbola = columns["p=1"]
        for name, values in columns.items():
            if name.startswith("nu=") and name != "nu=1":
                c.check(values[last] > hyperbola[last], f"{name} not above the hyperbola")
            if name.startswith("p=") and name != "p=1":
                c.check(values[last] < hyperbola[last], f"{name} not below the hyperbola")
        gap = float(np.max(np.abs(columns["nu=1"] - hyperbola)))
        c.check(gap <= 1e-12, f"nu=1 and p=1 columns differ by {gap:.2e}")
        c.note(f"{len(columns)} curves ordered at t/tau0 = 1e3; nu=1 vs p=1 gap {gap:.1e}")


def test_cli_contract(criterion, tmp_path: Path) -> None:
    with criterion(9, "CLI exit codes and determinism", 5.0) as c:
        bad = tmp_path / "bad.csv"
        bad.write_text("t,intensity\n0.1,0.9\n0.05,0.8\n0.2,0.7\n", encoding="utf-8")
        data = tmp_path / "data.csv"
        assert main(["-o", str(data), "eval", "--model", "stretched", "--nu", "0.6",
                     "--tau0", "1", "--grid", "log:0.01:100:60"]) == 0

        cases = [
            ("malformed CSV", EXIT_ARGS, ["fit", str(bad), "--model", "becquerel"]),
            ("forced non-convergence", EXIT_NONCONVERGENCE,
             ["fit", str(data), "--model", "stretched", "--init", "nu=0.9,tau0=20",
              "--max-iterations", "1"]),
            ("loosened operator tolerance", EXIT_VERIFY,
             ["verify-operator", "--nu", "0.5", "--beta", "0.5", "--t", "2", "--nodes", "4",
              "--levels", "0", "--quad-tol", "1", "--refinements", "1"]),
        ]
        # the real process exit status, not just the return value of main()
        script = "import sys; from lumidecay.cli import main; sys.exit(main(sys.argv[1:]))"
        for label, expected, argv in cases:
            proc = subprocess.run([sys.executable, "-c", script, *argv],
                                  capture_output=True, text=True, check=False)
            c.check(proc.returncode == expected,
                    f"{label}: exit {proc.returncode}, expected {expected}")
        first_stderr = subprocess.run([sys.executable, "-c", script, *cases[0][2]],
                                      capture_output=True, text=True, check=False).stderr
        c.check(":3:" in first_stderr, f"malformed CSV message lacks line number: {first_stderr!r}")

        for argv in (["figure1"], ["compare", str(data)],
                     ["verify-operator", "--nu", "0.5", "--beta", "1.5"]):
            a, b = tmp_path / "a.out", tmp_path / "b.out"
            main(["-o", str(a), *argv])
            main(["-o", str(b), *argv])
            c.check(a.read_bytes() == b.read_bytes(), f"{argv[0]} output differs between runs")
        c.note("exit codes 2, 4, 5 from real processes; byte-identical reruns")
