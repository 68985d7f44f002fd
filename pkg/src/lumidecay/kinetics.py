r"""Rate equations that generate the hyperbolic decay laws.

All problems are integrated in normalized form :math:`I = N / N_0`, starting
from :math:`I(0) = 1`, with the classical fixed-step fourth-order Runge-Kutta
scheme:

* :class:`NonlinearOrder`: :math:`\dot I = -(p / \tau_0) I^{1 + 1/p}`;
* :class:`TimeDependentRate`: :math:`\dot I = -w(t) I` with
  :math:`w(t) = (p / \tau_0) / (1 + t / \tau_0)`;
* :class:`CurrentApprox`: the normalized current :math:`y = i / i_0` of a
  superconducting loop, :math:`-L \dot y = R_n\, c(y)\, e^{-(1 - y)^{q}}`
  with prefactor :math:`c(y) = y` (or :math:`1` when frozen at its initial
  value) and exponent :math:`q = 1` (linearized) or :math:`q = 3/2`.

The first two both have the solution :math:`(1 + t/\tau_0)^{-p}`.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Union

import numpy as np

from lumidecay.errors import DomainError, StepError
from lumidecay.timeseries import TimeSeries

Array = np.ndarray

#: how far a trajectory may leave (0, 1] before the step is deemed too large
RANGE_SLACK = 1.0e-9


def _positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be positive: got {value}")


@dataclass(frozen=True)
class NonlinearOrder:
    p: float
    tau0: float

    def __post_init__(self) -> None:
        _positive(p=self.p, tau0=self.tau0)

    @property
    def k(self) -> float:
        """Rate constant of :math:`\\dot N = -k N^{1 + 1/p}`."""
        return self.p / self.tau0

    def rhs(self, t: float, y: float) -> float:
        return -self.k * y ** (1.0 + 1.0 / self.p)


@dataclass(frozen=True)
class TimeDependentRate:
    p: float
    tau0: float

    def __post_init__(self) -> None:
        _positive(p=self.p, tau0=self.tau0)

    def rate(self, t: float) -> float:
        return (self.p / self.tau0) / (1.0 + t / self.tau0)

    def rhs(self, t: float, y: float) -> float:
        return -self.rate(t) * y


@dataclass(frozen=True)
class CurrentApprox:
    i0: float = 1.0
    Rn: float = 1.0
    L: float = 1.0
    exponent: str = "linear"
    """``"linear"`` for :math:`e^{-(1 - y)}`, ``"three_halves"`` for
    :math:`e^{-(1 - y)^{3/2}}`."""
    prefactor: str = "constant"
    r"""``"constant"`` freezes the prefactor at :math:`y(0) = 1`, for which
    :math:`1 - \ln(1 + t/\tau_0)` is exact; ``"current"`` keeps :math:`y(t)`."""

    def __post_init__(self) -> None:
        _positive(i0=self.i0, Rn=self.Rn, L=self.L)
        if self.exponent not in ("linear", "three_halves"):
            raise DomainError(f"unknown exponent form: {self.exponent!r}")
        if self.prefactor not in ("current", "constant"):
            raise DomainError(f"unknown prefactor form: {self.prefactor!r}")

    @property
    def tau0(self) -> float:
        return self.L / self.Rn

    def rhs(self, t: float, y: float) -> float:
        deficit = max(1.0 - y, 0.0)
        power = deficit if self.exponent == "linear" else deficit**1.5
        c = y if self.prefactor == "current" else 1.0
        return -c * math.exp(-power) / self.tau0


ProblemKind = Union[NonlinearOrder, TimeDependentRate, CurrentApprox]


@dataclass(frozen=True)
class KineticsProblem:
    kind: ProblemKind
    t_end: float
    step: float
    """Requested step; rounded so that it divides ``t_end`` exactly."""
    initial: float = 1.0

    def __post_init__(self) -> None:
        _positive(t_end=self.t_end, step=self.step)
        if self.initial != 1.0:
            raise DomainError(
                f"normalized problems start at 1: got initial = {self.initial}"
            )

    @property
    def steps(self) -> int:
        return max(1, round(self.t_end / self.step))


def rk4(
    rhs: Callable[[float, float], float], y0: float, t_end: float, n: int
) -> tuple[Array, Array]:
    """Classical Runge-Kutta with *n* equal steps on ``[0, t_end]``."""
    h = t_end / n
    t = np.linspace(0.0, t_end, n + 1)
    y = np.empty(n + 1)
    y[0] = y0
    yi = y0
    for i in range(n):
        ti = t[i]
        k1 = rhs(ti, yi)
        k2 = rhs(ti + 0.5 * h, yi + 0.5 * h * k1)
        k3 = rhs(ti + 0.5 * h, yi + 0.5 * h * k2)
        k4 = rhs(ti + h, yi + h * k3)
        yi = yi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not (-RANGE_SLACK < yi <= 1.0 + RANGE_SLACK):
            raise StepError(
                f"trajectory left (0, 1] at t = {t[i + 1]:.6g} (value {yi:.6g}); "
                f"reduce the step (h = {h:.3g})"
            )
        y[i + 1] = yi
    return t, y


def integrate(problem: KineticsProblem) -> TimeSeries:
    """Integrate *problem* and return the sampled trajectory.

    :raises StepError: if the trajectory leaves :math:`(0, 1]` by more than
        :data:`RANGE_SLACK`, which signals a step that is too large (or, for
        the frozen-prefactor current model, a window past its zero crossing).
    """
    kind = problem.kind

    def rhs(t: float, y: float) -> float:
        # fractional powers of a slightly negative overshoot are undefined
        return kind.rhs(t, max(y, 0.0))

    t, y = rk4(rhs, problem.initial, problem.t_end, problem.steps)
    return TimeSeries(t, y)


def current_discrepancy(problem: KineticsProblem) -> TimeSeries:
    r"""Integrated current minus the closed form :math:`1 - \ln(1 + t / \tau_0)`.

    The closed form solves the frozen-prefactor, linear-exponent equation
    exactly; for the other variants this returns the discrepancy curve.
    """
    kind = problem.kind
    if not isinstance(kind, CurrentApprox):
        raise DomainError("current_discrepancy needs a CurrentApprox problem")
    series = integrate(problem)
    closed = 1.0 - np.log1p(series.t / kind.tau0)
    return TimeSeries(series.t, series.intensity - closed)


def observed_order(errors: Array, ratio: float = 2.0) -> Array:
    """Convergence orders ``log(e_i / e_{i+1}) / log(ratio)`` from step halving."""
    e = np.asarray(errors, dtype=np.float64)
    return np.log(e[:-1] / e[1:]) / math.log(ratio)
