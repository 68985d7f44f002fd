r"""Fractional operator with logarithmic kernel.

For :math:`0 < \nu < 1` the operator acts as

.. math::

    \hat{O}^t_\nu f(t) = \frac{1}{\Gamma(1 - \nu)}
        \int_{(1 - a)/b}^t \ln^{-\nu}\left(\frac{a + bt}{a + b\tau}\right)
        \left[\left(\frac{a}{b} + \tau\right) f'(\tau)\right]
        \frac{b}{a + b\tau} \,\mathrm{d}\tau,

and reduces to :math:`(a/b + t) f'(t)` at :math:`\nu = 1`. It maps
:math:`\ln^\beta(a + bt)` to
:math:`\Gamma(\beta + 1) / \Gamma(\beta + 1 - \nu) \ln^{\beta - \nu}(a + bt)`,
so that :math:`E_{\nu,1}(-\ln^\nu(a + bt))` solves :math:`\hat{O}^t_\nu f = -f`.

The substitution :math:`u = \ln((a + bt) / (a + b\tau))` turns the integral
into

.. math::

    \frac{1}{\Gamma(1 - \nu)} \int_0^U u^{-\nu} g(u) \,\mathrm{d}u,
    \qquad g(u) = \left(\frac{a}{b} + \tau(u)\right) f'(\tau(u)),
    \qquad U = \ln(a + bt).

The kernel singularity at :math:`u = 0` is integrated by a Gauss-Jacobi rule
with weight :math:`u^{-\nu}`. The other end, :math:`u = U`, corresponds to
the lower limit of integration, where :math:`g` may itself be singular (for
the decay solution it behaves like :math:`(U - u)^{\nu - 1}`), so the far
half of the interval is graded geometrically towards :math:`U` and the last
panel uses a Jacobi weight :math:`(U - u)^{e}` for a caller-supplied endpoint
exponent :math:`e`.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from lumidecay._quadrature import gauss_jacobi, gauss_legendre
from lumidecay.decay_laws import (
    StretchedParams,
    stretched_derivative,
    stretched_intensity,
)
from lumidecay.errors import DomainError, QuadratureError

Array = np.ndarray
Function = Callable[[Array], Array]

#: ratio between consecutive graded panels near the lower limit
GRADING_RATIO = 0.2

#: absolute tolerance floor when the derivative is replaced by differences
FD_TOL_FLOOR = 1.0e-6


@dataclass(frozen=True)
class QuadratureConfig:
    panels: int = 2
    """Number of equal panels before grading; the first and last are
    singular, the rest use plain Gauss-Legendre rules."""
    nodes_per_panel: int = 48
    """Gauss nodes per panel; doubled on every refinement."""
    abs_tol: float = 1.0e-10
    """Accepted difference between two successive refinements."""
    max_refinements: int = 4
    """Refinements allowed before :class:`~lumidecay.errors.QuadratureError`."""
    grading_levels: int = 12
    """Geometric panels towards the lower limit; doubled on refinement."""

    def __post_init__(self) -> None:
        if self.panels < 2:
            raise DomainError(f"panels must be >= 2: got {self.panels}")
        if self.nodes_per_panel < 4:
            raise DomainError(
                f"nodes_per_panel must be >= 4: got {self.nodes_per_panel}"
            )
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be positive: got {self.abs_tol}")
        if self.max_refinements < 1:
            raise DomainError(
                f"max_refinements must be >= 1: got {self.max_refinements}"
            )
        if self.grading_levels < 0:
            raise DomainError(
                f"grading_levels must be >= 0: got {self.grading_levels}"
            )


@dataclass(frozen=True)
class LogKernelOperator:
    r"""The operator :math:`\hat{O}^t_\nu` with offset *a* and slope *b*.

    ``nu = 1`` is accepted and evaluated by the local first-order
    reduction :func:`apply_nu1`.
    """

    nu: float
    a: float = 1.0
    b: float = 1.0
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.nu <= 1.0:
            raise DomainError(f"nu must be in (0, 1]: got {self.nu}")
        if not self.b > 0:
            raise DomainError(f"b must be positive: got {self.b}")
        if not math.isfinite(self.a):
            raise DomainError(f"a must be finite: got {self.a}")

    @property
    def lower_limit(self) -> float:
        return (1.0 - self.a) / self.b

    @classmethod
    def for_decay(
        cls, params: StretchedParams, quad: QuadratureConfig | None = None
    ) -> LogKernelOperator:
        r"""Operator with :math:`a = 1, b = 1/\tau_0` matching *params*."""
        return cls(
            params.nu, 1.0, 1.0 / params.tau0, QuadratureConfig() if quad is None else quad
        )


@dataclass(frozen=True)
class OperatorValue:
    value: float
    error: float
    """Difference between the last two refinements."""
    nodes: int
    """Number of evaluations of the derivative used by the last rule."""


# {{{ helpers


def _call(fn: Function, x: Array) -> Array:
    """Evaluate *fn* on an array, falling back to a scalar loop."""
    try:
        out = np.asarray(fn(x), dtype=np.float64)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    x = np.asarray(x, dtype=np.float64)
    flat = [float(fn(float(xi))) for xi in x.ravel()]
    return np.array(flat, dtype=np.float64).reshape(x.shape)


def finite_difference(f: Function, lower: float) -> Function:
    """Second-order difference approximation of ``f'``.

    Central with step ``max(1e-6, 1e-8 |tau|)``, switching to a one-sided
    stencil where the central one would reach below *lower*.
    """

    def df(tau: Array) -> Array:
        tau = np.asarray(tau, dtype=np.float64)
        h = np.maximum(1.0e-6, 1.0e-8 * np.abs(tau))
        safe = tau - h >= lower
        # f is never sampled below the lower limit
        f_lo = _call(f, np.where(safe, tau - h, tau))
        f_mid = _call(f, tau + h)
        f_hi = _call(f, np.where(safe, tau + h, tau + 2.0 * h))
        central = (f_mid - f_lo) / (2.0 * h)
        forward = (-3.0 * f_lo + 4.0 * f_mid - f_hi) / (2.0 * h)
        return np.where(safe, central, forward)

    return df


def _check_time(op: LogKernelOperator, t: float) -> None:
    if not math.isfinite(t) or not t > op.lower_limit:
        raise DomainError(
            f"t must exceed the lower limit {op.lower_limit}: got {t}"
        )


# }}}


# {{{ quadrature


def _rule(
    op: LogKernelOperator,
    g: Callable[[Array, Array], Array],
    upper: float,
    n: int,
    levels: int,
    endpoint_exponent: float,
) -> tuple[float, int]:
    r"""One evaluation of :math:`\int_0^U u^{-\nu} g(u) du` at fixed resolution.

    ``g(u, w)`` receives both ``u`` and ``w = U - u`` so that points near the
    lower limit are located without cancellation.
    """
    nu = op.nu
    edges = np.linspace(0.0, upper, op.quad.panels + 1)

    # first panel: weight u^-nu, i.e. (1 + x)^-nu on [-1, 1]
    h = edges[1]
    x, w = gauss_jacobi(n, 0.0, -nu)
    u = 0.5 * h * (1.0 + x)
    total = (0.5 * h) ** (1.0 - nu) * float(w @ g(u, upper - u))
    count = n

    # remaining panels in terms of the distance to U, graded towards U
    widths = (upper - edges[-2]) * GRADING_RATIO ** np.arange(levels + 1)
    dist = np.concatenate([upper - edges[1:-2], widths])

    xl, wl = gauss_legendre(n)
    far, near = dist[:-1], dist[1:]
    mid = 0.5 * (far + near)
    half = 0.5 * (far - near)
    wd = (mid[:, None] + half[:, None] * xl[None, :]).ravel()
    u = upper - wd
    vals = (u**-nu * g(u, wd)).reshape(far.size, n)
    total += float(np.sum(half * (vals @ wl)))
    count += wd.size

    # last panel: weight (U - u)^e, i.e. (1 - x)^e on [-1, 1]
    d = widths[-1]
    e = endpoint_exponent
    x, w = gauss_jacobi(n, e, 0.0)
    wd = 0.5 * d * (1.0 - x)
    u = upper - wd
    vals = u**-nu * g(u, wd) / wd**e
    total += (0.5 * d) ** (1.0 + e) * float(w @ vals)
    count += n

    return total / math.gamma(1.0 - nu), count


def apply_detailed(
    op: LogKernelOperator,
    f: Function,
    t: float,
    df: Function | None = None,
    *,
    endpoint_exponent: float = 0.0,
) -> OperatorValue:
    """Like :func:`apply`, also returning the refinement error estimate."""
    t = float(t)
    _check_time(op, t)
    if op.nu == 1.0:
        return OperatorValue(apply_nu1(op.a, op.b, f, t, df), 0.0, 1)
    if not endpoint_exponent > -1.0:
        raise DomainError(
            f"endpoint_exponent must exceed -1: got {endpoint_exponent}"
        )

    tol = op.quad.abs_tol
    if df is None:
        df = finite_difference(f, op.lower_limit)
        tol = max(tol, FD_TOL_FLOOR)

    a, b = op.a, op.b
    top = a + b * t
    upper = math.log(top)

    def g(u: Array, w: Array) -> Array:
        # a + b tau = top exp(-u) = exp(w)
        near = w < 0.5 * upper
        scaled = np.where(near, np.exp(w), top * np.exp(-u))
        if a == 1.0:
            offset = np.where(near, np.expm1(w), scaled - 1.0)
        else:
            offset = scaled - a
        return (scaled / b) * _call(df, offset / b)

    n = op.quad.nodes_per_panel
    levels = op.quad.grading_levels
    previous, _ = _rule(op, g, upper, n, levels, endpoint_exponent)
    for _ in range(op.quad.max_refinements):
        n *= 2
        levels = 2 * levels + 2
        value, count = _rule(op, g, upper, n, levels, endpoint_exponent)
        err = abs(value - previous)
        if not math.isfinite(value):
            break
        if err <= tol:
            return OperatorValue(value, err, count)
        previous = value

    raise QuadratureError(
        f"operator quadrature did not reach {tol:.1e} after "
        f"{op.quad.max_refinements} refinements (last difference {err:.3e})"
    )


def apply(
    op: LogKernelOperator,
    f: Function,
    t: float,
    df: Function | None = None,
    *,
    endpoint_exponent: float = 0.0,
) -> float:
    r"""Evaluate :math:`\hat{O}^t_\nu f(t)`.

    :arg f: a function of time; it is only differentiated.
    :arg df: its derivative. If omitted, a finite difference is used and the
        tolerance is raised to at least :data:`FD_TOL_FLOOR`.
    :arg endpoint_exponent: exponent :math:`e > -1` such that
        :math:`(a/b + \tau) f'(\tau)` behaves like :math:`\ln^e(a + b\tau)` at
        the lower limit; ``0`` for functions smooth there.
    :raises DomainError: if *t* is not above the lower limit.
    :raises QuadratureError: if successive refinements disagree by more than
        the configured tolerance.
    """
    return apply_detailed(op, f, t, df, endpoint_exponent=endpoint_exponent).value


# }}}


def apply_nu1(
    a: float, b: float, f: Function, t: float, df: Function | None = None
) -> float:
    r"""First-order reduction :math:`(a/b + t) f'(t)`."""
    if not b > 0:
        raise DomainError(f"b must be positive: got {b}")
    t = float(t)
    lower = (1.0 - a) / b
    if not math.isfinite(t) or not t > lower:
        raise DomainError(f"t must exceed the lower limit {lower}: got {t}")
    if df is None:
        df = finite_difference(f, lower)
    slope = float(_call(df, np.array([t]))[0])
    return (a / b + t) * slope


def _check_decay(op: LogKernelOperator, params: StretchedParams) -> None:
    if op.nu != params.nu:
        raise DomainError(f"operator order {op.nu} != solution order {params.nu}")
    if op.a != 1.0 or not math.isclose(op.b * params.tau0, 1.0, rel_tol=1e-14):
        raise DomainError(
            f"decay equation needs a = 1, b = 1/tau0: got a = {op.a}, b = {op.b}"
        )


def residual_decay_eq(
    op: LogKernelOperator, params: StretchedParams, t: float
) -> float:
    r"""Residual :math:`\hat{O}^t_\nu I(t) + I(t)` of the decay equation.

    :math:`I` is the stretched decay law, which makes the residual vanish up to
    quadrature error.
    """
    _check_decay(op, params)

    def f(tau: Array) -> Array:
        return np.asarray(stretched_intensity(params, tau))

    def df(tau: Array) -> Array:
        return np.asarray(stretched_derivative(params, tau))

    lhs = apply(op, f, t, df, endpoint_exponent=params.nu - 1.0)
    return lhs + float(stretched_intensity(params, t))


def apply_semianalytic(
    op: LogKernelOperator, params: StretchedParams, t: float, terms: int
) -> float:
    r"""Operator applied term by term to the series of the stretched law.

    Each power :math:`L^{\nu k}`, :math:`L = \ln(a + bt)`, maps to
    :math:`\Gamma(\nu k + 1) / \Gamma(\nu (k - 1) + 1) L^{\nu (k - 1)}`, so the
    partial sum is

    .. math::

        \sum_{k = 1}^{n} (-1)^k \frac{L^{\nu (k - 1)}}{\Gamma(\nu (k - 1) + 1)}
        \to -E_{\nu,1}(-L^\nu).

    :raises DomainError: if ``terms`` is too small for the first omitted term
        to drop below the quadrature tolerance.
    """
    _check_decay(op, params)
    if terms < 1:
        raise DomainError(f"terms must be >= 1: got {terms}")
    _check_time(op, t)

    nu = op.nu
    log_arg = math.log(op.a + op.b * t)

    def magnitude(j: int) -> float:
        if j == 0:
            return 1.0
        if log_arg == 0.0:
            return 0.0
        return math.exp(nu * j * math.log(log_arg) - math.lgamma(nu * j + 1.0))

    total = 0.0
    comp = 0.0
    for j in range(terms):
        term = -magnitude(j) if j % 2 == 0 else magnitude(j)
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s

    omitted = magnitude(terms)
    past_peak = nu * terms + 1.0 > log_arg + 1.0
    if not (past_peak and omitted <= op.quad.abs_tol):
        raise DomainError(
            f"{terms} terms are not enough at L = {log_arg:.3g} "
            f"(first omitted term {omitted:.3e})"
        )
    return total
