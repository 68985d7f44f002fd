r"""Two-parameter Mittag-Leffler function on the real axis.

.. math::

    E_{\nu,\beta}(z) = \sum_{k = 0}^\infty \frac{z^k}{\Gamma(\nu k + \beta)},
    \qquad 0 < \nu \le 1, \quad \beta > 0, \quad z \le z_{max}.

Small arguments are summed directly (with compensated summation). On the
negative axis, where the series suffers catastrophic cancellation, the
function is obtained from its integral representation

.. math::

    E_{\nu,\beta}(-x) = \int_0^\infty \frac{r^{(1 - \beta)/\nu} e^{-r^{1/\nu}}}{\nu \pi}
        \frac{r \sin(\pi(1 - \beta)) + x \sin(\pi(1 - \beta + \nu))}
             {r^2 + 2 r x \cos(\nu\pi) + x^2} \, \mathrm{d}r,

valid for :math:`0 < \nu < 1` and :math:`0 < \beta < 1 + \nu`. It is only
used for :math:`\beta \le 1`; larger :math:`\beta` are reduced with
:math:`E_{\nu,\beta}(z) = (E_{\nu,\beta-\nu}(z) - 1/\Gamma(\beta-\nu)) / z`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.special as sps

from lumidecay._quadrature import integrate_panels
from lumidecay.errors import ConvergenceError, DomainError

Array = np.ndarray

#: largest positive argument accepted by :func:`ml_eval`
Z_MAX = 1.0

# the series is only attempted while |z|**(1/nu) stays below this value; the
# largest term then exceeds the result by at most ~exp(4)/nu
_SERIES_GROWTH = 4.0

# bound on the work of the beta -> beta - nu reduction for tiny orders
_MAX_BETA_STEPS = 100000

# cap on the uniform panels of the integral; below nu ~ 0.1 the structure
# near the cut-off is resolved by geometric grading instead
_MAX_PANELS = 200

_EPS = float(np.finfo(np.float64).eps)

# exp(-_EXP_CUTOFF) is negligible against any double-precision result
_EXP_CUTOFF = 60.0

# the integral path aims this much below the requested tolerance
_HEADROOM = 1.0e-3

# orders at or below this use the algebraic expansion when it is accurate;
# the integral would need thousands of panels there
_ASYMPTOTIC_MAX_NU = 0.02

# most terms of the algebraic expansion that are ever summed
_ASYMPTOTIC_MAX_TERMS = 4096


@dataclass(frozen=True)
class MLParams:
    r"""Orders :math:`(\nu, \beta)` and rate :math:`\lambda` of a Mittag-Leffler decay."""

    nu: float
    beta: float = 1.0
    lam: float = 1.0
    """Rate (inverse time) used by :func:`ml_decay`."""

    def __post_init__(self) -> None:
        if not 0.0 < self.nu <= 1.0:
            raise DomainError(f"nu must be in (0, 1]: got {self.nu}")
        if not self.beta > 0.0:
            raise DomainError(f"beta must be positive: got {self.beta}")
        if not self.lam >= 0.0:
            raise DomainError(f"lambda must be non-negative: got {self.lam}")


@dataclass(frozen=True)
class EvalConfig:
    series_cutoff: float = 5.0
    """Largest :math:`|z|` for which the power series is attempted."""
    max_terms: int = 2000
    """Maximum number of series terms."""
    abs_tol: float = 1.0e-12
    rel_tol: float = 1.0e-10

    def __post_init__(self) -> None:
        if self.max_terms < 16:
            raise DomainError(f"max_terms must be >= 16: got {self.max_terms}")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise DomainError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise DomainError("abs_tol and rel_tol cannot both be zero")
        if not self.series_cutoff > 0:
            raise DomainError(
                f"series_cutoff must be positive: got {self.series_cutoff}"
            )

    def target(self, value: Array | float) -> Array | float:
        return np.maximum(self.abs_tol, self.rel_tol * np.abs(value))


DEFAULT_CONFIG = EvalConfig()


# {{{ series


def _series(nu: float, beta: float, z: Array, cfg: EvalConfig) -> tuple[Array, Array]:
    """Kahan-summed power series; returns values and a rounding-error bound.

    Entries that have not converged within ``cfg.max_terms`` terms get an
    infinite error bound.
    """
    total = np.zeros_like(z)
    comp = np.zeros_like(z)
    abs_total = np.zeros_like(z)
    zk = np.ones_like(z)
    absz = np.abs(z)
    # index past which the term magnitudes decrease monotonically
    peak = np.max(absz) ** (1.0 / nu) if z.size else 0.0

    eps = np.finfo(np.float64).eps
    done = np.zeros(z.shape, dtype=bool)
    for k in range(cfg.max_terms):
        term = zk * sps.rgamma(nu * k + beta)

        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        abs_total += np.abs(term)

        if nu * k + beta > peak + 1.0:
            done = np.abs(term) <= 0.25 * eps * np.abs(total)
            if np.all(done):
                break
        zk = zk * z

    # each term carries a few ulps from the power and the reciprocal gamma
    return total, np.where(done, 8.0 * eps * abs_total, np.inf)


def _series_feasible(nu: float, beta: float, absz: Array, cfg: EvalConfig) -> Array:
    """Whether the last affordable series term is already negligible.

    For small *nu* the terms decay only like ``|z|^k`` and the series can need
    far more than ``cfg.max_terms`` terms even for ``|z| < 1``.
    """
    k = cfg.max_terms - 1
    eps = np.finfo(np.float64).eps
    with np.errstate(divide="ignore"):
        last = k * np.log(absz) - sps.gammaln(nu * k + beta)
    return last < math.log(1.0e-3 * eps)


# }}}


# {{{ integral representation


def _sinpi(a: float) -> float:
    """sin(pi a) with the argument reduced exactly before scaling by pi.

    ``math.sin(math.pi * a)`` near an integer *a* has an absolute error of
    about 1e-16, which is large relative to the result as nu -> 1.
    """
    n = round(a)
    r = a - n  # exact for the moderate arguments used here
    value = math.sin(math.pi * r)
    return -value if n % 2 else value


def _integral_negative(nu: float, beta: float, x: float, cfg: EvalConfig) -> float:
    """E_{nu,beta}(-x) for 0 < nu < 1, 0 < beta < 1 + nu and x > 0."""
    gamma = (1.0 - beta) / nu
    s1 = _sinpi(1.0 - beta)
    s2 = _sinpi((1.0 - beta) + nu)
    c = -_sinpi(nu - 0.5)
    # s1 + s2 = 2 sin(pi (1 - beta + nu / 2)) cos(pi nu / 2), which vanishes
    # as nu -> 1 and is needed to full relative accuracy near u = 0
    s12 = 2.0 * _sinpi((1.0 - beta) + 0.5 * nu) * _sinpi(0.5 * (1.0 - nu))
    # 1 + cos(nu pi), computed without cancellation for nu -> 1
    c1 = 2.0 * math.sin(0.5 * math.pi * (1.0 - nu)) ** 2
    logx = math.log(x)
    if nu < 1.0e3 * _EPS * max(1.0, abs(logx)):
        # the cut-off at u = -ln x is sharper than the spacing of doubles
        raise ConvergenceError(
            f"order nu = {nu:.3e} is too small to resolve at z = {-x:.6g}"
        )
    # x^gamma exp((1 + gamma) u) is formed in log space: for small nu both
    # factors overflow separately while their product stays bounded
    norm = 1.0 / (nu * math.pi)

    # substitute r = x exp(u): the pole pair of the rational factor sits at
    # u = +-i pi (1 - nu) and exp(-r^(1/nu)) is negligible beyond u_hi
    u_hi = nu * math.log(_EXP_CUTOFF) - logx
    u_lo = min(u_hi, 0.0) - 18.0

    def integrand(u: Array) -> Array:
        eu = np.exp(u)
        expo = np.exp(gamma * (logx + u) + u - np.exp((logx + u) / nu))
        em1 = np.expm1(u)
        return norm * expo * (em1 * s1 + s12) / (em1**2 + 2.0 * c1 * eu)

    # panels: about 0.5 * nu wide (at most _MAX_PANELS of them), graded
    # towards the cut-off at u = -ln x, where exp(-r^(1/nu)) switches on,
    # and towards the near-pole at u = 0
    n = max(2, min(_MAX_PANELS, math.ceil((u_hi - u_lo) / (0.5 * nu))))
    width = (u_hi - u_lo) / n
    edges = [np.linspace(u_lo, u_hi, n + 1)]
    steps = nu * 2.0 ** np.arange(-6, 9 + max(0, math.ceil(math.log2(width / nu))))
    edges.append(-logx + np.concatenate([-steps, [0.0], steps]))
    if u_lo < 0.0 < u_hi:
        d = math.pi * (1.0 - nu)
        graded = d * 2.0 ** np.arange(0, 64)
        graded = graded[graded < width]
        edges.append(np.concatenate([-graded, [0.0], graded]))
    edges = np.unique(np.clip(np.concatenate(edges), u_lo, u_hi))

    # tail below u_lo from the small-u expansion of the integrand
    a1 = 1.0 + gamma
    e1 = math.exp(gamma * (logx + u_lo) + u_lo)
    tail = norm * (
        s2 * e1 / a1
        + (s1 - 2.0 * c * s2) * e1 * math.exp(u_lo) / (a1 + 1.0)
        - s2 * e1 * math.exp((logx + u_lo) / nu) / (a1 + 1.0 / nu)
    )

    value, _ = integrate_panels(
        integrand,
        edges,
        abs_tol=_HEADROOM * cfg.abs_tol,
        rel_tol=_HEADROOM * cfg.rel_tol,
    )
    return value + tail


def _asymptotic_negative(nu: float, beta: float, x: float, cfg: EvalConfig) -> float | None:
    r"""E_{nu,beta}(-x) from the algebraic expansion, or None if it is not accurate.

    .. math::

        E_{\nu,\beta}(-x) \sim \sum_{k \ge 1} \frac{(-1)^{k+1} x^{-k}}{\Gamma(\beta - \nu k)}

    has no exponential part on the negative axis for ``nu < 1``. The sum is
    truncated at its smallest term (whose size is about ``exp(-x^(1/nu))``),
    which also serves as the error estimate.
    """
    logx = math.log(x)
    if logx / nu < math.log(_EXP_CUTOFF) or logx * _ASYMPTOTIC_MAX_TERMS < 40.0:
        return None

    k = np.arange(1, _ASYMPTOTIC_MAX_TERMS + 1, dtype=np.float64)
    arg = beta - nu * k
    neg = arg <= 0.0
    # 1 / Gamma(a) = Gamma(1 - a) sin(pi a) / pi for a <= 0; the sine is
    # dropped from the envelope so that it is smooth across the poles
    log_env = -k * logx + np.where(
        neg, sps.gammaln(np.where(neg, 1.0 - arg, 1.0)) - math.log(math.pi),
        -sps.gammaln(np.where(neg, 1.0, arg)),
    )
    n = np.rint(arg)
    sin_pi = np.sin(math.pi * (arg - n)) * np.where(n % 2 == 0, 1.0, -1.0)
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    with np.errstate(over="ignore"):
        env = np.exp(log_env)
        terms = sign * env * np.where(neg, sin_pi, 1.0)
    partial = np.cumsum(terms)

    # stop before the first term that either grows again (past the smallest
    # term) or no longer changes the partial sum
    rising = (arg[1:] <= -1.0) & (log_env[1:] > log_env[:-1])
    settled = env[1:] <= 0.1 * _EPS * np.abs(partial[:-1])
    stops = np.flatnonzero(rising | settled)
    if stops.size == 0:
        return None
    m = int(stops[0]) + 1
    value = float(partial[m - 1])
    if not (math.isfinite(value) and env[m] <= _HEADROOM * cfg.target(value)):
        return None
    return value


def _integral_nu1(beta: float, x: float, cfg: EvalConfig) -> float:
    """E_{1,beta}(-x) for beta > 1 and x > 0.

    Uses E_{1,beta}(-x) = 1/Gamma(beta) int_0^1 exp(-x (1 - v^(1/(beta - 1)))) dv,
    which follows from the Beta-integral form after removing the endpoint
    singularity with the substitution 1 - s = v^(beta - 1).
    """
    p = 1.0 / (beta - 1.0)

    def integrand(v: Array) -> Array:
        return np.exp(-x * (1.0 - v**p))

    # the mass concentrates at v = 1 on a scale ~ 1 / (p x)
    scale = min(0.5, 1.0 / (p * x))
    graded = 1.0 - scale * 2.0 ** -np.arange(0, 40)
    edges = np.unique(np.concatenate([[0.0, 1.0], np.linspace(0.0, 1.0, 9), graded]))
    value, _ = integrate_panels(
        integrand,
        edges,
        abs_tol=_HEADROOM * cfg.abs_tol,
        rel_tol=_HEADROOM * cfg.rel_tol,
    )
    return value * sps.rgamma(beta)


def _negative_large(nu: float, beta: float, x: float, cfg: EvalConfig) -> float:
    """E_{nu,beta}(-x) away from the series region."""
    if nu == 1.0:
        if beta == 1.0:
            return math.exp(-x)
        if beta > 1.0:
            return _integral_nu1(beta, x, cfg)
        # raise beta by one: E_{1,b}(z) = 1/Gamma(b) + z E_{1,b+1}(z)
        return sps.rgamma(beta) - x * _integral_nu1(beta + 1.0, x, cfg)

    if nu <= _ASYMPTOTIC_MAX_NU:
        value = _asymptotic_negative(nu, beta, x, cfg)
        if value is not None:
            return value

    # the integral representation degenerates as beta -> 1 + nu (both the
    # numerator and the decay rate at u -> -inf vanish), so keep beta <= 1
    steps = max(0, math.ceil((beta - 1.0) / nu - 1e-12))
    if steps > _MAX_BETA_STEPS:
        raise ConvergenceError(
            f"beta = {beta} needs {steps} reduction steps at nu = {nu}; "
            f"at most {_MAX_BETA_STEPS} are supported"
        )
    b0 = beta - steps * nu
    value = _integral_negative(nu, b0, x, cfg)
    for j in range(1, steps + 1):
        b = b0 + j * nu
        value = (value - sps.rgamma(b - nu)) / (-x)
    return value


# }}}


def _ml_array(nu: float, beta: float, z: Array, cfg: EvalConfig) -> Array:
    out = np.empty_like(z)
    absz = np.abs(z)

    if nu == 1.0 and beta == 1.0:
        return np.exp(z)

    with np.errstate(over="ignore", invalid="ignore"):
        growth = absz ** (1.0 / nu)
    in_series = (z >= 0.0) | (
        (absz <= cfg.series_cutoff)
        & (growth <= _SERIES_GROWTH)
        & _series_feasible(nu, beta, absz, cfg)
    )

    rest = ~in_series
    if np.any(in_series):
        vals, err = _series(nu, beta, z[in_series], cfg)
        bad = err > cfg.target(vals)
        positive = bad & (z[in_series] >= 0.0)
        if np.any(positive & np.isinf(err)):
            raise ConvergenceError(
                f"Mittag-Leffler series did not converge in {cfg.max_terms} terms"
            )
        if np.any(positive):
            raise ConvergenceError(
                "Mittag-Leffler series lost accuracy for a positive argument"
            )
        out[in_series] = vals
        idx = np.flatnonzero(in_series)[bad]
        rest[idx] = True

    for i in np.flatnonzero(rest):
        out[i] = _negative_large(nu, beta, float(-z[i]), cfg)

    return out


def ml_eval(
    params: MLParams, z: float | Array, config: EvalConfig | None = None
) -> float | Array:
    r"""Evaluate :math:`E_{\nu,\beta}(z)`.

    :arg z: a scalar or an array of arguments, all at most :data:`Z_MAX`.
    :returns: a float for scalar input, otherwise an array of the same shape.
    :raises DomainError: for arguments above :data:`Z_MAX` or non-finite input.
    :raises ConvergenceError: if neither the series nor the integral
        representation reaches the tolerance in *config*.
    """
    cfg = DEFAULT_CONFIG if config is None else config
    zz = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(zz)):
        raise DomainError("arguments must be finite")
    if np.any(zz > Z_MAX):
        raise DomainError(f"arguments must be <= {Z_MAX}: got max {np.max(zz)}")

    out = _ml_array(params.nu, params.beta, zz.ravel(), cfg).reshape(zz.shape)
    if zz.ndim == 0:
        return float(out)
    return out


def ml_decay(
    params: MLParams, t: float | Array, config: EvalConfig | None = None
) -> float | Array:
    r"""Normalized decay :math:`E_{\nu,\beta}(-(\lambda t)^\nu)` for :math:`t \ge 0`."""
    tt = np.asarray(t, dtype=np.float64)
    if np.any(tt < 0):
        raise DomainError("times must be non-negative")
    return ml_eval(params, -((params.lam * tt) ** params.nu), config)
