r"""Least-squares fitting and comparison of decay models.

Parameters are fitted in an unconstrained space: orders and amplitudes in
:math:`(0, 1)` through a logistic map, time constants, exponents and rates
through a logarithm. The minimizer is a Levenberg-Marquardt iteration with
Marquardt scaling and Nielsen's damping update. Without an explicit initial
guess every fit is started from a fixed list of deterministic seeds and the
best result (smallest residual, then lowest seed index) is kept.

Model kinds:

========== ======================= ===============================================
kind       parameters              law
========== ======================= ===============================================
becquerel  ``p, tau0``             :math:`(1 + t/\tau_0)^{-p}`
stretched  ``nu, tau0``            :math:`E_{\nu,1}(-\ln^\nu(1 + t/\tau_0))`
current    ``tau0``                :math:`1 - \ln(1 + t/\tau_0)`
biexp      ``a1, k1, k2``          :math:`a_1 e^{-k_1 t} + (1 - a_1) e^{-k_2 t}`
========== ======================= ===============================================
"""

from __future__ import annotations

import logging
import math
import os
import warnings
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from lumidecay.decay_laws import (
    BecquerelParams,
    BiExponentialParams,
    CurrentDecayParams,
    DecayModel,
    StretchedParams,
)
from lumidecay.errors import DomainError, InsufficientData, LumidecayError, NonConvergence
from lumidecay.ml_core import MLParams, ml_eval
from lumidecay.timeseries import TimeSeries

log = logging.getLogger(__name__)

Array = np.ndarray

#: fitted orders above this value are reported as sitting on the nu = 1 boundary
NU_BOUNDARY = 0.999

#: admissible overshoot of noisy normalized intensities above 1
INTENSITY_SLACK = 0.05

#: per-sample variance below which residuals are indistinguishable from the
#: evaluation error of the models (Mittag-Leffler absolute tolerance squared)
VARIANCE_FLOOR = 1.0e-24

#: step (in transformed space) of the difference quotient in nu
FD_STEP = 1.0e-6


@dataclass(frozen=True)
class LMConfig:
    max_iterations: int = 200
    gtol: float = 1.0e-8
    """Converged when the gradient norm drops below this value."""
    ftol: float = 1.0e-10
    """Converged when an accepted step lowers the residual norm by less than
    this relative amount."""
    xtol: float = 1.0e-14
    """Converged when the step is this small relative to the parameters."""

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise DomainError(
                f"max_iterations must be >= 1: got {self.max_iterations}"
            )


DEFAULT_LM = LMConfig()


# {{{ parameter transforms


def _logistic(x: Array) -> Array:
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


# }}}


# {{{ models


@dataclass(frozen=True)
class ModelKind:
    name: str
    names: tuple[str, ...]
    """Parameter names in the order used by ``values``."""
    bounded: tuple[bool, ...]
    """True for parameters in (0, 1) (logistic map), false for positive ones."""
    evaluate: Callable[[Array, Array], Array]
    jacobian: Callable[[Array, Array, Array], Array]
    """``jacobian(t, values, theta)`` with respect to the transformed
    parameters."""
    build: Callable[[Array], DecayModel]
    seeds: Callable[[Array], list[tuple[float, ...]]]

    @property
    def n_params(self) -> int:
        return len(self.names)

    def to_values(self, theta: Array) -> Array:
        theta = np.asarray(theta, dtype=np.float64)
        mask = np.array(self.bounded)
        with np.errstate(over="ignore"):
            return np.where(mask, _logistic(theta), np.exp(theta))

    def to_theta(self, values: Sequence[float]) -> Array:
        out = []
        for v, b in zip(values, self.bounded):
            if b:
                if not 0.0 < v < 1.0:
                    raise DomainError(f"initial value {v} must lie in (0, 1)")
                out.append(_logit(v))
            else:
                if not v > 0.0:
                    raise DomainError(f"initial value {v} must be positive")
                out.append(math.log(v))
        return np.array(out)

    def chain(self, values: Array) -> Array:
        """Derivatives of the parameter values with respect to theta."""
        mask = np.array(self.bounded)
        return np.where(mask, values * (1.0 - values), values)


def _scale(t: Array) -> float:
    m = float(np.median(t))
    return m if m > 0 else float(np.max(t))


def _grid_seeds(first: Sequence[float], t: Array) -> list[tuple[float, ...]]:
    m = _scale(t)
    seeds = [(a, tau) for a in first for tau in (m / 3.0, m, 3.0 * m)]
    return seeds[:8]


# becquerel


def _becquerel_eval(t: Array, v: Array) -> Array:
    return (1.0 + t / v[1]) ** -v[0]


def _becquerel_jac(t: Array, v: Array, theta: Array) -> Array:
    p, tau0 = v
    f = (1.0 + t / tau0) ** -p
    dp = -np.log1p(t / tau0) * f
    dtau = p * t / (tau0 * (tau0 + t)) * f
    return np.column_stack([dp * p, dtau * tau0])


# stretched


def _stretched_eval(t: Array, v: Array) -> Array:
    nu, tau0 = v
    log_arg = np.log1p(t / tau0)
    return np.asarray(ml_eval(MLParams(min(nu, 1.0)), -(log_arg**nu)))


def _stretched_jac(t: Array, v: Array, theta: Array) -> Array:
    nu, tau0 = v
    # d/dnu has no closed form: central difference in transformed space
    hi = _stretched_eval(t, np.array([_logistic(theta[0] + FD_STEP), tau0]))
    lo = _stretched_eval(t, np.array([_logistic(theta[0] - FD_STEP), tau0]))
    dtheta_nu = (hi - lo) / (2.0 * FD_STEP)

    log_arg = np.log1p(t / tau0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if nu == 1.0:
            df_dlog = -np.exp(-log_arg)
        else:
            df_dlog = -(log_arg ** (nu - 1.0)) * np.asarray(
                ml_eval(MLParams(nu, nu), -(log_arg**nu))
            )
        dtau = df_dlog * (-t / (tau0 * (tau0 + t)))
    dtau = np.where(t == 0, 0.0, dtau)
    return np.column_stack([dtheta_nu, dtau * tau0])


# current


def _current_eval(t: Array, v: Array) -> Array:
    return 1.0 - np.log1p(t / v[0])


def _current_jac(t: Array, v: Array, theta: Array) -> Array:
    tau0 = v[0]
    return (t / (tau0 * (tau0 + t)) * tau0)[:, None]


def _current_seeds(t: Array) -> list[tuple[float, ...]]:
    m = _scale(t)
    return [(m / 3.0,), (m,), (3.0 * m,)]


# bi-exponential


def _biexp_eval(t: Array, v: Array) -> Array:
    a1, k1, k2 = v
    return a1 * np.exp(-k1 * t) + (1.0 - a1) * np.exp(-k2 * t)


def _biexp_jac(t: Array, v: Array, theta: Array) -> Array:
    a1, k1, k2 = v
    e1 = np.exp(-k1 * t)
    e2 = np.exp(-k2 * t)
    return np.column_stack([
        (e1 - e2) * a1 * (1.0 - a1),
        -a1 * t * e1 * k1,
        -(1.0 - a1) * t * e2 * k2,
    ])


def _biexp_seeds(t: Array) -> list[tuple[float, ...]]:
    m = _scale(t)
    rates = [(3.0 / m, 1.0 / (3.0 * m)), (10.0 / m, 1.0 / m), (1.0 / m, 0.1 / m)]
    return [(a, k1, k2) for a in (0.25, 0.5, 0.75) for k1, k2 in rates][:8]


MODEL_KINDS: dict[str, ModelKind] = {
    "becquerel": ModelKind(
        "becquerel",
        ("p", "tau0"),
        (False, False),
        _becquerel_eval,
        _becquerel_jac,
        lambda v: BecquerelParams.relaxed(float(v[0]), float(v[1])),
        lambda t: _grid_seeds((1.0, 1.5, 2.0), t),
    ),
    "stretched": ModelKind(
        "stretched",
        ("nu", "tau0"),
        (True, False),
        _stretched_eval,
        _stretched_jac,
        lambda v: StretchedParams(min(float(v[0]), 1.0), float(v[1])),
        lambda t: _grid_seeds((0.3, 0.6, 0.9), t),
    ),
    "current": ModelKind(
        "current",
        ("tau0",),
        (False,),
        _current_eval,
        _current_jac,
        lambda v: CurrentDecayParams.from_tau0(float(v[0])),
        _current_seeds,
    ),
    "biexp": ModelKind(
        "biexp",
        ("a1", "k1", "k2"),
        (True, False, False),
        _biexp_eval,
        _biexp_jac,
        lambda v: BiExponentialParams.normalized(float(v[0]), float(v[1]), float(v[2])),
        _biexp_seeds,
    ),
}

#: preference among models with equal parameter counts (simpler laws first)
_NESTING = {"current": 0, "becquerel": 1, "stretched": 2, "biexp": 3}


def get_kind(kind: str) -> ModelKind:
    try:
        return MODEL_KINDS[kind]
    except KeyError:
        raise DomainError(
            f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}"
        ) from None


def model_values(model: DecayModel) -> tuple[str, dict[str, float]]:
    """Kind tag and fitted-parameter mapping of a decay model."""
    if isinstance(model, BecquerelParams):
        return "becquerel", {"p": model.p, "tau0": model.tau0}
    if isinstance(model, StretchedParams):
        return "stretched", {"nu": model.nu, "tau0": model.tau0}
    if isinstance(model, CurrentDecayParams):
        return "current", {"tau0": model.tau0}
    if isinstance(model, BiExponentialParams):
        return "biexp", {
            "a1": model.a1, "k1": model.k1, "a2": model.a2, "k2": model.k2,
        }
    raise DomainError(f"unsupported decay model: {type(model).__name__}")


# }}}


# {{{ results


@dataclass(frozen=True)
class FitResult:
    model: DecayModel
    kind: str
    residual_norm: float
    """Weighted Euclidean norm of the residuals."""
    iterations: int
    converged: bool
    param_stderr: Array | None
    """Gauss-Newton standard errors in the order of the kind's parameters."""
    aic: float
    gradient_norm: float
    """Norm of J^T r with respect to the natural parameters."""
    n_params: int
    seed_index: int
    """Index of the multi-start seed that produced the result (-1 for a user
    supplied initial guess)."""
    boundary: bool = False
    """True for stretched fits with nu above :data:`NU_BOUNDARY`."""
    message: str = ""

    @property
    def values(self) -> dict[str, float]:
        return model_values(self.model)[1]


@dataclass(frozen=True)
class Comparison:
    ranked: tuple[FitResult, ...]
    failures: dict[str, str] = field(default_factory=dict)
    """Reasons for kinds that could not be fitted."""


def aic(residual_norm: float, n: int, k: int) -> float:
    """Akaike criterion ``n ln(rss / n) + 2 k``, with the variance floored."""
    variance = max(residual_norm**2 / n, VARIANCE_FLOOR)
    return n * math.log(variance) + 2.0 * k


# }}}


# {{{ Levenberg-Marquardt


@dataclass(frozen=True)
class _Run:
    theta: Array
    residual_norm: float
    iterations: int
    converged: bool
    message: str


def _residual(kind: ModelKind, t: Array, y: Array, sw: Array, theta: Array) -> Array:
    values = kind.to_values(theta)
    with np.errstate(all="ignore"):
        r = sw * (kind.evaluate(t, values) - y)
    return r


def _jacobian(kind: ModelKind, t: Array, sw: Array, theta: Array) -> Array:
    values = kind.to_values(theta)
    with np.errstate(all="ignore"):
        return sw[:, None] * kind.jacobian(t, values, theta)


def levenberg_marquardt(
    kind: ModelKind,
    data: TimeSeries,
    theta0: Array,
    config: LMConfig = DEFAULT_LM,
) -> _Run:
    t = data.t
    y = data.intensity
    sw = np.ones_like(t) if data.weights is None else np.sqrt(data.weights)

    theta = np.array(theta0, dtype=np.float64)
    try:
        r = _residual(kind, t, y, sw, theta)
        J = _jacobian(kind, t, sw, theta)
    except LumidecayError as exc:
        return _Run(theta, math.inf, 0, False, f"initial guess not evaluable: {exc}")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(J))):
        return _Run(theta, math.inf, 0, False, "initial guess gives non-finite model")
    cost = 0.5 * float(r @ r)

    A = J.T @ J
    g = J.T @ r
    mu = 1.0e-3
    growth = 2.0
    message = "maximum number of iterations reached"
    converged = False

    it = 0
    for it in range(1, config.max_iterations + 1):
        if np.linalg.norm(g) < config.gtol:
            converged, message = True, "gradient below tolerance"
            break

        diag = np.maximum(np.diag(A), 1.0e-12 * max(float(np.max(np.diag(A))), 1e-300))
        try:
            step = np.linalg.solve(A + mu * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            mu *= growth
            growth *= 2.0
            continue

        if np.linalg.norm(step) <= config.xtol * (np.linalg.norm(theta) + config.xtol):
            converged, message = True, "step below tolerance"
            break

        trial = theta + step
        # a model that cannot be evaluated at the trial point rejects the step
        try:
            r_new = _residual(kind, t, y, sw, trial)
        except LumidecayError:
            r_new = np.full_like(r, np.nan)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
        predicted = 0.5 * float(step @ (mu * diag * step - g))
        rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
        if rho > 0:
            try:
                J_new = _jacobian(kind, t, sw, trial)
            except LumidecayError:
                rho = -1.0

        if rho > 0:
            decrease = (math.sqrt(2 * cost) - math.sqrt(2 * cost_new)) / max(
                math.sqrt(2 * cost), 1e-300
            )
            theta, r, cost, J = trial, r_new, cost_new, J_new
            A = J.T @ J
            g = J.T @ r
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            growth = 2.0
            if decrease < config.ftol:
                converged, message = True, "relative decrease below tolerance"
                break
        else:
            mu *= growth
            growth *= 2.0
            if mu > 1.0e30:
                # no descent left within rounding: an exact fit has stalled
                # on the noise floor of the model evaluation
                converged = cost <= 0.5 * VARIANCE_FLOOR * t.size
                message = (
                    "residual at evaluation noise floor"
                    if converged
                    else "damping diverged without progress"
                )
                break

    return _Run(theta, math.sqrt(2.0 * cost), it, converged, message)


# }}}


# {{{ fit


def max_workers() -> int:
    """Thread cap from ``LUMIDECAY_THREADS`` (default: CPU count, at most 8)."""
    env = os.environ.get("LUMIDECAY_THREADS")
    if env is None or env.strip() == "":
        return max(1, min(8, os.cpu_count() or 1))
    try:
        n = int(env)
    except ValueError:
        raise DomainError(f"LUMIDECAY_THREADS must be an integer: got {env!r}") from None
    if n < 1:
        raise DomainError(f"LUMIDECAY_THREADS must be >= 1: got {n}")
    return n


def _validate(data: TimeSeries, kind: ModelKind) -> None:
    need = kind.n_params + 3
    if len(data) < need:
        raise InsufficientData(
            f"{kind.name} needs at least {need} samples: got {len(data)}"
        )
    y = data.intensity
    if np.any(y <= 0) or np.any(y > 1.0 + INTENSITY_SLACK):
        raise DomainError(
            f"normalized intensities must lie in (0, {1.0 + INTENSITY_SLACK}]"
        )
    if np.any(data.t < 0):
        raise DomainError("times must be non-negative")


def _finish(
    kind: ModelKind, data: TimeSeries, run: _Run, seed_index: int
) -> FitResult:
    values = kind.to_values(run.theta)
    t = data.t
    sw = np.ones_like(t) if data.weights is None else np.sqrt(data.weights)
    r = _residual(kind, t, data.intensity, sw, run.theta)
    # parameters saturated by their transform (e.g. nu rounded to 1) have no
    # natural-space derivative and are left out of the gradient
    chain = kind.chain(values)
    free = chain > 0
    Jn = _jacobian(kind, t, sw, run.theta)[:, free] / chain[free][None, :]
    grad = float(np.linalg.norm(Jn.T @ r))

    n, k = t.size, kind.n_params
    stderr = None
    with np.errstate(all="ignore"):
        A = Jn.T @ Jn
        if np.all(free) and np.all(np.isfinite(A)) and np.linalg.cond(A) < 1.0e14:
            cov = run.residual_norm**2 / (n - k) * np.linalg.inv(A)
            stderr = np.sqrt(np.abs(np.diag(cov)))

    boundary = kind.name == "stretched" and values[0] > NU_BOUNDARY
    return FitResult(
        model=kind.build(values),
        kind=kind.name,
        residual_norm=run.residual_norm,
        iterations=run.iterations,
        converged=run.converged,
        param_stderr=stderr,
        aic=aic(run.residual_norm, n, k),
        gradient_norm=grad,
        n_params=k,
        seed_index=seed_index,
        boundary=bool(boundary),
        message=run.message,
    )


def fit(
    data: TimeSeries,
    kind: str,
    init: Sequence[float] | dict[str, float] | None = None,
    *,
    config: LMConfig = DEFAULT_LM,
) -> FitResult:
    """Fit one model kind to *data*.

    :arg init: optional initial parameters (sequence in the kind's order or a
        mapping by name); if absent the deterministic seeds are all tried.
    :raises InsufficientData: with fewer than ``n_params + 3`` samples.
    :raises DomainError: for unknown kinds or intensities outside
        ``(0, 1.05]``.

    Emits a :class:`~lumidecay.errors.NonConvergence` warning and returns the
    best iterate with ``converged=False`` if no start converges.
    """
    mk = get_kind(kind)
    _validate(data, mk)

    if init is None:
        seeds = mk.seeds(data.t)
        indices = list(range(len(seeds)))
    else:
        if isinstance(init, dict):
            missing = [name for name in mk.names if name not in init]
            if missing:
                raise DomainError(f"initial guess lacks {missing}")
            init = [init[name] for name in mk.names]
        if len(init) != mk.n_params:
            raise DomainError(
                f"{kind} takes {mk.n_params} parameters: got {len(init)}"
            )
        seeds = [tuple(float(v) for v in init)]
        indices = [-1]

    thetas = [mk.to_theta(s) for s in seeds]

    def run(theta: Array) -> _Run:
        return levenberg_marquardt(mk, data, theta, config)

    workers = min(max_workers(), len(thetas))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run, thetas))
    else:
        runs = [run(theta) for theta in thetas]

    # deterministic merge: smallest residual, then lowest seed index
    order = sorted(range(len(runs)), key=lambda i: (runs[i].residual_norm, i))
    best = order[0]
    if not math.isfinite(runs[best].residual_norm):
        raise DomainError(f"no seed produced a finite {kind} model")

    result = _finish(mk, data, runs[best], indices[best])
    log.debug(
        "fit %s: seed %d, residual %.3e, %d iterations (%s)",
        kind, result.seed_index, result.residual_norm, result.iterations,
        result.message,
    )
    if not result.converged:
        warnings.warn(
            NonConvergence(
                f"{kind} fit did not converge: {result.message}; "
                "returning the best iterate"
            ),
            stacklevel=2,
        )
    return result


def rank(results: Sequence[FitResult]) -> list[FitResult]:
    """Order fits by AIC with the tie and boundary rules.

    Fits within 2 AIC units count as tied and are ordered by parameter count,
    then by the nesting order current < becquerel < stretched < biexp. A
    stretched fit on the nu = 1 boundary duplicates the hyperbola and is
    placed directly after a Becquerel fit if one is present.
    """
    out = sorted(results, key=lambda r: r.aic)

    def simpler(a: FitResult, b: FitResult) -> bool:
        return (b.n_params, _NESTING[b.kind]) < (a.n_params, _NESTING[a.kind])

    changed = True
    while changed:
        changed = False
        for i in range(len(out) - 1):
            a, b = out[i], out[i + 1]
            if abs(a.aic - b.aic) <= 2.0 and simpler(a, b):
                out[i], out[i + 1] = b, a
                changed = True

    kinds = [r.kind for r in out]
    if "becquerel" in kinds and "stretched" in kinds:
        i = kinds.index("stretched")
        j = kinds.index("becquerel")
        if out[i].boundary and i < j:
            out.insert(j, out.pop(i))
    return out


def compare_models(
    data: TimeSeries,
    kinds: Sequence[str] = ("becquerel", "stretched", "current", "biexp"),
    *,
    config: LMConfig = DEFAULT_LM,
) -> Comparison:
    """Fit every kind in *kinds* and rank them with :func:`rank`.

    Kinds whose fit raises are left out of the ranking; their error
    messages are collected in :attr:`Comparison.failures`.
    """
    for kind in kinds:
        get_kind(kind)

    results = []
    failures: dict[str, str] = {}
    for kind in kinds:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergence)
                results.append(fit(data, kind, config=config))
        except LumidecayError as exc:
            failures[kind] = str(exc)

    return Comparison(tuple(rank(results)), failures)


# }}}
