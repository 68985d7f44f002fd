"""Shared helpers and frozen reference values for the test-suite."""

from __future__ import annotations

import math

import numpy as np

from lumidecay.decay_laws import (
    BecquerelParams,
    BiExponentialParams,
    CurrentDecayParams,
    StretchedParams,
    stretched_intensity,
)
from lumidecay.timeseries import TimeSeries

# E_{nu,1}(z) from reference_oracle.oracle_ml (extended precision); the same
# values are regenerated in test_reference_oracle.py and were cross-checked
# against an independent mpmath series at 400 digits
ORACLE_ML = {
    (0.25, 0.0): 1.0,
    (0.25, -0.001): 0.9988978646407801,
    (0.25, -1.0): 0.4638527608017133,
    (0.25, -10.0): 0.07623703523972164,
    (0.25, -100.0): 0.008104346228169487,
    (0.5, 0.0): 1.0,
    (0.5, -0.001): 0.9988726200811514,
    (0.5, -1.0): 0.427583576155807,
    (0.5, -10.0): 0.05614099274382259,
    (0.5, -100.0): 0.005641613782989433,
    (0.75, 0.0): 1.0,
    (0.75, -0.001): 0.9989126866085425,
    (0.75, -1.0): 0.39310830281575404,
    (0.75, -10.0): 0.030643250976059636,
    (0.75, -100.0): 0.0027866210194390935,
    (1.0, 0.0): 1.0,
    (1.0, -0.001): 0.999000499833375,
    (1.0, -1.0): 0.36787944117144233,
    (1.0, -10.0): 4.5399929762484854e-05,
    (1.0, -100.0): 3.720075976020836e-44,
}

# exp(x^2) erfc(x) = E_{1/2,1}(-x) from reference_oracle.oracle_scaled_erfc
SCALED_ERFC = {
    0.1: 0.8964569799691267,
    1.0: 0.427583576155807,
    3.0: 0.17900115118138996,
}

#: relative offsets of the divided-difference stencil around each grid point
CM_STENCIL = np.array([0.2, 0.6, 1.0, 1.4, 1.8])


def divided_differences(x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    """Newton divided differences of orders ``1 .. len(x) - 1``.

    *x* has shape ``(m,)`` and *y* shape ``(npoints, m)``; every order is
    returned as an array of shape ``(npoints, m - order)``.
    """
    out = []
    d = y
    for order in range(1, x.shape[-1]):
        d = (d[..., 1:] - d[..., :-1]) / (x[..., order:] - x[..., :-order])
        out.append(d)
    return out


def complete_monotonicity_violations(f, grid: np.ndarray) -> list[tuple[float, int]]:
    """Grid points where a divided difference of order 1..4 has the wrong sign.

    By the mean value theorem the order-n divided difference on the stencil
    equals f^(n)(xi) / n! for some xi inside it, so (-1)^n times it must be
    positive for a completely monotone f.
    """
    x = grid[:, None] * CM_STENCIL[None, :]
    y = np.asarray(f(x.ravel())).reshape(x.shape)
    bad = []
    for order, d in enumerate(divided_differences(x, y), start=1):
        signed = (-1) ** order * d
        for i in np.flatnonzero(~np.all(signed > 0, axis=1)):
            bad.append((float(grid[i]), order))
    return bad


# {{{ fitting fixtures

#: Monte Carlo bound on |nu_fit - nu| for 1% noise; see noisy_stretched
NOISY_NU_BOUND = 0.005


def log_grid(tau0: float = 1.0, n: int = 50) -> np.ndarray:
    return tau0 * np.logspace(-2.0, 2.0, n)


def current_grid(tau0: float = 1.0, n: int = 50) -> np.ndarray:
    # the current law reaches zero at tau0 (e - 1)
    return tau0 * np.geomspace(1e-2, 0.99 * (math.e - 1.0), n)


def noisy_stretched(seed: int) -> TimeSeries:
    """nu = 0.6, tau0 = 1 on 200 log points with 1% multiplicative noise.

    Over seeds 0..99 the fitted nu deviates by at most 2.3e-3 (sigma 9.3e-4).
    """
    t = np.logspace(-2.0, 2.0, 200)
    rng = np.random.default_rng(seed)
    y = stretched_intensity(StretchedParams(0.6, 1.0), t) * (
        1.0 + 0.01 * rng.standard_normal(t.size)
    )
    return TimeSeries(t, np.minimum(y, 1.05))


def rel_errors(fitted: dict[str, float], truth: dict[str, float]) -> float:
    return max(abs(fitted[k] / truth[k] - 1.0) for k in truth)


#: one noiseless data set per model kind (two for each parameterization)
ROUND_TRIP = [
    (BecquerelParams(1.5, 2.0), log_grid(2.0)),
    (BecquerelParams.relaxed(0.7, 0.3), log_grid(0.3)),
    (StretchedParams(0.6, 1.0), log_grid(1.0)),
    (StretchedParams(0.35, 5.0), log_grid(5.0)),
    (CurrentDecayParams.from_tau0(1.0), current_grid(1.0)),
    (CurrentDecayParams.from_tau0(3.0), current_grid(3.0)),
    (BiExponentialParams.normalized(0.4, 2.0, 0.2), log_grid(1.0)),
]

# }}}
