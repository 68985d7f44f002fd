r"""Closed-form normalized decay laws.

All laws are normalized so that :math:`I(0) = 1`:

* Becquerel: :math:`I(t) = (1 + t / \tau_0)^{-p}`;
* stretched hyperbola: :math:`I(t) = E_{\nu,1}(-\ln^\nu(1 + t / \tau_0))`,
  which reduces to the hyperbola :math:`1 / (1 + t / \tau_0)` at :math:`\nu = 1`;
* its first-order truncation :math:`1 - \ln^\nu(1 + t / \tau_0) / \Gamma(\nu + 1)`;
* the superconducting current decay :math:`1 - \ln(1 + t / \tau_0)`;
* a bi-exponential :math:`a_1 e^{-k_1 t} + a_2 e^{-k_2 t}`.

Every function accepts a scalar or an array of times and returns a float or
an array of the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import singledispatch
from typing import Union

import numpy as np

from lumidecay.errors import DomainError
from lumidecay.ml_core import EvalConfig, MLParams, ml_eval

Array = np.ndarray

#: empirical range of the Becquerel exponent
P_RANGE = (1.0, 2.0)


def _times(t: float | Array) -> tuple[Array, bool]:
    tt = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(tt)):
        raise DomainError("times must be finite")
    if np.any(tt < 0):
        raise DomainError(f"times must be non-negative: got min {np.min(tt)}")
    return tt, tt.ndim == 0


def _out(value: Array, scalar: bool) -> float | Array:
    return float(value) if scalar else value


# {{{ parameters


@dataclass(frozen=True)
class BecquerelParams:
    r"""Exponent :math:`p` and time constant :math:`\tau_0` of the Becquerel law."""

    p: float
    tau0: float
    strict: bool = field(default=True, compare=False)
    """If true, *p* is restricted to :data:`P_RANGE`; see :meth:`relaxed`."""

    kind = "becquerel"

    def __post_init__(self) -> None:
        if not self.tau0 > 0:
            raise DomainError(f"tau0 must be positive: got {self.tau0}")
        if not self.p > 0:
            raise DomainError(f"p must be positive: got {self.p}")
        if self.strict and not P_RANGE[0] <= self.p <= P_RANGE[1]:
            raise DomainError(
                f"p must be in [{P_RANGE[0]}, {P_RANGE[1]}]: got {self.p} "
                "(use BecquerelParams.relaxed for other exponents)"
            )

    @classmethod
    def relaxed(cls, p: float, tau0: float) -> BecquerelParams:
        """Accept any ``p > 0``, e.g. for fitted values."""
        return cls(p, tau0, strict=False)

    @property
    def in_empirical_range(self) -> bool:
        return P_RANGE[0] <= self.p <= P_RANGE[1]


@dataclass(frozen=True)
class StretchedParams:
    r"""Order :math:`\nu \in (0, 1]` and time constant :math:`\tau_0`."""

    nu: float
    tau0: float

    kind = "stretched"

    def __post_init__(self) -> None:
        if not 0.0 < self.nu <= 1.0:
            raise DomainError(f"nu must be in (0, 1]: got {self.nu}")
        if not self.tau0 > 0:
            raise DomainError(f"tau0 must be positive: got {self.tau0}")


@dataclass(frozen=True)
class CurrentDecayParams:
    r"""Circuit constants of the current decay; :math:`\tau_0 = L / R_n`."""

    i0: float
    L: float
    Rn: float
    tau0: float = field(init=False)

    kind = "current"

    def __post_init__(self) -> None:
        for name in ("i0", "L", "Rn"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be positive: got {value}")
        object.__setattr__(self, "tau0", self.L / self.Rn)

    @classmethod
    def from_tau0(cls, tau0: float, i0: float = 1.0) -> CurrentDecayParams:
        """Unit resistance and inductance ``tau0``."""
        return cls(i0=i0, L=tau0, Rn=1.0)


@dataclass(frozen=True)
class ArrheniusParams:
    deltaE: float
    kB: float
    T: float

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise DomainError(f"T must be positive: got {self.T}")
        if not self.kB > 0:
            raise DomainError(f"kB must be positive: got {self.kB}")
        if not self.deltaE >= 0:
            raise DomainError(f"deltaE must be non-negative: got {self.deltaE}")


@dataclass(frozen=True)
class BiExponentialParams:
    r"""Amplitudes and rates of :math:`a_1 e^{-k_1 t} + a_2 e^{-k_2 t}`."""

    a1: float
    k1: float
    a2: float
    k2: float

    kind = "biexp"

    def __post_init__(self) -> None:
        if not (self.k1 > 0 and self.k2 > 0):
            raise DomainError(f"rates must be positive: got {self.k1}, {self.k2}")
        if not (self.a1 >= 0 and self.a2 >= 0):
            raise DomainError(
                f"amplitudes must be non-negative: got {self.a1}, {self.a2}"
            )
        if abs(self.a1 + self.a2 - 1.0) > 1.0e-12:
            raise DomainError(
                f"amplitudes must sum to 1: got {self.a1} + {self.a2}"
            )

    @classmethod
    def normalized(cls, a1: float, k1: float, k2: float) -> BiExponentialParams:
        return cls(a1, k1, 1.0 - a1, k2)


DecayModel = Union[
    BecquerelParams, StretchedParams, CurrentDecayParams, BiExponentialParams
]

# }}}


# {{{ laws


def becquerel_intensity(params: BecquerelParams, t: float | Array) -> float | Array:
    r""":math:`(1 + t / \tau_0)^{-p}`."""
    tt, scalar = _times(t)
    return _out((1.0 + tt / params.tau0) ** -params.p, scalar)


def stretched_intensity(
    params: StretchedParams, t: float | Array, config: EvalConfig | None = None
) -> float | Array:
    r""":math:`E_{\nu,1}(-\ln^\nu(1 + t / \tau_0))`."""
    tt, scalar = _times(t)
    log_arg = np.log1p(tt / params.tau0)
    value = ml_eval(MLParams(params.nu), -(log_arg**params.nu), config)
    return _out(np.asarray(value), scalar)


def stretched_derivative(
    params: StretchedParams, t: float | Array, config: EvalConfig | None = None
) -> float | Array:
    r"""Time derivative of :func:`stretched_intensity`.

    Uses :math:`\frac{d}{dL} E_{\nu,1}(-L^\nu) = -L^{\nu - 1} E_{\nu,\nu}(-L^\nu)`
    with :math:`L = \ln(1 + t / \tau_0)`. For :math:`\nu < 1` this diverges
    like :math:`t^{\nu - 1}` as :math:`t \to 0^+`; ``t = 0`` returns ``-inf``.
    """
    tt, scalar = _times(t)
    nu = params.nu
    log_arg = np.log1p(tt / params.tau0)
    if nu == 1.0:
        dlog = -np.exp(-log_arg)
    else:
        with np.errstate(divide="ignore"):
            dlog = np.asarray(
                -(log_arg ** (nu - 1.0))
                * ml_eval(MLParams(nu, nu), -(log_arg**nu), config)
            )
    return _out(dlog / (params.tau0 + tt), scalar)


def stretched_series_approx(params: StretchedParams, t: float | Array) -> float | Array:
    r"""First-order truncation :math:`1 - \ln^\nu(1 + t/\tau_0) / \Gamma(\nu + 1)`.

    Not clipped: the truncation becomes negative at large times.
    """
    tt, scalar = _times(t)
    log_arg = np.log1p(tt / params.tau0)
    return _out(1.0 - log_arg**params.nu / math.gamma(params.nu + 1.0), scalar)


def validity_horizon(params: CurrentDecayParams) -> float:
    r"""Time :math:`\tau_0 (e - 1)` at which the current decay reaches zero."""
    return params.tau0 * (math.e - 1.0)


def current_decay(params: CurrentDecayParams, t: float | Array) -> float | Array:
    r"""Normalized current :math:`i(t) / i_0 = 1 - \ln(1 + t / \tau_0)`.

    :raises DomainError: beyond :func:`validity_horizon`, where the
        approximation would turn negative.
    """
    tt, scalar = _times(t)
    horizon = validity_horizon(params)
    if np.any(tt > horizon):
        raise DomainError(
            f"current decay is only valid for t <= tau0 (e - 1) = {horizon}: "
            f"got {np.max(tt)}"
        )
    # rounding can push the value a few ulps below zero at the horizon
    value = np.maximum(1.0 - np.log1p(tt / params.tau0), 0.0)
    return _out(value, scalar)


def arrhenius_rate(params: ArrheniusParams) -> float:
    r"""Bare Arrhenius factor :math:`\exp(-\Delta E / (k_B T))` (no prefactor)."""
    return math.exp(-params.deltaE / (params.kB * params.T))


def biexponential_intensity(
    params: BiExponentialParams, t: float | Array
) -> float | Array:
    tt, scalar = _times(t)
    value = params.a1 * np.exp(-params.k1 * tt) + params.a2 * np.exp(-params.k2 * tt)
    return _out(value, scalar)


# }}}


# {{{ dispatch


@singledispatch
def eval_model(model: object, t: float | Array) -> float | Array:
    """Evaluate any :data:`DecayModel` at times *t*."""
    raise NotImplementedError(f"unsupported decay model: {type(model).__name__}")


@eval_model.register(BecquerelParams)
def _(model: BecquerelParams, t: float | Array) -> float | Array:
    return becquerel_intensity(model, t)


@eval_model.register(StretchedParams)
def _(model: StretchedParams, t: float | Array) -> float | Array:
    return stretched_intensity(model, t)


@eval_model.register(CurrentDecayParams)
def _(model: CurrentDecayParams, t: float | Array) -> float | Array:
    return current_decay(model, t)


@eval_model.register(BiExponentialParams)
def _(model: BiExponentialParams, t: float | Array) -> float | Array:
    return biexponential_intensity(model, t)


# }}}
