r"""Extended-precision reference values used by the test-suite.

Everything here is computed with :mod:`decimal` arithmetic so that it is
independent of the double-precision code paths in :mod:`lumidecay.ml_core`
and :mod:`lumidecay.frac_operator`. None of the production modules import
this one.

The Mittag-Leffler reference sums the defining power series

.. math::

    E_{\nu,\beta}(z) = \sum_{k \ge 0} \frac{z^k}{\Gamma(\nu k + \beta)}

with enough guard digits to absorb the cancellation on the negative axis.
When the cancellation becomes astronomically large (roughly
:math:`|z|^{1/\nu} \ge 60`, where the series would need thousands of digits)
it switches to the algebraic expansion

.. math::

    E_{\nu,\beta}(-x) = \sum_{k \ge 1} \frac{(-1)^{k+1} x^{-k}}{\Gamma(\beta - \nu k)},

truncated near its smallest term, where the omitted part is of order
:math:`\exp(-x^{1/\nu})`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache

from lumidecay.errors import DomainError, PrecisionError

#: switch to the algebraic expansion once ``|z|**(1/nu)`` reaches this value
ASYMPTOTIC_THRESHOLD = 60.0


@dataclass(frozen=True)
class BigEval:
    working_precision: int = 40
    """Decimal digits carried in the final result (guard digits are added)."""
    max_terms: int = 20000
    """Upper bound on the number of series terms."""

    def __post_init__(self) -> None:
        if self.working_precision < 30:
            raise DomainError(
                f"working_precision must be >= 30: got {self.working_precision}"
            )
        if self.max_terms < 16:
            raise DomainError(f"max_terms must be >= 16: got {self.max_terms}")


# {{{ decimal elementary functions


@lru_cache(maxsize=16)
def _pi(prec: int) -> Decimal:
    # Chudnovsky would be overkill; this is the recipe from the decimal docs.
    with localcontext() as ctx:
        ctx.prec = prec + 5
        three = Decimal(3)
        lasts, t, s, n, na, d, da = 0, three, 3, 1, 0, 0, 24
        while s != lasts:
            lasts = s
            n, na = n + na, na + 8
            d, da = d + da, da + 32
            t = (t * n) / d
            s += t
        ctx.prec = prec
        return +s


def _sin(x: Decimal, prec: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = prec + 10
        two_pi = 2 * _pi(prec + 10)
        x = x % two_pi
        if x > _pi(prec + 10):
            x -= two_pi
        total = Decimal(0)
        term = x
        n = 1
        x2 = x * x
        while True:
            new = total + term
            if new == total:
                break
            total = new
            term = -term * x2 / ((n + 1) * (n + 2))
            n += 2
        ctx.prec = prec
        return +total


def _sin_pi(s: Decimal, prec: int) -> Decimal:
    """sin(pi*s), exactly zero at integers."""
    r = s % 2
    if r == 0 or r == 1 or r == -1:
        return Decimal(0)
    return _sin(r * _pi(prec + 10), prec)


# Akiyama-Tanigawa state, extended on demand
_AT_ROW: list[Fraction] = []
_BERNOULLI: list[Fraction] = []


def _bernoulli(m: int) -> Fraction:
    while len(_BERNOULLI) <= m:
        n = len(_BERNOULLI)
        _AT_ROW.append(Fraction(1, n + 1))
        for j in range(n, 0, -1):
            _AT_ROW[j - 1] = j * (_AT_ROW[j - 1] - _AT_ROW[j])
        _BERNOULLI.append(_AT_ROW[0])
    return _BERNOULLI[m]


def _lgamma_stirling(y: Decimal, prec: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = prec + 10
        half = Decimal("0.5")
        out = (y - half) * y.ln() - y + half * (2 * _pi(prec + 10)).ln()
        eps = Decimal(10) ** (-(prec + 8))
        y2 = y * y
        ypow = y
        j = 1
        while True:
            b = _bernoulli(2 * j)
            term = Decimal(b.numerator) / Decimal(b.denominator)
            term = term / (2 * j * (2 * j - 1) * ypow)
            out += term
            if abs(term) < eps * abs(out):
                break
            ypow *= y2
            j += 1
            if j > 4 * prec:
                raise PrecisionError("Stirling series did not settle")
        return out


def dec_gamma(x: Decimal | float, prec: int = 50) -> Decimal:
    """Gamma function for positive arguments, to ``prec`` digits."""
    x = Decimal(x)
    if x <= 0:
        raise DomainError(f"dec_gamma expects x > 0: got {x}")
    with localcontext() as ctx:
        ctx.prec = prec + 10
        shift = max(25, prec)
        prod = Decimal(1)
        y = x
        while y < shift:
            prod *= y
            y += 1
        out = _lgamma_stirling(y, prec + 5).exp() / prod
        ctx.prec = prec
        return +out


def dec_rgamma(x: Decimal | float, prec: int = 50) -> Decimal:
    """1/Gamma(x) for any real ``x``; zero at the poles."""
    x = Decimal(x)
    if x > 0:
        with localcontext() as ctx:
            ctx.prec = prec + 5
            return 1 / dec_gamma(x, prec + 5)

    s = _sin_pi(x, prec + 5)
    if s == 0:
        return Decimal(0)
    with localcontext() as ctx:
        ctx.prec = prec + 5
        # reflection: 1/Gamma(x) = Gamma(1 - x) sin(pi x) / pi
        out = dec_gamma(1 - x, prec + 5) * s / _pi(prec + 5)
        ctx.prec = prec
        return +out


def _gamma_sequence(nu: Decimal, beta: Decimal, count: int, prec: int) -> list[Decimal]:
    """Gamma(nu*k + beta) for k = 0..count-1.

    When ``nu = p/q`` with a small denominator the values are generated by the
    recurrence Gamma(x + p) = x (x + 1) ... (x + p - 1) Gamma(x) from ``q``
    seeds; otherwise every value is computed directly.
    """
    q = None
    for cand in range(1, 9):
        if (nu * cand) == (nu * cand).to_integral_value():
            q = cand
            break

    if q is None:
        return [dec_gamma(nu * k + beta, prec) for k in range(count)]

    p = int(nu * q)
    with localcontext() as ctx:
        ctx.prec = prec + 10
        out = [dec_gamma(nu * k + beta, prec + 10) for k in range(min(q, count))]
        for k in range(q, count):
            x = nu * (k - q) + beta
            g = out[k - q]
            for i in range(p):
                g *= x + i
            out.append(g)
        return out


# }}}


# {{{ Mittag-Leffler


@dataclass(frozen=True)
class CertifiedValue:
    value: Decimal
    """Extended-precision value."""
    rel_bound: float
    """Estimated relative error bound of :attr:`value`."""
    method: str
    """Either ``"series"`` or ``"asymptotic"``."""

    def __float__(self) -> float:
        return float(self.value)


def _ml_series_at(
    nu: Decimal, beta: Decimal, z: Decimal, cfg: BigEval, prec: int
) -> tuple[Decimal, Decimal, Decimal]:
    """Sum the series at ``prec`` digits; returns (sum, truncation, rounding)."""
    x = abs(z)
    with localcontext() as ctx:
        ctx.prec = prec
        # grow the term count geometrically until past the peak and the last
        # term is negligible at the working precision
        count = 64
        while True:
            gammas = _gamma_sequence(nu, beta, count, prec)
            total = Decimal(0)
            abs_total = Decimal(0)
            zk = Decimal(1)
            terms = []
            for k in range(count):
                term = zk / gammas[k]
                terms.append(term)
                total += term
                abs_total += abs(term)
                zk *= z

            tail = abs(terms[-1])
            past_peak = tail < abs(terms[-2]) and (
                float(nu) * (count - 1) + float(beta)
                > 2.0 * float(x) ** (1 / float(nu)) + 2
            )
            target = Decimal(10) ** (-(cfg.working_precision + 5)) * abs(total)
            if past_peak and tail < target:
                break
            count *= 2
            if count > cfg.max_terms:
                raise PrecisionError(
                    f"series for E({nu}, {beta}; {z}) needs more than "
                    f"{cfg.max_terms} terms"
                )

        # alternating and decreasing past the peak: the first omitted term
        # bounds the tail; for z > 0 use a geometric bound from the ratio
        first_omitted = abs(zk / dec_gamma(nu * count + beta, prec))
        if z >= 0:
            ratio = first_omitted / tail if tail != 0 else Decimal(0)
            trunc = first_omitted / (1 - ratio) if ratio < 1 else Decimal("Infinity")
        else:
            trunc = first_omitted
        rounding = abs_total * count * Decimal(10) ** (-(prec - 2))
        return total, trunc, rounding


def _ml_series(nu: Decimal, beta: Decimal, z: Decimal, cfg: BigEval) -> CertifiedValue:
    if z < 0:
        lost = float(abs(z)) ** (1.0 / float(nu)) / math.log(10.0)
    else:
        lost = 0.0
    prec = cfg.working_precision + math.ceil(lost) + 10

    for _ in range(4):
        total, trunc, rounding = _ml_series_at(nu, beta, z, cfg, prec)
        if total == 0:
            raise PrecisionError(f"series for E({nu}, {beta}; {z}) cancelled to zero")
        rel_rounding = rounding / abs(total)
        if rel_rounding < Decimal(10) ** (-cfg.working_precision):
            break
        # the result is smaller than anticipated: add the missing digits
        prec += int(rel_rounding.log10()) + cfg.working_precision + 10

    with localcontext() as ctx:
        ctx.prec = cfg.working_precision
        bound = (trunc + rounding) / abs(total)
        return CertifiedValue(+total, float(bound), "series")


def _ml_asymptotic(nu: Decimal, beta: Decimal, x: Decimal, cfg: BigEval) -> CertifiedValue:
    prec = cfg.working_precision + 10
    with localcontext() as ctx:
        ctx.prec = prec
        log_x = x.ln()
        eps = Decimal(10) ** (-(cfg.working_precision + 5))

        total = Decimal(0)
        previous = None
        bound = None
        k = 0
        while True:
            k += 1
            with localcontext() as exact:
                # beta - nu*k must be exact so that the poles are hit exactly
                exact.prec = 400
                arg = beta - nu * k
            # envelope |Gamma(1 - arg)| / pi * x^-k ignores the oscillating
            # sine factor of the reflection formula; once arg <= -1 it is
            # log-convex in k, so its first increase marks the smallest term
            envelope = (-k * log_x).exp()
            if arg <= 0:
                envelope *= dec_gamma(1 - arg, prec) / _pi(prec)
            else:
                envelope *= abs(dec_rgamma(arg, prec))
            if previous is not None and arg <= -1 and envelope > previous:
                bound = envelope
                break
            if total != 0 and envelope < eps * abs(total):
                bound = envelope
                break
            previous = envelope

            term = (-k * log_x).exp() * dec_rgamma(arg, prec)
            total += term if k % 2 == 1 else -term
            if k > cfg.max_terms:
                raise PrecisionError("asymptotic expansion did not settle")

        rel = bound / abs(total)
        ctx.prec = cfg.working_precision
        return CertifiedValue(+total, float(rel), "asymptotic")


def oracle_ml_certified(
    nu: float,
    beta: float,
    z: float,
    cfg: BigEval | None = None,
    *,
    method: str | None = None,
) -> CertifiedValue:
    """Extended-precision :math:`E_{\\nu,\\beta}(z)` with an error estimate.

    :arg method: force ``"series"`` or ``"asymptotic"``; by default the
        cheaper trustworthy branch is selected.
    """
    if cfg is None:
        cfg = BigEval()
    if not 0.0 < nu <= 1.0:
        raise DomainError(f"nu must be in (0, 1]: got {nu}")
    if beta <= 0.0:
        raise DomainError(f"beta must be positive: got {beta}")
    if abs(z) > 200.0:
        raise DomainError(f"|z| must be <= 200: got {z}")

    dnu, dbeta, dz = Decimal(nu), Decimal(beta), Decimal(z)
    if z == 0.0:
        with localcontext() as ctx:
            ctx.prec = cfg.working_precision
            return CertifiedValue(dec_rgamma(dbeta, cfg.working_precision), 0.0, "series")

    if method is None:
        use_asym = (
            z < 0.0
            and nu < 1.0
            and math.log(abs(z)) / nu >= math.log(ASYMPTOTIC_THRESHOLD)
        )
        method = "asymptotic" if use_asym else "series"

    if method == "series":
        return _ml_series(dnu, dbeta, dz, cfg)
    if method == "asymptotic":
        if z >= 0.0 or nu >= 1.0:
            raise DomainError("asymptotic branch requires z < 0 and nu < 1")
        return _ml_asymptotic(dnu, dbeta, -dz, cfg)
    raise ValueError(f"unknown method: {method!r}")


def oracle_ml(nu: float, beta: float, z: float, cfg: BigEval | None = None) -> float:
    """Double-precision rounding of the certified Mittag-Leffler value.

    :raises PrecisionError: if the certified relative bound exceeds ``1e-15``.
    """
    r = oracle_ml_certified(nu, beta, z, cfg)
    if r.rel_bound > 1.0e-15:
        raise PrecisionError(
            f"certified bound {r.rel_bound:.3e} too large for E({nu}, {beta}; {z})"
        )
    return float(r.value)


# }}}


# {{{ erfc


def _erfc_taylor(x: Decimal, prec: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = prec + 20
        x2 = x * x
        term = x
        total = Decimal(0)
        n = 0
        while True:
            contrib = term / (2 * n + 1)
            new = total + contrib
            if new == total:
                break
            total = new
            n += 1
            term = -term * x2 / n
        erf = 2 * total / _pi(prec + 20).sqrt()
        out = 1 - erf
        ctx.prec = prec
        return +out


def _erfc_contfrac(x: Decimal, prec: int, depth: int) -> Decimal:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    with localcontext() as ctx:
        ctx.prec = prec + 10
        half = Decimal("0.5")
        f = x
        for n in range(depth, 0, -1):
            f = x + (n * half) / f
        out = (-x * x).exp() / (_pi(prec + 10).sqrt() * f)
        ctx.prec = prec
        return +out


def oracle_erfc_decimal(
    x: float | Decimal, *, method: str | None = None, prec: int = 50
) -> Decimal:
    """Complementary error function in extended precision.

    :arg method: ``"taylor"`` or ``"contfrac"``; by default Taylor for
        ``x <= 3`` and the continued fraction beyond.
    """
    x = Decimal(x)
    if x < 0:
        raise DomainError(f"oracle_erfc expects x >= 0: got {x}")
    if method is None:
        method = "taylor" if x <= 3 else "contfrac"
    if method == "taylor":
        return _erfc_taylor(x, prec)
    if method == "contfrac":
        if x == 0:
            return Decimal(1)
        # the tail of this fraction converges like exp(-2 x sqrt(2 n))
        depth = int((prec * math.log(10.0) / (2.0 * float(x))) ** 2 / 2.0) + 50
        return _erfc_contfrac(x, prec, depth)
    raise ValueError(f"unknown method: {method!r}")


def oracle_erfc(x: float) -> float:
    return float(oracle_erfc_decimal(x))


def oracle_scaled_erfc(x: float, prec: int = 50) -> float:
    """exp(x^2) erfc(x), which equals E_{1/2,1}(-x)."""
    dx = Decimal(x)
    with localcontext() as ctx:
        ctx.prec = prec
        return float((dx * dx).exp() * oracle_erfc_decimal(dx, prec=prec))


# }}}


# {{{ misc references


def oracle_gamma(x: float) -> float:
    return float(dec_gamma(x, 40))


def oracle_log(x: float) -> float:
    with localcontext() as ctx:
        ctx.prec = 40
        return float(Decimal(x).ln())


def oracle_exp(x: float) -> float:
    with localcontext() as ctx:
        ctx.prec = 40
        return float(Decimal(x).exp())


def oracle_eigen_rhs(nu: float, beta: float, log_arg: float) -> float:
    r"""Closed form :math:`\Gamma(\beta + 1) / \Gamma(\beta + 1 - \nu) L^{\beta - \nu}`.

    ``beta = 0`` is the constant function, whose image is zero; the formula
    does not apply there.
    """
    if not (beta > -1.0 and log_arg > 0.0):
        raise DomainError(f"need beta > -1 and L > 0: got beta = {beta}, L = {log_arg}")
    if beta == 0.0:
        return 0.0
    with localcontext() as ctx:
        ctx.prec = 40
        dnu, dbeta, dl = Decimal(nu), Decimal(beta), Decimal(log_arg)
        ratio = dec_gamma(dbeta + 1, 40) * dec_rgamma(dbeta + 1 - dnu, 40)
        return float(ratio * ((dbeta - dnu) * dl.ln()).exp())


# }}}
