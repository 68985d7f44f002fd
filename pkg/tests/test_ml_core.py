from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import ORACLE_ML, SCALED_ERFC, complete_monotonicity_violations
from lumidecay import ml_core
from lumidecay.errors import ConvergenceError, DomainError
from lumidecay.ml_core import (
    DEFAULT_CONFIG,
    Z_MAX,
    EvalConfig,
    MLParams,
    ml_decay,
    ml_eval,
)
from lumidecay.reference_oracle import oracle_ml, oracle_scaled_erfc

orders = st.floats(min_value=0.05, max_value=1.0)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


# {{{ examples


def test_exponential_case() -> None:
    assert ml_eval(MLParams(1.0, 1.0), -1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)


def test_zero_argument() -> None:
    assert ml_eval(MLParams(0.7), 0.0) == 1.0


def test_half_order_matches_scaled_erfc() -> None:
    # E_{1/2,1}(-x) = exp(x^2) erfc(x), erfc from an independent Decimal series
    ref = oracle_scaled_erfc(1.0)
    assert rel_err(ml_eval(MLParams(0.5), -1.0), ref) < 1e-13
    assert ref == SCALED_ERFC[1.0]


def test_half_order_large_argument_matches_oracle() -> None:
    ref = oracle_ml(0.5, 1.0, -50.0)
    assert rel_err(ml_eval(MLParams(0.5), -50.0), ref) < 1e-10


def test_ml_decay_examples() -> None:
    assert ml_decay(MLParams(1.0, 1.0, lam=1.0), 2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)
    for nu in (0.1, 0.5, 0.9, 1.0):
        assert ml_decay(MLParams(nu), 0.0) == 1.0
    assert rel_err(ml_decay(MLParams(0.5), 1.0), SCALED_ERFC[1.0]) < 1e-13


def test_ml_decay_uses_rate() -> None:
    p = MLParams(0.6, 1.0, lam=2.5)
    assert ml_decay(p, 0.8) == ml_eval(p, -(2.0**0.6))


# }}}


# {{{ domain


@pytest.mark.parametrize(
    "kwargs",
    [
        {"nu": 0.0},
        {"nu": -0.5},
        {"nu": 1.5},
        {"nu": 0.5, "beta": 0.0},
        {"nu": 0.5, "beta": -1.0},
        {"nu": 0.5, "lam": -1.0},
        {"nu": float("nan")},
    ],
)
def test_invalid_params(kwargs: dict[str, float]) -> None:
    with pytest.raises(DomainError):
        MLParams(**kwargs)


@pytest.mark.parametrize("z", [Z_MAX + 1e-9, 5.0, float("nan"), float("-inf")])
def test_invalid_arguments(z: float) -> None:
    with pytest.raises(DomainError):
        ml_eval(MLParams(0.5), z)


def test_negative_time_rejected() -> None:
    with pytest.raises(DomainError):
        ml_decay(MLParams(0.5), -1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"max_terms": 15},
        {"abs_tol": 0.0, "rel_tol": 0.0},
        {"abs_tol": -1.0},
        {"series_cutoff": 0.0},
    ],
)
def test_invalid_config(kwargs: dict[str, float]) -> None:
    with pytest.raises(DomainError):
        EvalConfig(**kwargs)


def test_convergence_error_when_series_budget_is_too_small() -> None:
    # positive arguments can only use the series
    with pytest.raises(ConvergenceError):
        ml_eval(MLParams(0.5), 1.0, EvalConfig(max_terms=16))


# }}}


# {{{ properties


def test_exponential_reduction() -> None:
    z = np.linspace(-30.0, 0.0, 301)
    err = np.abs(ml_eval(MLParams(1.0), z) - np.exp(z))
    assert np.max(err) <= 10 * DEFAULT_CONFIG.abs_tol


@given(nu=orders)
def test_normalization(nu: float) -> None:
    assert ml_eval(MLParams(nu), 0.0) == 1.0


@given(nu=orders, x=st.floats(min_value=0.0, max_value=1.0e3))
@settings(max_examples=60, deadline=None)
def test_values_in_unit_interval(nu: float, x: float) -> None:
    value = ml_eval(MLParams(nu), -x)
    assert 0.0 < value <= 1.0


@given(nu=st.floats(min_value=0.1, max_value=1.0))
@settings(max_examples=20, deadline=None)
def test_monotone_decay(nu: float) -> None:
    x = np.geomspace(1e-4, 1e2, 120)
    values = ml_eval(MLParams(nu), -x)
    assert np.all(np.diff(values) < 0)


@pytest.mark.parametrize("nu", [0.3, 0.5, 0.7, 0.9])
def test_complete_monotonicity(nu: float) -> None:
    grid = np.geomspace(1e-3, 1e3, 200)
    bad = complete_monotonicity_violations(lambda x: ml_eval(MLParams(nu), -x), grid)
    assert bad == []


def test_complete_monotonicity_check_detects_violations() -> None:
    # 1 / (1 + x^2) is monotone but its second derivative changes sign
    grid = np.geomspace(1e-3, 1e3, 200)
    bad = complete_monotonicity_violations(lambda x: 1.0 / (1.0 + x**2), grid)
    assert any(order == 2 for _, order in bad)


@pytest.mark.parametrize(("nu", "z"), sorted(ORACLE_ML))
def test_oracle_equivalence_frozen(nu: float, z: float) -> None:
    assert rel_err(ml_eval(MLParams(nu), z), ORACLE_ML[nu, z]) <= 1e-10


@pytest.mark.parametrize("nu", [0.1, 0.3, 0.6, 0.9, 0.999])
@pytest.mark.parametrize("beta", [0.3, 1.0, 1.7, 2.3])
def test_oracle_equivalence_general_beta(nu: float, beta: float) -> None:
    for z in (-0.5, -2.0, -7.0, -40.0, -150.0, 0.5, 1.0):
        ref = oracle_ml(nu, beta, z)
        assert rel_err(ml_eval(MLParams(nu, beta), z), ref) <= 1e-10, (nu, beta, z)


def test_beta_equal_nu_near_one() -> None:
    # the integral representation is at its most delicate as nu -> 1
    for z in (-5.0, -30.0, -199.0):
        ref = oracle_ml(0.999, 0.999, z)
        assert rel_err(ml_eval(MLParams(0.999, 0.999), z), ref) <= 1e-10


def test_array_matches_scalar() -> None:
    z = np.array([[-0.1, -3.0], [-20.0, 0.5]])
    values = ml_eval(MLParams(0.4, 1.2), z)
    assert values.shape == z.shape
    for idx in np.ndindex(z.shape):
        assert values[idx] == ml_eval(MLParams(0.4, 1.2), float(z[idx]))


def test_scalar_returns_float() -> None:
    assert isinstance(ml_eval(MLParams(0.5), -1.0), float)


@pytest.mark.parametrize("nu", [0.02, 0.005, 4e-4])
@pytest.mark.parametrize("beta", [0.3, 0.8, 1.0])
def test_small_order_expansion_matches_integral(nu: float, beta: float) -> None:
    # two independent routes: the algebraic expansion used for tiny orders
    # and the integral representation it short-cuts
    for x in (1.5, 3.0, 30.0):
        fast = ml_core._asymptotic_negative(nu, beta, x, DEFAULT_CONFIG)
        assert fast is not None
        slow = ml_core._integral_negative(nu, beta, x, DEFAULT_CONFIG)
        assert rel_err(fast, slow) <= 1e-11
        assert ml_eval(MLParams(nu, beta), -x) == fast


def test_small_order_expansion_declines_when_inaccurate() -> None:
    # |x|^(1/nu) too small for the smallest term to reach the tolerance
    assert ml_core._asymptotic_negative(0.02, 1.0, 1.05, DEFAULT_CONFIG) is None
    assert ml_core._asymptotic_negative(0.001, 1.0, 1.001, DEFAULT_CONFIG) is None


@pytest.mark.parametrize("x", [0.998, 1.0003, 1.2])
def test_small_order_panel_layout(monkeypatch: pytest.MonkeyPatch, x: float) -> None:
    # the graded layout must agree with a brute-force uniform one
    nu = 4e-4
    value = ml_core._integral_negative(nu, 1.0, x, DEFAULT_CONFIG)
    monkeypatch.setattr(ml_core, "_MAX_PANELS", 4000)
    brute = ml_core._integral_negative(nu, 1.0, x, DEFAULT_CONFIG)
    assert rel_err(value, brute) <= 1e-11


def test_order_one_ulp_below_one() -> None:
    # sin(pi a) must be reduced exactly, or this lands near 0.0209
    nu = 1.0 - 2.0**-53
    for x in (0.5, 4.35):
        assert rel_err(ml_eval(MLParams(nu), -x), math.exp(-x)) <= 1e-10
    # far out the algebraic tail 1 / (x Gamma(1 - nu)) ~ 1e-18 dominates exp(-x)
    assert rel_err(ml_eval(MLParams(nu), -100.0), oracle_ml(nu, 1.0, -100.0)) <= 1e-10


def test_tiny_order_limits() -> None:
    # beta = 2 would need 4e5 reduction steps
    with pytest.raises(ConvergenceError, match="reduction steps"):
        ml_eval(MLParams(5e-6, 2.0), -1.005)
    # the cut-off is narrower than the spacing of doubles
    with pytest.raises(ConvergenceError, match="too small"):
        ml_eval(MLParams(1e-14), -1.005)


def test_positive_arguments() -> None:
    for nu in (0.25, 0.5, 1.0):
        ref = oracle_ml(nu, 1.0, 1.0)
        assert rel_err(ml_eval(MLParams(nu), 1.0), ref) <= 1e-12
    assert ml_eval(MLParams(1.0), 0.75) == pytest.approx(math.exp(0.75), rel=1e-15)


# }}}
