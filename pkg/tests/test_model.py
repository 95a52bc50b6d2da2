import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdlsd.model import (
    CoefficientFamily,
    ProcessModel,
    SpectralParamDistribution,
    TaperSpec,
    arma11_coeff,
    default_q_max,
    effective_h,
    power_transfer,
    psi,
    taper_symbol,
    validate_assumptions,
)

MA1 = CoefficientFamily.ma(1)
IDENT = CoefficientFamily.identity()


def two_atom_ma1(**kw):
    return ProcessModel(MA1, SpectralParamDistribution([[0.2], [0.8]], [0.5, 0.5]), **kw)


# -- transfer functions ---------------------------------------------------------


def test_psi_ma1_at_zero():
    assert psi(MA1, [0.8], 0.0) == pytest.approx(1.8 + 0j, abs=1e-15)


@pytest.mark.parametrize("nu", [0.0, 1.0, np.pi, 2 * np.pi])
def test_psi_identity_is_one(nu):
    assert psi(IDENT, [0.37], nu) == 1 + 0j


def test_psi_arma11_geometric_sum():
    # 1 + (theta + phi) / (1 - phi) = 2.4; the truncated tail is 0.7 * 0.5**30 / 0.5
    val = psi(CoefficientFamily.arma11(q_max=30), [0.5, 0.2], 0.0)
    assert val.real == pytest.approx(2.4, abs=1e-8)
    assert val.imag == 0


@pytest.mark.parametrize("lam,nu,expected", [(0.2, np.pi / 2, 1.04), (0.8, 0.0, 3.24)])
def test_power_transfer_ma1(lam, nu, expected):
    assert power_transfer(MA1, [lam], nu) == pytest.approx(expected, abs=1e-14)


def test_power_transfer_identity():
    nu = np.linspace(0, 2 * np.pi, 7)
    np.testing.assert_array_equal(power_transfer(IDENT, [0.3], nu), np.ones(7))


def test_psi_dimension_mismatch():
    with pytest.raises(ValueError):
        psi(CoefficientFamily.ma(2), [0.5], 0.0)


def test_psi_rejects_frequency_outside_range():
    with pytest.raises(ValueError):
        psi(MA1, [0.5], 7.0)


@given(
    lam=st.lists(st.floats(-2, 2), min_size=3, max_size=3),
    nu=st.floats(0, 2 * np.pi),
)
def test_power_transfer_matches_direct_sum(lam, nu):
    fam = CoefficientFamily.ma(3)
    direct = 1 + sum(l * np.exp(1j * (k + 1) * nu) for k, l in enumerate(lam))
    assert power_transfer(fam, lam, nu) == pytest.approx(abs(direct) ** 2, rel=1e-12, abs=1e-12)
    assert power_transfer(fam, lam, nu) >= 0


@given(phi=st.floats(-0.95, 0.95), theta=st.floats(-2, 2), nu=st.floats(0, 2 * np.pi))
def test_psi_conjugate_symmetry(phi, theta, nu):
    fam = CoefficientFamily.arma11(q_max=40)
    a = psi(fam, [phi, theta], nu)
    b = psi(fam, [phi, theta], 2 * np.pi - nu)
    assert b == pytest.approx(a.conjugate(), abs=1e-9)
    assert power_transfer(fam, [phi, theta], nu) == pytest.approx(
        power_transfer(fam, [phi, theta], 2 * np.pi - nu), rel=1e-9, abs=1e-9)


# -- ARMA(1,1) coefficients --------------------------------------------------------


@pytest.mark.parametrize("lag,expected", [(0, 1.0), (1, 0.7), (2, 0.35), (3, 0.175)])
def test_arma11_coeff(lag, expected):
    assert arma11_coeff(0.5, 0.2, lag) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("lag", [1, 2, 5])
def test_arma11_cancellation(lag):
    assert arma11_coeff(0.5, -0.5, lag) == 0


@pytest.mark.parametrize("phi", [1.0, -1.0, 1.5])
def test_arma11_noncausal_rejected(phi):
    with pytest.raises(ValueError):
        arma11_coeff(phi, 0.1, 1)


def test_arma11_family_matches_scalar_coefficients():
    coef = CoefficientFamily.arma11(q_max=10).coefficients([0.6, -0.3])
    np.testing.assert_allclose(coef, [arma11_coeff(0.6, -0.3, l) for l in range(11)], rtol=1e-15)


def test_default_q_max():
    assert default_q_max(100) == 64
    assert default_q_max(10 ** 6) == 100
    assert default_q_max(300_000) == math.ceil(300_000 ** (1 / 3))


# -- effective transfer ---------------------------------------------------------


def test_effective_h_reduces_to_power_transfer():
    nu = np.linspace(0, 2 * np.pi, 11)
    m = two_atom_ma1()
    np.testing.assert_array_equal(effective_h(m, [0.8], nu), power_transfer(MA1, [0.8], nu))


def test_effective_h_unit_filter():
    nu = np.linspace(0, 2 * np.pi, 11)
    m = two_atom_ma1(filter=[1.0, 0.0, 0.0])
    np.testing.assert_allclose(effective_h(m, [0.2], nu), power_transfer(MA1, [0.2], nu), rtol=1e-14)


def test_effective_h_scaled():
    m = two_atom_ma1(scaling=[2.0, 2.0])
    assert effective_h(m, [0.2], np.pi / 2) == pytest.approx(2.08, abs=1e-14)


def test_filter_response():
    # b = (1, 0.5): zeta(nu) = 1.25 + cos(nu)
    m = two_atom_ma1(filter=[1.0, 0.5])
    nu = np.array([0.0, np.pi / 3, np.pi])
    np.testing.assert_allclose(m.zeta(nu), 1.25 + np.cos(nu), rtol=1e-14)


def test_h_matrix_rows_match_effective_h():
    m = two_atom_ma1(scaling=[1.0, 3.0], filter=[1.0, -0.4])
    nu = np.linspace(0, 2 * np.pi, 9)
    hm = m.h_matrix(nu)
    np.testing.assert_allclose(hm[0], effective_h(m, [0.2], nu), rtol=1e-13)
    np.testing.assert_allclose(hm[1], effective_h(m, [0.8], nu), rtol=1e-13)


def test_scaling_must_be_positive_somewhere():
    with pytest.raises(ValueError):
        two_atom_ma1(scaling=[0.0, 0.0])
    with pytest.raises(ValueError):
        two_atom_ma1(scaling=[-1.0, 1.0])


def test_lambda_bar_two_atom_ma1():
    assert two_atom_ma1().lambda_bar() == pytest.approx(1.8)


def test_model_json_round_trip():
    m = ProcessModel(CoefficientFamily.arma11(q_max=20),
                     SpectralParamDistribution([[0.5, 0.1], [-0.3, 0.4]], [0.25, 0.75]),
                     scaling=[1.0, 2.0], filter=[1.0, 0.3], innovation="rademacher",
                     rotation="random_orthogonal")
    back = ProcessModel.from_json(m.to_json())
    assert back.to_dict() == m.to_dict()
    assert back.digest() == m.digest()
    assert json.loads(m.to_json())["family"]["kind"] == "arma11"


def test_model_rejects_unknown_innovation():
    with pytest.raises(ValueError):
        two_atom_ma1(innovation="cauchy")


# -- tapers -------------------------------------------------------------------------


def test_taper_symbol_geometric_at_zero():
    assert taper_symbol(TaperSpec("geometric", 200, 0.5), 0.0) == pytest.approx(3.0, abs=1e-12)


def test_taper_symbol_geometric_at_pi():
    assert taper_symbol(TaperSpec("geometric", 200, 0.5), np.pi) == pytest.approx(1 / 3, abs=1e-12)


def test_taper_symbol_identity():
    theta = np.linspace(0, 2 * np.pi, 13)
    np.testing.assert_array_equal(taper_symbol(TaperSpec.identity(), theta), np.ones(13))
    zero_table = TaperSpec("custom", 10, table=[0.0] * 9)
    np.testing.assert_array_equal(taper_symbol(zero_table, theta), np.ones(13))


@pytest.mark.parametrize("taper", [
    TaperSpec("geometric", 30, 0.7),
    TaperSpec("polynomial", 50, 2.5),
    TaperSpec("custom", 4, table=[0.5, 0.25, 0.1]),
])
def test_taper_symbol_even_about_pi(taper):
    k = np.arange(64)
    theta = 2 * np.pi * k / 64
    sym = taper_symbol(taper, theta)
    np.testing.assert_allclose(sym, taper_symbol(taper, 2 * np.pi - theta), atol=1e-12)


def test_taper_weights_vanish_beyond_horizon():
    w = TaperSpec("geometric", 5, 0.5).weights()
    np.testing.assert_allclose(w, 0.5 ** np.arange(5))
    assert TaperSpec("geometric", 5, 0.5).weights(3).size == 3


@pytest.mark.parametrize("kind,param", [("geometric", 1.0), ("geometric", 0.0), ("polynomial", 2.0)])
def test_taper_parameter_ranges(kind, param):
    with pytest.raises(ValueError):
        TaperSpec(kind, 10, param)


# -- assumption report ---------------------------------------------------------------


def test_validate_identity():
    rep = validate_assumptions(ProcessModel(IDENT, SpectralParamDistribution.point([0.0])))
    assert rep.ok
    assert rep.abs_bound == 1.0
    assert rep.lag_bound == 0.0


def test_validate_arma11_near_unit_root():
    fam = CoefficientFamily.arma11(q_max=500)
    rep = validate_assumptions(ProcessModel(fam, SpectralParamDistribution.point([0.99, 0.0])))
    assert rep.ok
    # sup |f_l| = 0.99**l for l >= 1; closed-form partial sums up to l = 500
    r = 0.99
    abs_expected = 1 + sum(r ** l for l in range(1, 501))
    lag_expected = sum(l * r ** l for l in range(1, 501))
    assert rep.abs_bound == pytest.approx(abs_expected, rel=1e-12)
    assert rep.lag_bound == pytest.approx(lag_expected, rel=1e-12)
    assert rep.abs_bound > 90 and math.isfinite(rep.lag_bound)


def test_validate_unnormalized_weights():
    m = ProcessModel(MA1, SpectralParamDistribution([[0.2], [0.8]], [0.45, 0.45]))
    rep = validate_assumptions(m)
    assert not rep.ok
    assert rep.checks["weights_normalized"] is False


def test_noncausal_arma_rejected_at_construction():
    fam = CoefficientFamily.arma11(q_max=10)
    with pytest.raises(ValueError, match="causality"):
        ProcessModel(fam, SpectralParamDistribution.point([1.2, 0.0]))


@settings(max_examples=30)
@given(st.integers(0, 40), st.integers(0, 40))
def test_partial_sum_bounds_monotone_in_q(q1, q2):
    lo, hi = sorted((q1, q2))
    fa = SpectralParamDistribution([[0.7, 0.2], [-0.4, 0.5]], [0.5, 0.5])
    r_lo = validate_assumptions(ProcessModel(CoefficientFamily.arma11(lo), fa))
    r_hi = validate_assumptions(ProcessModel(CoefficientFamily.arma11(hi), fa))
    assert r_lo.abs_bound <= r_hi.abs_bound + 1e-15
    assert r_lo.lag_bound <= r_hi.lag_bound + 1e-15


def test_table_family():
    fam = CoefficientFamily.table([[0.0], [1.0]], [[1.0, 0.5, 0.25], [1.0, -0.5, 0.0]])
    assert psi(fam, [0.0], 0.0) == pytest.approx(1.75)
    assert psi(fam, [1.0], 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        psi(fam, [0.5], 0.0)


def test_spectral_param_distribution_validation():
    with pytest.raises(ValueError):
        SpectralParamDistribution([[0.1], [0.2]], [1.0])
    with pytest.raises(ValueError):
        SpectralParamDistribution([[0.1]], [0.0])
    assert SpectralParamDistribution([[0.1], [0.2]], [0.3, 0.7]).is_normalized()
