import numpy as np
import pytest

from hdlsd.inversion import (
    SpectralCurve,
    cdf_at,
    default_x_grid,
    density_curve,
    detect_atom_at_zero,
    read_curve_csv,
    write_curve_csv,
)
from hdlsd.model import CoefficientFamily, ProcessModel, SpectralParamDistribution
from hdlsd.solver import KernelEquation, NonConvergenceError, SolverConfig
from hdlsd.spectra import ESD, ks_distance

from oracles import mp_cdf, mp_density, mp_edges, mp_stieltjes

IID = ProcessModel(CoefficientFamily.identity(), SpectralParamDistribution.point([0.0]))


def mp_evaluator(c):
    return lambda z: np.array([mp_stieltjes(zi, c) for zi in np.ravel(z)])


@pytest.fixture(scope="module")
def mp_curve():
    eq = KernelEquation.lag(IID, 0.5, 0)
    return density_curve(eq, default_x_grid(0.5, IID.lambda_bar()))


def test_mp_support(mp_curve):
    a, b = mp_edges(0.5)
    assert a == pytest.approx(0.0858, abs=1e-4) and b == pytest.approx(2.9142, abs=1e-4)
    x, d = mp_curve.x_grid, mp_curve.density
    outside = (x < a - 0.1) | (x > b + 0.1)
    assert d[outside].max() <= 1e-3
    inside = (x > a + 0.05) & (x < b - 0.05)
    assert d[inside].min() > 0


def test_mp_density_closed_form(mp_curve):
    a, b = mp_edges(0.5)
    x = mp_curve.x_grid
    away = (np.abs(x - a) > 0.05) & (np.abs(x - b) > 0.05)
    assert np.abs(mp_curve.density - mp_density(x, 0.5))[away].max() <= 1e-3
    one = np.interp(1.0, x, mp_curve.density)
    assert one == pytest.approx(mp_density(np.array([1.0]), 0.5)[0], abs=1e-3)


def test_mp_total_mass(mp_curve):
    assert 0.99 <= mp_curve.total_mass <= 1.01
    assert mp_curve.atom_at_zero == 0


def test_mp_cdf_ks(mp_curve):
    grid = np.linspace(-0.5, 3.5, 2048)
    ref = mp_cdf(grid, 0.5)
    assert np.abs(mp_curve(grid) - ref).max() <= 5e-3


def test_curve_is_subprobability(mp_curve):
    assert np.all(np.diff(mp_curve.cdf) >= 0)
    assert mp_curve.cdf[-1] <= 1 + 1e-3
    assert mp_curve.density.min() >= 0


def test_cdf_at(mp_curve):
    lo, hi = mp_curve.support
    assert cdf_at(mp_curve, lo) == 0.0
    assert cdf_at(mp_curve, hi) == pytest.approx(1.0, abs=1e-2)
    xs = np.linspace(lo, hi, 301)
    assert np.all(np.diff(cdf_at(mp_curve, xs)) >= 0)
    val, flag = cdf_at(mp_curve, hi + 10, return_flag=True)
    assert flag and val == cdf_at(mp_curve, hi)
    assert cdf_at(mp_curve, 1.0, return_flag=True)[1] is False


def test_atom_detection_c_above_one():
    x = default_x_grid(2.0, 1.0, 512)
    curve = density_curve(mp_evaluator(2.0), x)
    assert curve.atom_at_zero == pytest.approx(0.5, abs=1e-3)
    assert cdf_at(curve, curve.support[0]) == 0.0
    assert cdf_at(curve, 0.0) == pytest.approx(0.5, abs=1e-3)
    assert curve.total_mass == pytest.approx(1.0, abs=1e-2)


def test_no_false_atom_at_c_one():
    # density ~ x^(-1/2) at the origin, but no point mass
    assert detect_atom_at_zero(mp_evaluator(1.0)) == 0.0


def test_atom_detection_with_solver():
    eq = KernelEquation.lag(IID, 2.0, 0)
    assert detect_atom_at_zero(eq) == pytest.approx(0.5, abs=1e-4)


def test_iid_lag_one_symmetry():
    eq = KernelEquation.lag(IID, 0.5, 1)
    curve = density_curve(eq, default_x_grid(0.5, 1.0, 1024))
    x = np.linspace(0.01, curve.support[1] - 0.01, 400)
    dev = np.abs(curve(-x) + curve.cdf_left(x) - 1)
    assert dev.max() <= 2e-2


def test_ks_between_curve_and_sample_esd(mp_curve):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((400, 800))
    esd = ESD.of(x @ x.T / 800)
    assert ks_distance(esd, mp_curve) < 0.05


def test_nonconvergence_propagates():
    cfg = SolverConfig(newton_max_iter=1, max_iter=1)
    eq = KernelEquation.lag(IID, 0.5, 0, cfg)
    with pytest.raises(NonConvergenceError, match="z="):
        density_curve(eq, np.linspace(0.1, 3.0, 16))


@pytest.mark.parametrize("heights", [(0.01,), (0.01, 0.02), (0.01, -0.005)])
def test_bad_heights(heights):
    with pytest.raises(ValueError):
        density_curve(mp_evaluator(0.5), np.linspace(0, 1, 5), heights)


def test_bad_grid():
    with pytest.raises(ValueError):
        density_curve(mp_evaluator(0.5), np.array([0.0, 0.0, 1.0]))


def uniform_transform(mass):
    # Stieltjes transform of mass * Uniform[0, 1]
    return lambda z: mass * (np.log(1 - z) - np.log(-z))


def test_overshoot_is_renormalized():
    x = np.linspace(-0.5, 1.5, 801)
    curve = density_curve(uniform_transform(1.004), x, detect_atom=False)
    assert curve.total_mass == pytest.approx(1.0, abs=1e-12)
    assert "renormalized" in curve.flags


def test_large_excess_is_warned_not_hidden():
    x = np.linspace(-0.5, 1.5, 801)
    with pytest.warns(RuntimeWarning, match="total mass"):
        curve = density_curve(uniform_transform(1.1), x, detect_atom=False)
    assert curve.total_mass == pytest.approx(1.1, abs=5e-3)
    assert "mass_defect" in curve.flags


def test_curve_csv_round_trip(tmp_path):
    curve = density_curve(mp_evaluator(2.0), default_x_grid(2.0, 1.0, 64))
    write_curve_csv(tmp_path / "c.csv", curve)
    text = (tmp_path / "c.csv").read_text()
    assert text.startswith("# atom0=")
    assert text.splitlines()[1] == "x,density,cdf"
    back = read_curve_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.cdf, curve.cdf)
    assert back.atom_at_zero == curve.atom_at_zero


def test_curve_rejects_decreasing_cdf():
    with pytest.raises(ValueError):
        SpectralCurve(np.array([0.0, 1.0]), np.zeros(2), np.array([0.5, 0.2]))
