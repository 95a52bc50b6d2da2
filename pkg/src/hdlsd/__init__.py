"""Spectra of symmetrized sample autocovariance matrices of high-dimensional
linear time series: simulation, empirical spectra and limiting distributions."""

from .autocov import SymAutocov, TaperedSpectralMatrix, sym_autocov, tapered_spectral
from .inversion import SpectralCurve, cdf_at, default_x_grid, density_curve, detect_atom_at_zero
from .model import (
    CoefficientFamily,
    ProcessModel,
    SpectralParamDistribution,
    TaperSpec,
    arma11_coeff,
    effective_h,
    power_transfer,
    psi,
    taper_symbol,
    validate_assumptions,
)
from .simulate import (
    PathMatrix,
    assign_lambdas,
    gen_innovations,
    simulate_circulant_path,
    simulate_path,
)
from .solver import (
    KernelEquation,
    NonConvergenceError,
    SolverConfig,
    StieltjesKernelGrid,
    deterministic_equivalent_Hn,
    mass_mnu,
    solve_kernel,
    solve_tapered_kernel,
    stieltjes_lsd,
    stieltjes_tapered,
    uniqueness_threshold,
)
from .spectra import ESD, eigenvalues, empirical_stieltjes, esd_cdf, ks_distance

__version__ = "0.1.0"
