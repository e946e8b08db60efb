"""Planar stochastic wave equation driven by symmetric alpha-stable noise.

The noise is represented by a truncated LePage series; the solution
candidate is the superposition of Poisson-formula kernels centred at the
series atoms.
"""

from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .field import (
    BlowupResult,
    DegeneratePathError,
    FieldSample,
    HoelderEstimate,
    blowup_probe,
    evaluate_U,
    evaluate_U_grid,
    hoelder_exponent,
    hoelder_from_path,
    isolated_atoms,
    time_path,
)
from .io import NoiseFileError, NoiseIntegrityError, load_noise, save_noise
from .quadrature import QuadratureError
from .stable_measure import (
    DisjointUnion,
    Disk,
    EmpiricalCF,
    Rectangle,
    StableParams,
    TruncatedLePage,
    alpha_norm_numeric,
    empirical_cf,
    integrate_function,
    lepage_constant,
    measure_of_set,
    sample_series,
    series_constant,
)
from .wave_kernel import (
    SigmaCoefficient,
    SingularAtomError,
    WaveKernelParams,
    kernel_alpha_norm,
    kernel_alpha_norm_bound,
    kernel_G,
    kernel_G_log_bound,
    kernel_radial,
    kernel_values,
    parse_sigma,
    sigma_const,
    sigma_holder,
    sigma_zero,
)
from .weak_solution import (
    TestFunction,
    WeakFormReport,
    make_bump,
    poisson_identity_check,
    poisson_identity_residual,
    wave_operator_psi,
    weak_lhs,
    weak_residual,
    weak_rhs,
)

__version__ = "0.1.0"
