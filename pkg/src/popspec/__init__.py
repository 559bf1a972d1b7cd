"""Local moment estimation of discrete population spectra."""

from .empirical import ClusterAssignment, EigenSample, cluster_eigenvalues, companion_stieltjes_n, zeros_of_companion
from .errors import (
    ConvergenceError,
    DomainError,
    EstimationError,
    InversionError,
    LengthError,
    NumericalError,
    PopspecError,
)
from .forward import divide_psd, lsd_density, lsd_quantiles, solve_companion, support_intervals
from .inversion import moments_to_measure, solve_known_weights, solve_partial_weights
from .kernels import BACKEND
from .partition import estimate_partition, g_hat
from .pipeline import EstimationConfig, EstimationResult, estimate, glme, lme
from .psd import DiscretePSD, MomentVector, Partition, enumerate_partitions, hankel, moments_of
from .residues import MomentTable, moment_table, oracle_contour_moment, oracle_contour_moments, residue_at_lambda, residue_at_mu
from .simulation import ExperimentSpec, Variant, generate_eigen_sample, read_spec, run_experiment, wasserstein

__version__ = "0.1.0"
