"""Exact and Monte Carlo simulation of spin-noise measurement chains.

An ensemble of ``N`` spin-1/2 particles is measured repeatedly through its
collective z magnetization, strongly (projectively) or weakly (Gaussian POVM),
with a quantum channel acting between measurements. Magnetizations are keyed
by the doubled value ``d = 2m`` throughout.
"""

from .sectors import (
    Moments,
    SectorDistribution,
    binomial_pmf,
    degeneracy,
    doubled_values,
    log_binomial_pmf,
    magnetizations,
    moments,
    sector_index,
    sector_multiplicity,
    total_variation,
)
from .measurement import (
    ImpossibleOutcomeError,
    KernelError,
    MeasurementKernel,
    MeasurementRecord,
    ValidationReport,
    gaussian_kernel,
    outcome_distribution,
    posterior_update,
    strong_kernel,
    validate_kernel,
)
from .channels import (
    CollectiveDepolarizing,
    EpsilonPolarizing,
    ProductMap,
    RotatingProductMap,
    TransitionKernel,
    apply_channel,
    conditional_moments,
    decay_probability,
    flip_probs_from_rotation,
    mixing_kernel,
    product_transition_kernel,
    transition_kernel,
)
from .chain import (
    JointDistribution,
    MixedState,
    ProductState,
    RunConfig,
    SectorDensity,
    Trajectory,
    break_even_spin_count,
    conditional_matrix,
    correlation_empirical,
    correlation_exact,
    covariance_closed_form,
    covariance_empirical,
    covariance_exact,
    eta,
    exact_joint,
    initial_sector_distribution,
    joint_closed_form,
    run_trajectory,
    sample_trajectories,
    single_time_distribution,
)

__version__ = "0.1.0"
