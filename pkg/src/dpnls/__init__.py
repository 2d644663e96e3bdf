"""Numerical laboratory for double-power NLS ground states and their stability."""

from .errors import (
    BracketFailure,
    DivergentNorm,
    DpnlsError,
    GridTooSmall,
    HypothesisViolated,
    IndeterminateCriterion,
    InsufficientSamples,
    InvalidParams,
    NoRoot,
    NonFinite,
    ProfileRejected,
    StiffnessFailure,
    WindowNotFound,
)
from .model import (
    ModelParams,
    RegimeLabel,
    RegimeTag,
    TailLaw,
    classify_regime,
    critical_power,
    expected_decay,
    gamma_curve,
    l2_membership,
    p_threshold,
)
from .groundstate import (
    RadialProfile,
    ShootingConfig,
    TailModel,
    Trajectory,
    classify_trajectory,
    solve_ground_state,
    zero_energy_amplitude,
)
from .functionals import (
    DCurve,
    FunctionalReport,
    compute_report,
    d_curve,
    nehari_rescale,
    strauss_bound_check,
    virial_scaling_root,
)
from .asymptotics import (
    DecayFit,
    LimitStudy,
    fit_tail,
    uniform_bound_check,
    zero_mass_limit_study,
)
from .stability import (
    BOmegaVerdict,
    ScalingCurve,
    b_omega_verdict,
    instability_criterion,
    scaling_curve,
    sign_equivalence_sweep,
)
from .evolution import (
    EvolutionDiagnostics,
    GridSpec,
    InitialDataKind,
    WaveField,
    evolve,
    instability_escape_test,
    make_initial_data,
    orbital_distance,
    sample_profile,
    virial_consistency,
)

__version__ = "0.1.0"
