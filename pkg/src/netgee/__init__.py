"""netgee: contact-network generation, contagion simulation, and
doubly-robust GEE estimation of cluster-level exposure effects."""

from .config import StudyConfig, load_config
from .contagion import (
    ContagionConfig,
    ContagionState,
    assign_exposure,
    calibrate_psi,
    cluster_confounders,
    run_post_exposure,
    run_to_baseline,
    seed_initial,
    step,
)
from .empirical import (
    EmpiricalDataset,
    analyze_empirical,
    define_exposure_quartile,
    load_empirical,
)
from .errors import (
    ConfigError,
    ConstantConfounderError,
    DataFormatError,
    DegenerateVarianceError,
    EstimationError,
    NetgeeError,
    PositivityError,
    SeparationError,
    StallError,
)
from .features import ALL_COLUMNS, FeatureMatrix, assortativity, compute_features
from .gee import (
    ClusteredData,
    EffectEstimate,
    GeeFit,
    Strategy,
    estimate_effect,
    sandwich_covariance,
    solve_augmented_gee,
    solve_classical_gee,
)
from .glm import RegressionFit, fit_linear, fit_logistic, stepwise_select
from .graph import (
    UNREACHABLE,
    ComponentLabeling,
    Network,
    bfs_distances,
    connected_components,
    degrees,
)
from .netgen import (
    DegreeSpec,
    MixingSpec,
    RewireResult,
    RewireSpec,
    build_mixing_matrix,
    degree_correlation,
    generate_cluster_set,
    rewire_assortative,
    sample_dcsbm,
    sample_degree_sequence,
)
from .study import (
    STRATEGIES,
    Scenario,
    StudyResult,
    compute_metrics,
    covariate_inclusion_frequency,
    run_replicate,
    run_study,
    sensitivity_regression,
    true_effect,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
