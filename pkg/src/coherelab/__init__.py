"""Cumulative-coherence analysis, l1 recovery solvers and recovery certificates."""
from . import certificates, coherence, dictionary, experiments, solvers
from ._kernels import BACKEND
from .certificates import (
    Certificate,
    CertificateKind,
    ds_error_bound,
    ds_qcbp_condition,
    h_minimizer_bruteforce,
    lasso_condition,
    lasso_error_bound,
    max_certified_sparsity,
    mip_thresholds,
    oracle_rhs,
    prediction_gap_bound,
    qcbp_error_bound,
    re_empirical_upper,
    re_lower_bound,
)
from .coherence import (
    CoherenceProfile,
    coherence as mutual_coherence,
    cumulative_coherence,
    gram,
    profile,
    ric_upper_bound,
    verify_norm_gap,
    verify_polytope_bound,
    verify_quasi_isometry,
    verify_restricted_orthogonality,
)
from .dictionary import (
    Dictionary,
    Kind,
    decaying,
    dirac_fourier,
    dirac_hadamard,
    from_array,
    gaussian,
    identity,
    load_matrix,
    parse_builder_spec,
    save_matrix,
)
from .errors import (
    CoherelabError,
    ConditionError,
    ContractError,
    DegenerateBoundError,
    DomainError,
    MatrixParseError,
    NumericalError,
    RangeError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    emit_report,
    gen_sparse_signal,
    noise_admissibility,
    run_snr,
    run_success,
)
from .solvers import (
    SolveOptions,
    SolverResult,
    StepRule,
    basis_pursuit,
    cone_residuals,
    dantzig,
    lasso,
    lasso_irls,
    qcbp,
)

__version__ = "0.1.0"
