"""Dirac-type operators on flat collapsing bundle models.

Construct Clifford modules, assemble Dirac operators on flat tori and
affine mapping tori in exact Fourier form, and compare spectra across
collapsing fiber scales against the predicted limit operators.
"""

from .assembly import (
    AssembledOperator,
    EmptyInvariantSpaceError,
    InvariantSplit,
    SuperconnectionPieces,
    assemble_dirac,
    bochner_rhs,
    eigenvalue_derivative,
    fiber_invariant_split,
    frame_bundle_operator,
    invariant_projector,
    limit_operator,
    superconnection_pieces,
    write_matrix_text,
    zeroth_order_term,
)
from .blockres import (
    BlockMatrix2x2,
    neumann_factorization_check,
    neumann_inverse,
    schur_complement,
    schur_inverse,
)
from .clifford import (
    CliffordModule,
    casimir,
    casimir_blocks,
    exterior_module,
    fixed_subspace,
    holonomy_rep,
    lift_rotation,
    relation_residuals,
    spinor_gammas,
)
from .collapse import (
    BlowupReport,
    CollapseReport,
    PerturbationReport,
    blowup_check,
    check_fiber_gap_bound,
    collapse_run,
    perturbation_bound_check,
    rayleigh_minimax_check,
    spectral_window,
    window_agreement,
)
from .models import (
    AffineMappingTorus,
    FlatTorusModel,
    GeometricData,
    geometric_data,
    matrix_order,
    metric_path,
    metric_speed,
)
from .spectral import (
    MatchResult,
    Spectrum,
    cluster_multiplicities,
    eigensolve,
    epsilon_close,
    sinh_rescale,
    spectrum_from_csv,
    spectrum_to_csv,
    subset_epsilon_close,
    window_intersect,
)

__version__ = "0.1.0"
