"""Witt-algebra (Virasoro) squeezing and two-mode Bogoliubov transformations on truncated Fock spaces."""

from .evolve import (
    DomainError,
    NotAntiHermitianError,
    TransformReport,
    bogoliubov_reports,
    closed_form_momentum,
    closed_form_position,
    conjugate,
    domain_guard,
    exponentiate,
    fn_of_hermitian,
    k_omega,
    mode_reconstruction,
    mode_reconstruction_komega,
    transform_reports,
    unitarity_error,
)
from .fock import (
    FockConfig,
    FockError,
    OperatorMatrix,
    build_annihilation,
    build_com_rel,
    build_creation,
    build_momentum,
    build_number,
    build_position,
    commutator,
    identity,
    subspace_residual,
)
from .generators import (
    ClosureReport,
    GeneratorSpec,
    SingularFlowError,
    build_bogoliubov_generator,
    build_generator,
    build_L_single,
    build_L_two_mode,
    build_squeeze_generator,
    classical_flow,
    witt_closure_check,
)
from .opexpr import OpExprError, OpExprSyntaxError, UnknownSymbolError, ModeCountError, evaluate, parse, to_text
from .states import (
    DensityMatrix,
    GeometricFit,
    StateVector,
    density_matrix,
    evolve_vacuum,
    fit_geometric,
    mean_field_params,
    mean_field_report,
    mean_field_vacuum,
    number_expectation,
    number_formula_rhs,
    partial_trace_minus,
    partial_trace_mode,
    partial_trace_plus,
    squeezed_state,
    vacuum,
)

__version__ = "0.1.0"
