"""Length-gauge Pauli-Fierz laboratory: exact states, virial identities, Kohn-Sham inversion."""

from .errors import (
    ConvergenceError,
    DenseCapError,
    DensityMismatchError,
    DimensionError,
    PfvError,
    ScfError,
    SpecError,
    StateFileError,
)
from .model import (
    ElectronSpec,
    FreeSpaceModeSetSpec,
    GridSpec,
    InteractionSpec,
    ModeSpec,
    PotentialSpec,
    SystemSpec,
    freespace_mode_set,
    hilbert_dimension,
    load_system,
    system_from_dict,
    validate_system,
)
from .operators import (
    SparseOperator,
    TermId,
    build_term,
    build_virial_operator,
    commutator_expectation,
    expectation,
    mode_ladder_matrices,
)
from .solver import (
    EigenSolveConfig,
    MeanFieldSolution,
    ScfConfig,
    dense_eigensolve,
    eigenstate_residual,
    lanczos_ground_state,
    scf_meanfield,
    solve,
)
from .state import QuantumState

__version__ = "0.1.0"
