"""Maxwell's equations on discrete surfaces via discrete exterior calculus."""

from .mesh import (
    DualMesh,
    MeshError,
    MeshQualityReport,
    NonAcuteError,
    NonConcyclicError,
    NonManifoldError,
    NonOrientableError,
    SimplicialSurface,
    build_complex,
    build_dual,
    circumcenter,
    mesh_quality,
)
from .forms import (
    DiscreteForm,
    FormError,
    codifferential,
    exterior_derivative,
    exterior_derivative_dual,
    hodge,
    hodge_inverse,
    inner_product,
)
from .solver import (
    GaussianPulse,
    InstabilityError,
    MaterialField,
    RunResult,
    SimState,
    SolverError,
    SourceSpec,
    apply_gaussian_source,
    cfl_dt,
    divergence_residuals,
    energy,
    leapfrog_invariant,
    run,
    spectral_dt_oracle,
    step,
    step_reversed,
    te_step,
    tm_step,
)

__version__ = "0.1.0"
