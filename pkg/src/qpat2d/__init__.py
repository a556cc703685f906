"""2-D radiative-transfer forward model and regularized optical inversion for QPAT."""

__version__ = "0.1.0"

from .geometry import (
    AngularQuadrature,
    Grid2D,
    OpticalPair,
    PhaseMatrix,
    build_grid,
    build_phase_hg,
    build_quadrature,
    hg_kernel,
    require_admissible,
    validate_admissible,
)
from .transport import (
    BoundarySource,
    SourceIterationError,
    apply_scattering,
    apply_streaming_absorption,
    apply_transport,
    apply_transport_adjoint,
    boundary_source_patch,
    solve_adjoint,
    solve_rte,
    zero_boundary,
)
from .forward import add_noise, compute_fluence, energy_from_pressure, forward
from .gradients import (
    CoefficientDirection,
    MisfitGradient,
    directional_derivative,
    fd_check,
    misfit_gradient,
)
from .tikhonov import (
    ReconstructionReport,
    TikhonovConfig,
    choose_alpha,
    convergence_study,
    eval_functional,
    penalty_gradient,
    reconstruct,
)
from .levelset import (
    LevelSetConfig,
    LevelSetState,
    eps_continuation,
    eval_geps,
    heaviside_eps,
    heaviside_eps_prime,
    levelset_gradient,
    project_peps,
    reconstruct_levelset,
    tv_seminorm,
)
from .multisource import eval_multi_misfit, forward_multi, gradient_step, kaczmarz_sweep
from .phantoms import Inclusion, PhantomSpec, make_phantom
from .fields_io import load_field_csv, save_field_csv, save_field_pgm

__all__ = [name for name in dir() if not name.startswith("_")]
