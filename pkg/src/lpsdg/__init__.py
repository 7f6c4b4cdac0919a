"""Transient incompressible flow solver with local projection stabilization
in space and discontinuous Galerkin time stepping, plus a manufactured
solution convergence harness."""

from .mesh import Cell, Mesh, build_uniform_mesh, reference_map
from .temporal import (
    RadauRule,
    SlabCoefficients,
    TimePartition,
    gauss_radau,
    map_to_slab,
    slab_coefficients,
    uniform_partition,
)
from .elements import (
    PressureSpace,
    ReferenceElement,
    VelocitySpace,
    build_spaces,
    dirichlet_values,
    evaluate_basis,
    reference_element,
)
from .lps import LocalProjector, StabParams, assemble_stabilization, local_projector
from .assembly import (
    FormContext,
    OperatorSet,
    SolverFailure,
    StageSystem,
    apply_constraints,
    assemble_convection,
    assemble_load,
    assemble_mass,
    assemble_stokes,
    convection_jacobian,
    linear_solve,
    make_context,
)
from .cases import (
    ManufacturedCase,
    case_rough_pressure,
    case_space_dominant,
    case_steady_check,
    case_time_dominant,
    get_case,
)
from .slab import (
    NewtonConfig,
    Problem,
    SlabState,
    StepFailure,
    TrajectoryRecord,
    advance,
    build_problem,
    initial_velocity,
    postprocess,
    solve_slab,
)
from .verification import EOCTable, ErrorReport, compute_errors, eoc

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
