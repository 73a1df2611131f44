"""levelflow: level-set forced mean curvature flow with Neumann boundary conditions."""

from .geometry import (
    BoundaryMetrics,
    Channel,
    ConditionReport,
    Disk,
    GridGeometry,
    GridTooCoarseError,
    Rectangle,
    boundary_metrics,
    build_grid,
    check_forcing_condition,
    condition_margin,
    inscribed_ball_min,
    principal_curvature_extreme,
)
from .fields import (
    ConstantForcing,
    Forcing,
    PiecewiseLinearRadial,
    RadialForcing,
    ScalarField,
    ToyModelForcing,
    bij_contract,
    blowup_profile,
    curvature_divergence_form,
    grad_central,
    lipschitz_x,
    neumann_fill_ghosts,
    radial_field,
    radial_smoothstep,
    smooth_tangent_profile,
    smoothstep,
    toy_model_c,
    upwind_gradient_magnitude,
    w_field,
)
from .solver import (
    PredictedBounds,
    RunDiagnostics,
    SolverAbort,
    SolverConfig,
    cfl_dt,
    comparison_check,
    lyapunov,
    predicted_bounds,
    run,
    step,
)
from .radial import (
    RadialProblem,
    RadialSolution,
    RegionClassification,
    classify,
    component_constancy,
    d_of,
    eta1_curve,
    phi_infinity,
    solve_radial,
)
from .channel import (
    ArcFamily,
    BarrierSchedule,
    ChannelParams,
    a_star,
    barrier_a,
    bound_constant_C,
    build_U_mask,
    channel_r_min,
    convergence_metric,
    delta0,
    h_stall,
    make_initial_data,
    right_angle_residual,
    solve_radii,
    sup_h_stall,
)

__version__ = "0.1.0"
