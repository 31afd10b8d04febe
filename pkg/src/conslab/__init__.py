"""Slab Navier-Stokes laboratory with slip-law walls and weighted-derivative
diagnostics."""

from .conormal import (
    ConormalReport,
    N_m,
    apply_Z,
    apply_Z_multi,
    build_conormal_report,
    check_commutator_identities,
    conormal_norm,
    conormal_sup,
    embedding_check,
    multi_indices,
)
from .dynamics import (
    BC_TOL,
    DIV_TOL,
    SimConfig,
    SimulationAbort,
    State,
    Trajectory,
    energy_balance,
    euler_step,
    make_initial_data,
    navier_bc_apply,
    prepared_data,
    run,
    sponge_work,
    step,
    strain_norm_sq,
)
from .fields import (
    ScalarField,
    SpectralField,
    VectorField,
    curl,
    divergence,
    gradient,
    l2_norm,
    linf_norm,
    read_snapshot,
    read_snapshot_vector,
    to_spectral,
    write_snapshot,
)
from .fpkernel import (
    FPCoefficient,
    FPProfile,
    check_fp_bounds,
    derive_kernel,
    fp_evolve,
    fp_evolve_fd,
)
from .grid import Grid, make_grid
from .harness import (
    ConfigError,
    SweepConfig,
    emit_report,
    execute_run,
    parse_config,
    parse_init,
    sweep,
)
from .layer import (
    LayerProfile,
    ScalingFit,
    amplitude_scaling,
    convergence_metrics,
    eta_boundary_max,
    eta_field,
    eta_residual,
    layer_profile,
)
from .pressure import (
    NeumannProblem,
    PressureSplit,
    pressure_split,
    solve_neumann_fd,
    solve_p1_kernel,
    solve_p2_closed,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
