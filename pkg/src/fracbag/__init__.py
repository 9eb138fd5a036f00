"""Shooting-method solver for compactly supported nodal states of the
radial sub-linear Dirac system, with the vanishing-exponent bag limit."""

from .model import (
    DomainError,
    LevelConstants,
    ModelParams,
    PlaneState,
    angular_threshold,
    e0,
    energy_H,
    energy_H_eps,
    level_constants,
    nonlinearity_F,
    phi_eps,
)
from .constants import (
    ShootingConstants,
    f_barrier,
    g_barrier,
    omega_threshold,
    p_bar,
    shooting_constants,
    trapping_radius,
)
from .integrator import (
    Event,
    EventKind,
    IntegratorControls,
    Mode,
    Terminal,
    Trajectory,
    TrajectoryDiagnostics,
    diagonal_crossing,
    integrate,
    rhs,
    taylor_start,
)
from .shooter import Classification, ShotResult, classify, find_nodal
from .mitlimit import FreeDiracArc, ContinuationRecord, continuation, free_dirac, mit_fit

__version__ = "0.1.0"
