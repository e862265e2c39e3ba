"""shearlab: simulation and certification of enhanced dissipation under
time-modulated shear flows on the torus."""

from .fields import (
    ComplexField,
    PeriodicGrid,
    from_function,
    l2_inner,
    random_band_limited,
    single_mode,
    sobolev_norm,
    spectral_derivative,
)
from .shear import (
    ShearProfile,
    detect_critical_points,
    estimate_spectral_gap_constant,
    kolmogorov,
    tabulated,
    two_mode,
)
from .modulation import (
    AdmissibilityReport,
    Modulation,
    Piece,
    WeightFamily,
    builtin,
    classify,
    eval_Xi,
    eval_xi,
)
from .solver import SimulationBlowupError, SolverConfig, Trajectory, exact_inviscid, simulate, step
from .energetics import (
    EnergySnapshot,
    Thm1Params,
    Thm2Params,
    check_energy_identities,
    check_phi_decay,
    check_psi_decay,
    default_beta,
    energies,
    phi,
    psi,
    thm2_rate_constant,
)
from .envelopes import (
    Envelope,
    EnvelopeFamily,
    GluePiece,
    autonomous_rate,
    diffusion_envelope,
    fit_constants,
    glue,
    mixing_envelope,
    thm1_envelope,
    thm1_rate_integral,
    thm2_envelope,
    thm2_rate_integral,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
