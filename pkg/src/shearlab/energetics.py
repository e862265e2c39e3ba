"""Energy ledger E0-E4, the augmented functionals, and inequality certification.

For a field theta on mode k and profile v:

    E0 = ||theta||^2          E1 = ||theta_y||^2       E2 = ||theta_yy||^2
    E3 = Re< i k v' theta, theta_y >                   E4 = ||v' theta||^2

The two augmented functionals are

    Phi = (1/2)[E0 + a0 w^3 E1 + 2 b0 w^2 E3 + g0 w k^2 E4]   (static parameters,
          decreasing weights w(t) = 1/(1 + nu^s t)), and
    Psi = (1/2)[E0 + a0(t) E1 + 2 b0(t) E3 + g0(t) k^2 E4]    (time-dependent
          parameters driven by beta(t) = C_xi xi(t)^2, no weights).

The certification routines estimate d/dt of the energies by central
differences on saved snapshots, independent of the integrator internals, and
compare against the exact balance laws and the decay inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import ComplexField
from .modulation import Modulation, WeightFamily
from .shear import ShearProfile
from .solver import Trajectory


@dataclass(frozen=True)
class EnergySnapshot:
    t: float
    e0: float
    e1: float
    e2: float
    e3: float
    e4: float


@dataclass(frozen=True)
class Thm1Params:
    """Static functional parameters: a0 = (b0 nu)^{1/2}, b0 = beta/|k|,
    g0 = 16 b0^{3/2} / nu^{1/2}.  With these choices 16 b0^2 / a0 = g0 holds
    with equality, the edge case of the parameter constraint."""

    nu: float
    k: int
    beta: float
    s: object
    ell: float
    C: float

    def __post_init__(self) -> None:
        if not (self.nu / abs(self.k) <= self.beta <= 1.0 + 1e-15):
            raise ValueError(f"beta must lie in [nu/|k|, 1], got {self.beta}")
        if not (2.0 <= self.ell <= 4.0):
            raise ValueError(f"ell must lie in [2, 4], got {self.ell}")

    @property
    def beta0(self) -> float:
        return self.beta / abs(self.k)

    @property
    def alpha0(self) -> float:
        return math.sqrt(self.beta0 * self.nu)

    @property
    def gamma0(self) -> float:
        return 16.0 * self.beta0 ** 1.5 / math.sqrt(self.nu)


@dataclass(frozen=True)
class Thm2Params:
    """Time-dependent parameters driven by beta(t) = C_xi xi(t)^2."""

    nu: float
    k: int
    C_xi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.C_xi <= 1.0):
            raise ValueError(f"C_xi must lie in (0, 1], got {self.C_xi}")

    def beta_t(self, xi: float) -> float:
        return self.C_xi * xi * xi

    def beta0_t(self, xi: float) -> float:
        return self.beta_t(xi) / abs(self.k)

    def alpha0_t(self, xi: float) -> float:
        return math.sqrt(self.nu) * math.sqrt(self.beta0_t(xi))

    def gamma0_t(self, xi: float) -> float:
        return 16.0 * self.beta0_t(xi) ** 1.5 / math.sqrt(self.nu)


def _ledger_series(thetas, wavenumbers, dy, dv_vals, d2v_vals, k: int) -> dict:
    """Vectorized energies and balance-law inner products for a snapshot stack."""
    n = wavenumbers.astype(np.float64)
    hats = np.fft.fft(thetas, axis=1)
    d1 = np.fft.ifft(hats * (1j * n), axis=1)
    d2 = np.fft.ifft(hats * -(n * n), axis=1)

    def norm_sq(a):
        return dy * np.sum(np.abs(a) ** 2, axis=1)

    def re_inner(a, b):
        return dy * np.real(np.sum(a * np.conj(b), axis=1))

    return {
        "e0": norm_sq(thetas),
        "e1": norm_sq(d1),
        "e2": norm_sq(d2),
        "e3": re_inner(1j * k * dv_vals * thetas, d1),
        "e4": norm_sq(dv_vals * thetas),
        # inner products entering the third and fourth balance laws
        "x_dv_d1_d2": re_inner(1j * k * dv_vals * d1, d2),
        "x_d2v_th_d2": re_inner(1j * k * d2v_vals * thetas, d2),
        "x_dv_d1_sq": norm_sq(dv_vals * d1),
        "x_dvd2v_th_d1": re_inner(dv_vals * d2v_vals * thetas, d1),
    }


def energies(theta: ComplexField, profile: ShearProfile, k: int | None = None) -> EnergySnapshot:
    """Energy ledger of a single field (t is set to 0; callers override)."""
    _, dv_vals, d2v_vals = profile.sample(theta.grid)
    series = _ledger_series(
        np.asarray([theta.values]),
        theta.grid.wavenumbers,
        theta.grid.spacing,
        dv_vals,
        d2v_vals,
        k if k is not None else theta.x_wavenumber,
    )
    e0, e1, e2, e3, e4 = (float(series[name][0]) for name in ("e0", "e1", "e2", "e3", "e4"))
    return EnergySnapshot(0.0, e0, e1, e2, e3, e4)


def energy_series(traj: Trajectory, profile: ShearProfile) -> dict:
    """Energies and balance-law inner products at every saved snapshot."""
    _, dv_vals, d2v_vals = profile.sample(traj.grid)
    out = _ledger_series(
        traj.thetas, traj.grid.wavenumbers, traj.grid.spacing, dv_vals, d2v_vals, traj.config.k
    )
    out["t"] = np.asarray(traj.times, dtype=np.float64)
    return out


def snapshots_from_series(series: dict):
    return [
        EnergySnapshot(
            float(series["t"][i]),
            float(series["e0"][i]),
            float(series["e1"][i]),
            float(series["e2"][i]),
            float(series["e3"][i]),
            float(series["e4"][i]),
        )
        for i in range(len(series["t"]))
    ]


def phi(snap: EnergySnapshot, p: Thm1Params, weights: WeightFamily) -> float:
    """Phi = (1/2)[E0 + a0 w^3 E1 + 2 b0 w^2 E3 + g0 w k^2 E4] at snap.t."""
    w = float(weights.w(snap.t))
    return 0.5 * (
        snap.e0
        + p.alpha0 * w ** 3 * snap.e1
        + 2.0 * p.beta0 * w ** 2 * snap.e3
        + p.gamma0 * w * p.k ** 2 * snap.e4
    )


def psi(snap: EnergySnapshot, p: Thm2Params, xi_at_t: float) -> float:
    """Psi with parameters evaluated through beta(t) = C_xi xi(t)^2."""
    return 0.5 * (
        snap.e0
        + p.alpha0_t(xi_at_t) * snap.e1
        + 2.0 * p.beta0_t(xi_at_t) * snap.e3
        + p.gamma0_t(xi_at_t) * p.k ** 2 * snap.e4
    )


def coercivity_bounds_phi(snap: EnergySnapshot, p: Thm1Params, weights: WeightFamily):
    """(lower, upper) of the sandwich (1/8)[4E0 + {3,5} a0 w^3 E1 + {3,5} g0 k^2 w E4]."""
    w = float(weights.w(snap.t))
    core = p.alpha0 * w ** 3 * snap.e1
    tail = p.gamma0 * p.k ** 2 * w * snap.e4
    lower = (4.0 * snap.e0 + 3.0 * core + 3.0 * tail) / 8.0
    upper = (4.0 * snap.e0 + 5.0 * core + 5.0 * tail) / 8.0
    return lower, upper


def coercivity_bounds_psi(snap: EnergySnapshot, p: Thm2Params, xi_at_t: float):
    core = p.alpha0_t(xi_at_t) * snap.e1
    tail = p.gamma0_t(xi_at_t) * p.k ** 2 * snap.e4
    lower = (4.0 * snap.e0 + 3.0 * core + 3.0 * tail) / 8.0
    upper = (4.0 * snap.e0 + 5.0 * core + 5.0 * tail) / 8.0
    return lower, upper


def antisymmetry_defect(theta: ComplexField, profile: ShearProfile, xi: float = 1.0) -> float:
    """|Re< i k xi v theta, theta >|, zero for the exact transport operator."""
    v_vals = np.asarray(profile.v(theta.grid.points), dtype=np.float64)
    inner = theta.grid.spacing * np.sum(1j * theta.x_wavenumber * xi * v_vals * theta.values * np.conj(theta.values))
    return abs(float(np.real(inner)))


def default_beta(modulation: Modulation, nu: float, k: int, C: float) -> float:
    """beta = clamp(min(1, xi_min^{1/2}/C), nu/|k|, 1).

    Ensures the static lower bound C^2 beta^2 <= xi wherever the modulation's
    minimum allows it.
    """
    xi_min = modulation.xi_minimum()
    raw = min(1.0, math.sqrt(max(xi_min, 0.0)) / C)
    return min(1.0, max(nu / abs(k), raw))


def thm2_rate_constant(C_xi: float, c_inf: float, C_sp: float) -> float:
    """Rate constant 16 A C_xi^{3/2} c_inf with A = 1/(128 C_xi c_inf C_sp) - 1.

    Positive only when C_xi < 1/(128 c_inf C_sp); callers should pick C_xi
    below that threshold or supply an explicit rate constant.
    """
    a_balance = 1.0 / (128.0 * C_xi * c_inf * C_sp) - 1.0
    return 16.0 * a_balance * C_xi ** 1.5 * c_inf


def _nonuniform_central_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Second-order derivative estimate at interior points of a (possibly
    slightly non-uniform) time grid; endpoints are excluded by callers."""
    hm = t[1:-1] - t[:-2]
    hp = t[2:] - t[1:-1]
    return (
        hm / (hp * (hm + hp)) * f[2:]
        + (hp - hm) / (hp * hm) * f[1:-1]
        - hp / (hm * (hm + hp)) * f[:-2]
    )


def _third_derivative_scale(t: np.ndarray, f: np.ndarray) -> float:
    """Crude max |f'''| estimate from third differences, for slack budgets."""
    if len(t) < 5:
        return 0.0
    h = float(np.median(np.diff(t)))
    third = (f[4:] - 2.0 * f[3:-1] + 2.0 * f[1:-3] - f[:-4]) / (2.0 * h ** 3)
    return float(np.max(np.abs(third)))


@dataclass
class IdentityReport:
    """Max residuals of the four balance laws along a trajectory."""

    max_residual: dict
    relative_residual: dict
    save_spacing: float
    passed: bool = True

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "relative_residual": self.relative_residual,
            "save_spacing": self.save_spacing,
            "passed": self.passed,
        }


def check_energy_identities(
    traj: Trajectory, profile: ShearProfile, modulation: Modulation, tolerance: float | None = None
) -> IdentityReport:
    """Compare central-difference energy derivatives with the balance laws:

        (1/2) dE0/dt = -nu E1
        (1/2) dE1/dt = -nu E2 - xi E3
              dE3/dt = -xi k^2 E4 - 2 nu Re<i k v' th_y, th_yy> - nu Re<i k v'' th, th_yy>
        (1/2) dE4/dt = -nu ||v' th_y||^2 - 2 nu Re<v' v'' th, th_y>

    Residuals are reported absolutely and relative to the scale of each
    identity's right-hand side; they shrink at second order in the save
    spacing.
    """
    if len(traj) < 3:
        raise ValueError("need at least 3 snapshots for central differences")
    series = energy_series(traj, profile)
    t = series["t"]
    h = float(np.median(np.diff(t)))
    nu = traj.config.nu
    k = traj.config.k
    n_max = traj.grid.n_points // 2
    if nu * n_max ** 2 * h > 0.5 + 1e-12:
        raise ValueError(
            f"save spacing too coarse for central differences: nu*n_max^2*h = {nu * n_max ** 2 * h:.3g} > 0.5"
        )

    xi_vals = modulation.xi_array(t)
    rhs = {
        "e0": -nu * series["e1"],
        "e1": -nu * series["e2"] - xi_vals * series["e3"],
        "e3": -xi_vals * k ** 2 * series["e4"]
        - 2.0 * nu * series["x_dv_d1_d2"]
        - nu * series["x_d2v_th_d2"],
        "e4": -nu * series["x_dv_d1_sq"] - 2.0 * nu * series["x_dvd2v_th_d1"],
    }
    half = {"e0": 0.5, "e1": 0.5, "e3": 1.0, "e4": 0.5}

    # Relative scale: the balance terms themselves, floored by the energy's
    # own change-per-unit-time scale (covers identities whose right-hand
    # side vanishes identically, e.g. conserved quantities at nu = 0) and by
    # the roundoff resolution of the differencing itself (covers identities
    # that are vacuous 0 = 0 for symmetric data).
    span = max(float(t[-1] - t[0]), 1e-30)
    e0_max = float(np.max(series["e0"]))
    noise = 1e3 * np.finfo(np.float64).eps * e0_max / h
    max_res: dict = {}
    rel_res: dict = {}
    for name in ("e0", "e1", "e3", "e4"):
        lhs = half[name] * _nonuniform_central_derivative(t, series[name])
        resid = np.abs(lhs - rhs[name][1:-1])
        floor = float(np.max(np.abs(series[name]))) / span
        scale = max(float(np.max(np.abs(rhs[name]))), floor, noise)
        max_res[name] = float(np.max(resid))
        rel_res[name] = float(np.max(resid)) / scale

    passed = True if tolerance is None else all(v <= tolerance for v in rel_res.values())
    return IdentityReport(max_residual=max_res, relative_residual=rel_res, save_spacing=h, passed=passed)


@dataclass
class DecayReport:
    """Certification of d/dt F + rate(t) F <= 0 on a saved trajectory.

    skipped marks hypotheses that are vacuous for the run (the check neither
    passes nor fails); supported=False marks runs outside the theorem's
    hypotheses whose numeric outcome is still reported (negative controls).
    """

    functional: str
    max_residual: float
    normalized_residual: float
    slack: float
    passed: bool
    supported: bool
    initial_value: float
    skipped: bool = False
    constants: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "max_residual": self.max_residual,
            "normalized_residual": self.normalized_residual,
            "slack": self.slack,
            "passed": self.passed,
            "supported": self.supported,
            "skipped": self.skipped,
            "initial_value": self.initial_value,
            "constants": self.constants,
            "note": self.note,
        }


def _decay_report(name, t, values, rates, supported, constants, note="") -> DecayReport:
    dvdt = _nonuniform_central_derivative(t, values)
    residual = dvdt + rates[1:-1] * values[1:-1]
    max_residual = float(np.max(residual))
    v0 = float(values[0])
    span = float(t[-1] - t[0])
    h = float(np.median(np.diff(t)))
    fd_error = h * h / 6.0 * _third_derivative_scale(t, values)
    slack = 1e-3 * v0 / span + fd_error
    return DecayReport(
        functional=name,
        max_residual=max_residual,
        normalized_residual=max_residual / v0 if v0 > 0 else math.inf,
        slack=slack,
        passed=bool(max_residual <= slack),
        supported=supported,
        initial_value=v0,
        constants=constants,
        note=note,
    )


def check_phi_decay(
    traj: Trajectory,
    profile: ShearProfile,
    modulation: Modulation,
    p: Thm1Params,
    weights: WeightFamily,
    admissible: bool = True,
) -> DecayReport:
    """Certify d Phi/dt + (1/4)(beta xi nu |k|)^{1/2} w Phi <= 0 numerically.

    The pass threshold allows 1e-3 * Phi(0)/T plus an estimate of the
    second-order differencing error; exact nonpositivity cannot be asserted
    on discrete data.  Degenerate at nu = 0 (beta range collapses): the check
    is skipped with a diagnostic.
    """
    if traj.config.nu == 0.0:
        return DecayReport(
            functional="phi",
            max_residual=0.0,
            normalized_residual=0.0,
            slack=0.0,
            passed=True,
            supported=False,
            skipped=True,
            initial_value=0.0,
            note="skipped: beta range degenerates at nu = 0",
        )
    constants = {
        "beta": p.beta,
        "alpha0": p.alpha0,
        "beta0": p.beta0,
        "gamma0": p.gamma0,
        "s": weights.s,
        "C": p.C,
    }
    series = energy_series(traj, profile)
    snaps = snapshots_from_series(series)
    t = series["t"]
    values = np.array([phi(s, p, weights) for s in snaps])
    xi_vals = modulation.xi_array(t)
    w_vals = np.asarray(weights.w(t), dtype=np.float64)
    rates = 0.25 * np.sqrt(p.beta * xi_vals * p.nu * abs(p.k)) * w_vals
    note = "" if admissible else "unsupported: modulation not admissible for these parameters"
    return _decay_report("phi", t, values, rates, admissible, constants, note)


def check_psi_decay(
    traj: Trajectory,
    profile: ShearProfile,
    modulation: Modulation,
    p: Thm2Params,
    c_xi_prime: float,
    admissible: bool = True,
) -> DecayReport:
    """Certify d Psi/dt + C'_xi (nu |k|)^{1/2} xi^3 Psi <= 0 numerically."""
    if traj.config.nu == 0.0:
        return DecayReport(
            functional="psi",
            max_residual=0.0,
            normalized_residual=0.0,
            slack=0.0,
            passed=True,
            supported=False,
            skipped=True,
            initial_value=0.0,
            note="skipped: parameter formulas degenerate at nu = 0",
        )
    series = energy_series(traj, profile)
    snaps = snapshots_from_series(series)
    t = series["t"]
    xi_vals = modulation.xi_array(t)
    values = np.array([psi(s, p, float(x)) for s, x in zip(snaps, xi_vals)])
    rates = c_xi_prime * math.sqrt(p.nu * abs(p.k)) * xi_vals ** 3
    constants = {
        "C_xi": p.C_xi,
        "c_xi_prime": c_xi_prime,
        "c_xi_prime_ge_nu_over_k": bool(c_xi_prime >= p.nu / abs(p.k)),
    }
    note = "" if admissible else "unsupported: modulation not admissible for these parameters"
    return _decay_report("psi", t, values, rates, admissible, constants, note)
