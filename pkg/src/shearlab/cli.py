"""Scenario runner: config ingestion, pipelines, and bit-stable outputs.

Subcommands: simulate, admissibility, envelope, mixing, figure2, sweep.
Exit codes: 0 all requested checks passed, 1 configuration error, 2 a check
failed, 3 the simulation produced non-finite values.  CSV bodies are
byte-identical across reruns with the same config and seed: 17 significant
digits, Unix newlines, and a config-hash header line instead of timestamps.
The SHEARLAB_THREADS environment variable caps sweep parallelism.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import copy
import hashlib
import json
import math
import os
import struct
import sys
import tempfile

import numpy as np

from . import energetics, envelopes, fields, modulation as modulation_mod, shear, solver

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK_FAILED = 2
EXIT_BLOWUP = 3

KNOWN_CHECKS = ("identities", "phi_decay", "psi_decay", "coercivity")
KNOWN_OUTPUTS = (
    "trajectory_csv",
    "energy_csv",
    "envelope_csv",
    "report_json",
    "figure2_csv",
    "snapshots_bin",
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_PARAM_KEYS = {
    "beta",
    "ell",
    "C",
    "C_xi",
    "C_xi_func",
    "C_xi_prime",
    "C_sp",
    "spectral_gap_trials",
    "identity_rtol",
    "envelope_samples",
    "mixing_samples",
}


def _require_keys(section: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"missing keys {sorted(missing)} in {where}")


def validate_config(config: dict) -> dict:
    """Strictly validate a scenario config; returns it unchanged."""
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(
        config,
        allowed={
            "name",
            "nu",
            "k",
            "profile",
            "modulation",
            "weight",
            "solver",
            "initial",
            "outputs",
            "checks",
            "params",
            "seed",
        },
        required={"name", "nu", "k", "profile", "modulation", "solver", "initial"},
        where="scenario",
    )
    if config["nu"] < 0:
        raise ConfigError("nu must be nonnegative")
    if int(config["k"]) == 0:
        raise ConfigError("k must be nonzero")

    profile = config["profile"]
    if "tabulated" in profile:
        _require_keys(profile, {"tabulated", "name"}, {"tabulated"}, "profile")
    else:
        _require_keys(profile, {"name", "a"}, {"name"}, "profile")
        if profile["name"] not in ("kolmogorov", "two_mode"):
            raise ConfigError(f"unknown profile {profile['name']!r}")
        if profile["name"] == "two_mode" and "a" not in profile:
            raise ConfigError("two_mode profile needs parameter 'a'")

    mod = config["modulation"]
    if "builtin" in mod:
        _require_keys(mod, {"builtin", "nu", "horizon", "value"}, {"builtin"}, "modulation")
    elif "pieces" in mod:
        _require_keys(mod, {"pieces", "horizon", "name"}, {"pieces"}, "modulation")
        for piece in mod["pieces"]:
            _require_keys(piece, {"t0", "t1", "formula", "params"}, {"t0", "t1", "formula"}, "modulation piece")
    else:
        raise ConfigError("modulation needs 'builtin' or 'pieces'")

    weight = config.get("weight", {"s": "unit"})
    _require_keys(weight, {"s"}, {"s"}, "weight")

    solver_cfg = config["solver"]
    _require_keys(solver_cfg, {"T", "dt", "n_points", "save_every", "scheme"}, {"T", "n_points"}, "solver")

    initial = config["initial"]
    keys = set(initial)
    if not keys or not keys <= {"single_mode", "random_bandlimited", "tabulated"}:
        raise ConfigError("initial must be one of single_mode / random_bandlimited / tabulated")
    if len(keys) != 1:
        raise ConfigError("initial must specify exactly one kind")
    if "random_bandlimited" in initial:
        _require_keys(initial["random_bandlimited"], {"seed", "bandwidth"}, set(), "initial.random_bandlimited")
    if "tabulated" in initial:
        _require_keys(initial["tabulated"], {"re", "im"}, {"re"}, "initial.tabulated")

    for name in config.get("outputs", []):
        if name not in KNOWN_OUTPUTS:
            raise ConfigError(f"unknown output {name!r}; known: {KNOWN_OUTPUTS}")
    for name in config.get("checks", []):
        if name not in KNOWN_CHECKS:
            raise ConfigError(f"unknown check {name!r}; known: {KNOWN_CHECKS}")
    params = config.get("params", {})
    _require_keys(params, _PARAM_KEYS, set(), "params")
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


class Scenario:
    """A validated config plus the constructed simulation objects."""

    def __init__(self, config: dict, seed_override: int | None = None):
        validate_config(config)
        self.config = config
        self.name = config["name"]
        self.nu = float(config["nu"])
        self.k = int(config["k"])
        self.seed = int(seed_override if seed_override is not None else config.get("seed", 0))
        self.hash = config_hash(config)

        profile_cfg = config["profile"]
        if "tabulated" in profile_cfg:
            self.profile = shear.tabulated(profile_cfg["tabulated"], name=profile_cfg.get("name", "tabulated"))
        elif profile_cfg["name"] == "kolmogorov":
            self.profile = shear.kolmogorov()
        else:
            self.profile = shear.two_mode(float(profile_cfg["a"]))

        self.modulation = modulation_mod.from_config(config["modulation"])
        weight_cfg = config.get("weight", {"s": "unit"})
        self.weights = modulation_mod.WeightFamily(weight_cfg["s"], self.nu)

        solver_cfg = config["solver"]
        self.T = float(solver_cfg["T"])
        self.n_points = int(solver_cfg["n_points"])
        dt = solver_cfg.get("dt")
        if dt is None:
            dt = solver.default_dt(self.nu, self.k, self.profile, self.modulation, self.T)
        self.solver_config = solver.SolverConfig(
            nu=self.nu,
            k=self.k,
            dt=float(dt),
            n_points=self.n_points,
            save_every=int(solver_cfg.get("save_every", 1)),
            scheme=solver_cfg.get("scheme", "strang"),
        )

        self.params = dict(config.get("params", {}))
        self.checks = list(config.get("checks", []))
        self.outputs = list(config.get("outputs", ["energy_csv", "report_json"]))
        self._c_sp = self.params.get("C_sp")

    def initial_field(self) -> fields.ComplexField:
        grid = fields.PeriodicGrid(self.n_points)
        initial = self.config["initial"]
        if "single_mode" in initial:
            return fields.single_mode(grid, int(initial["single_mode"]), self.k)
        if "random_bandlimited" in initial:
            draw = initial["random_bandlimited"]
            seed = int(draw.get("seed", self.seed))
            return fields.random_band_limited(grid, self.k, seed, int(draw.get("bandwidth", 8)))
        tab = initial["tabulated"]
        re = np.asarray(tab["re"], dtype=np.float64)
        im = np.asarray(tab.get("im", np.zeros_like(re)), dtype=np.float64)
        return fields.ComplexField(grid, re + 1j * im, self.k)

    def spectral_gap_constant(self) -> float:
        if self._c_sp is None:
            self._c_sp = shear.estimate_spectral_gap_constant(
                self.profile, trials=int(self.params.get("spectral_gap_trials", 200))
            )
        return float(self._c_sp)

    def constant_C(self) -> float:
        if "C" in self.params and self.params["C"] is not None:
            return float(self.params["C"])
        return 80.0 * self.profile.c_inf * self.spectral_gap_constant()

    def beta(self) -> float:
        if self.params.get("beta") is not None:
            return float(self.params["beta"])
        return energetics.default_beta(self.modulation, self.nu, self.k, self.constant_C())

    def c_xi(self) -> float:
        return float(self.params.get("C_xi", 1.0))

    def c_xi_func(self) -> float:
        return float(self.params.get("C_xi_func", 1e-4))

    def c_xi_prime(self) -> float:
        if self.params.get("C_xi_prime") is not None:
            return float(self.params["C_xi_prime"])
        composed = energetics.thm2_rate_constant(
            self.c_xi_func(), self.profile.c_inf, self.spectral_gap_constant()
        )
        if composed <= 0:
            raise ConfigError(
                "composed rate constant is nonpositive; lower params.C_xi_func or supply params.C_xi_prime"
            )
        return composed

    def ell(self) -> float:
        return float(self.params.get("ell", 4.0))


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, data: bytes) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, columns: list, cfg_hash: str, seed: int | None = None) -> None:
    """columns is a list of (name, array) pairs; all arrays equal length."""
    names = [name for name, _ in columns]
    arrays = [np.asarray(values) for _, values in columns]
    lines = [f"# config={cfg_hash}" + (f" seed={seed}" if seed is not None else "")]
    lines.append(",".join(names))
    for i in range(len(arrays[0])):
        lines.append(",".join(_fmt(col[i]) for col in arrays))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def _json_safe(obj):
    """Replace non-finite floats with strings so reports stay valid JSON."""
    if isinstance(obj, dict):
        return {key: _json_safe(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(item) for item in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: str, payload: dict) -> None:
    _atomic_write(path, (json.dumps(_json_safe(payload), sort_keys=True, indent=2) + "\n").encode())


def write_snapshots(path: str, traj: solver.Trajectory) -> None:
    """Binary dump: per snapshot a little-endian header (int64 n_points,
    int64 k, float64 t) followed by interleaved re/im float64 samples."""
    chunks = []
    n = traj.grid.n_points
    for i in range(len(traj)):
        chunks.append(struct.pack("<qqd", n, traj.config.k, float(traj.times[i])))
        interleaved = np.empty(2 * n, dtype="<f8")
        interleaved[0::2] = np.real(traj.thetas[i])
        interleaved[1::2] = np.imag(traj.thetas[i])
        chunks.append(interleaved.tobytes())
    _atomic_write(path, b"".join(chunks))


def read_snapshots(path: str):
    """Inverse of write_snapshots; yields (t, complex array) pairs."""
    out = []
    with open(path, "rb") as handle:
        raw = handle.read()
    offset = 0
    while offset < len(raw):
        n, k, t = struct.unpack_from("<qqd", raw, offset)
        offset += 24
        flat = np.frombuffer(raw, dtype="<f8", count=2 * n, offset=offset)
        offset += 16 * n
        out.append((t, k, flat[0::2] + 1j * flat[1::2]))
    return out


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _classify(scn: Scenario):
    return modulation_mod.classify(
        scn.modulation,
        scn.nu,
        scn.k,
        scn.weights,
        beta=scn.beta() if scn.nu > 0 else 1.0,
        ell=scn.ell(),
        C=scn.constant_C(),
        C_xi=scn.c_xi(),
    )


def run_simulate(scn: Scenario, out_dir: str, force: bool = False) -> int:
    """Simulate, write energy tables, run the requested checks."""
    theta0 = scn.initial_field()
    try:
        traj = solver.simulate(theta0, scn.T, scn.solver_config, scn.profile, scn.modulation)
    except solver.SimulationBlowupError as err:
        write_json(os.path.join(out_dir, f"{scn.name}_report.json"), {"error": str(err), "exit": EXIT_BLOWUP})
        return EXIT_BLOWUP

    series = energetics.energy_series(traj, scn.profile)
    snaps = energetics.snapshots_from_series(series)
    t = series["t"]
    xi_vals = scn.modulation.xi_array(t)

    phi_col = np.full(len(t), math.nan)
    psi_col = np.full(len(t), math.nan)
    thm1_params = thm2_params = None
    if scn.nu > 0:
        thm1_params = energetics.Thm1Params(
            nu=scn.nu, k=scn.k, beta=scn.beta(), s=scn.weights.s, ell=scn.ell(), C=scn.constant_C()
        )
        thm2_params = energetics.Thm2Params(nu=scn.nu, k=scn.k, C_xi=scn.c_xi_func())
        phi_col = np.array([energetics.phi(s, thm1_params, scn.weights) for s in snaps])
        psi_col = np.array([energetics.psi(s, thm2_params, float(x)) for s, x in zip(snaps, xi_vals)])

    energy_cols = [
        ("t", t),
        ("E0", series["e0"]),
        ("E1", series["e1"]),
        ("E2", series["e2"]),
        ("E3", series["e3"]),
        ("E4", series["e4"]),
    ]
    if "trajectory_csv" in scn.outputs:
        write_csv(os.path.join(out_dir, f"{scn.name}_trajectory.csv"), energy_cols, scn.hash, scn.seed)
    if "energy_csv" in scn.outputs:
        write_csv(
            os.path.join(out_dir, f"{scn.name}_energy.csv"),
            energy_cols + [("Phi", phi_col), ("Psi", psi_col)],
            scn.hash,
            scn.seed,
        )
    if "snapshots_bin" in scn.outputs:
        write_snapshots(os.path.join(out_dir, f"{scn.name}_snapshots.bin"), traj)

    report: dict = {
        "name": scn.name,
        "config_hash": scn.hash,
        "seed": scn.seed,
        "nu": scn.nu,
        "k": scn.k,
        "dt": scn.solver_config.dt,
        "checks": {},
    }
    if scn.nu > 0:
        report["constants"] = {
            "C_sp": scn.spectral_gap_constant(),
            "C": scn.constant_C(),
            "beta": scn.beta(),
            "C_xi": scn.c_xi(),
            "C_xi_func": scn.c_xi_func(),
            "C_xi_prime": scn.c_xi_prime(),
        }

    admissibility = None
    if scn.nu > 0 and ("phi_decay" in scn.checks or "psi_decay" in scn.checks):
        admissibility = _classify(scn)
        report["admissibility"] = admissibility.to_dict()

    all_passed = True
    for check in scn.checks:
        if check == "identities":
            rtol = float(scn.params.get("identity_rtol", 1e-3))
            identity = energetics.check_energy_identities(traj, scn.profile, scn.modulation, tolerance=rtol)
            report["checks"]["identities"] = identity.to_dict()
            all_passed &= identity.passed
        elif check == "phi_decay":
            decay = energetics.check_phi_decay(
                traj,
                scn.profile,
                scn.modulation,
                thm1_params,
                scn.weights,
                admissible=bool(admissibility and admissibility.thm1.admissible) or force,
            )
            report["checks"]["phi_decay"] = decay.to_dict()
            all_passed &= decay.passed or decay.skipped
        elif check == "psi_decay":
            decay = energetics.check_psi_decay(
                traj,
                scn.profile,
                scn.modulation,
                thm2_params,
                scn.c_xi_prime(),
                admissible=bool(admissibility and admissibility.thm2.admissible) or force,
            )
            report["checks"]["psi_decay"] = decay.to_dict()
            all_passed &= decay.passed or decay.skipped
        elif check == "coercivity":
            result = _coercivity_check(snaps, xi_vals, thm1_params, thm2_params, scn.weights)
            report["checks"]["coercivity"] = result
            all_passed &= result["passed"]

    if "envelope_csv" in scn.outputs and scn.nu > 0:
        envelope_code = run_envelope(scn, out_dir, force=force)
        report["envelope_emitted"] = envelope_code == EXIT_OK
    if "figure2_csv" in scn.outputs:
        run_figure2(scn.nu, scn.k, 1.0, out_dir, name=f"{scn.name}_figure2")

    report["passed"] = bool(all_passed)
    report["exit"] = EXIT_OK if all_passed else EXIT_CHECK_FAILED
    if "report_json" in scn.outputs:
        write_json(os.path.join(out_dir, f"{scn.name}_report.json"), report)
    return report["exit"]


def _coercivity_check(snaps, xi_vals, thm1_params, thm2_params, weights) -> dict:
    """Sandwich bounds for both functionals at every snapshot.

    A relative rounding allowance covers the equality edge of the parameter
    constraint; the mathematical inequalities are exact.
    """
    allowance = 1e-10
    checked = 0
    violations = 0
    if thm1_params is not None:
        for snap in snaps:
            value = energetics.phi(snap, thm1_params, weights)
            lo, hi = energetics.coercivity_bounds_phi(snap, thm1_params, weights)
            scale = max(abs(lo), abs(hi), 1e-300)
            checked += 1
            if value < lo - allowance * scale or value > hi + allowance * scale:
                violations += 1
    if thm2_params is not None:
        for snap, xi in zip(snaps, xi_vals):
            value = energetics.psi(snap, thm2_params, float(xi))
            lo, hi = energetics.coercivity_bounds_psi(snap, thm2_params, float(xi))
            scale = max(abs(lo), abs(hi), 1e-300)
            checked += 1
            if value < lo - allowance * scale or value > hi + allowance * scale:
                violations += 1
    return {"snapshots_checked": checked, "violations": violations, "passed": violations == 0}


def run_admissibility(scn: Scenario, out_dir: str) -> int:
    """Classification report plus the admissible-region sampling table."""
    report = _classify(scn)
    write_json(os.path.join(out_dir, f"{scn.name}_admissibility.json"), report.to_dict())

    t = np.linspace(0.0, scn.modulation.horizon, 2001)
    xi_vals = scn.modulation.xi_array(t)
    beta = scn.beta() if scn.nu > 0 else 1.0
    t_star = modulation_mod.switch_time(scn.nu, scn.k, beta, scn.constant_C(), scn.weights.s)
    lower = modulation_mod.lower_bound_thm1(t, scn.nu, scn.k, beta, scn.constant_C(), scn.weights, t_star)
    upper = modulation_mod.upper_bound_thm1(t, scn.weights, scn.ell())
    write_csv(
        os.path.join(out_dir, f"{scn.name}_figure1.csv"),
        [("t", t), ("xi", xi_vals), ("L", lower), ("U", upper)],
        scn.hash,
        scn.seed,
    )
    return EXIT_OK


def run_envelope(scn: Scenario, out_dir: str, force: bool = False) -> int:
    """Evaluate the strongest applicable theorem envelope on a time grid."""
    report = _classify(scn)
    samples = int(scn.params.get("envelope_samples", 512))
    t = np.linspace(0.0, scn.T, samples)

    if report.thm1.admissible or (force and not report.thm2.admissible):
        env = envelopes.thm1_envelope(
            scn.nu,
            scn.k,
            scn.beta(),
            scn.weights,
            scn.ell(),
            scn.modulation,
            admissible=report.thm1.admissible,
            force=force,
        )
    elif report.thm2.admissible:
        env = envelopes.thm2_envelope(
            scn.nu,
            scn.k,
            scn.c_xi_prime(),
            scn.modulation,
            admissible=True,
        )
    else:
        write_json(
            os.path.join(out_dir, f"{scn.name}_envelope.json"),
            {"error": "modulation admissible for neither theorem; rerun with --force", "admissibility": report.to_dict()},
        )
        return EXIT_CHECK_FAILED

    exponents = np.array([env.exponent_at(float(x)) for x in t])
    values = env.prefactor * np.exp(-exponents)
    write_csv(
        os.path.join(out_dir, f"{scn.name}_envelope.csv"),
        [("t", t), ("envelope_value", values), ("exponent", exponents)],
        scn.hash,
        scn.seed,
    )
    admissibility_payload = report.to_dict()
    write_json(
        os.path.join(out_dir, f"{scn.name}_envelope.json"),
        {
            "kind": env.kind,
            "constants": env.constants,
            "prefactor": env.prefactor,
            "admissibility_hash": hashlib.sha256(
                json.dumps(admissibility_payload, sort_keys=True).encode()
            ).hexdigest()[:16],
            "admissibility": admissibility_payload,
        },
    )
    return EXIT_OK


def run_mixing(scn: Scenario, out_dir: str) -> int:
    """Inviscid filamentation study via the exact transport solution."""
    theta0 = scn.initial_field()
    h1_initial = fields.sobolev_norm(theta0, 1)
    samples = int(scn.params.get("mixing_samples", 40))
    t_grid = np.concatenate([[0.0], np.geomspace(scn.T * 1e-4, scn.T, samples)])

    big_xi = np.array([scn.modulation.Xi(float(x)) for x in t_grid])
    h_minus = np.array(
        [
            fields.sobolev_norm(solver.exact_inviscid(theta0, float(x), scn.profile, scn.modulation), -1)
            for x in t_grid
        ]
    )
    ratio = h_minus / h1_initial

    mask = big_xi > 1.0
    c_fit = float(np.max(ratio[mask] * np.sqrt(abs(scn.k) * big_xi[mask]))) if np.any(mask) else 1.0
    env = envelopes.mixing_envelope(scn.k, scn.modulation, C_mix=c_fit)
    env_vals = np.array([env.value(float(x)) for x in t_grid])

    window = (big_xi >= 1e2) & (big_xi <= 1e4)
    slope = math.nan
    if np.count_nonzero(window) >= 2:
        slope = float(np.polyfit(np.log(big_xi[window]), np.log(h_minus[window]), 1)[0])

    write_csv(
        os.path.join(out_dir, f"{scn.name}_mixing.csv"),
        [("t", t_grid), ("Xi", big_xi), ("h_minus_1", h_minus), ("ratio", ratio), ("envelope", env_vals)],
        scn.hash,
        scn.seed,
    )
    dominated = bool(np.all(env_vals >= ratio * (1.0 - 1e-12)))
    write_json(
        os.path.join(out_dir, f"{scn.name}_mixing.json"),
        {"C_mix": c_fit, "slope_loglog": slope, "dominates": dominated, "h1_initial": h1_initial},
    )
    return EXIT_OK if dominated else EXIT_CHECK_FAILED


def run_figure2(nu: float, k: int, C: float, out_dir: str, name: str = "figure2") -> int:
    """Envelope-only comparison of the ramp/hold/ramp-down flow against the
    constant flow and pure diffusion, on a log-spaced grid up to t = 1/nu."""
    curves = envelopes.figure2_curves(nu, k, C)
    t_final = 1.0 / nu
    t_grid = np.concatenate([[0.0], np.geomspace(max(1.0, 1e-3 * nu ** -0.5), t_final, 400)])

    exp_b = np.array([curves["exampleB"].exponent_at(float(x)) for x in t_grid])
    exp_x = np.array([curves["xi1"].exponent_at(float(x)) for x in t_grid])
    exp_d = np.array([curves["diffusion"].exponent_at(float(x)) for x in t_grid])

    cfg_hash = config_hash({"figure2": {"nu": nu, "k": k, "C": C}})
    write_csv(
        os.path.join(out_dir, f"{name}.csv"),
        [
            ("t", t_grid),
            ("env_exampleB", np.exp(-exp_b)),
            ("env_xi1", np.exp(-exp_x)),
            ("env_diffusion", np.exp(-exp_d)),
        ],
        cfg_hash,
    )

    headline = C * envelopes.example_b_headline_total(nu) * math.sqrt(abs(k))
    target = C * (0.25 / math.sqrt(nu) - 1.5) * math.sqrt(abs(k))
    exact_total = C * envelopes.example_b_exact_total(nu, k)
    quad_total = C * math.sqrt(nu * abs(k)) * envelopes.thm2_rate_integral(
        modulation_mod.builtin("example_B", nu=nu), t_final, method="quad"
    )

    # env_exampleB <= env_xi1 iff its exponent is the larger; find the last
    # grid point where that fails and require ordering ever after.
    eps = 1e-12
    below = exp_b < exp_x * (1.0 - eps) - eps
    last_violation = int(np.max(np.nonzero(below)[0])) if np.any(below) else -1
    t_cross = float(t_grid[last_violation + 1]) if last_violation + 1 < len(t_grid) else math.inf
    ordered = bool(math.isfinite(t_cross) and np.all(exp_x >= exp_d * (1.0 - eps) - eps))
    checks = {
        "headline_total_matches": bool(abs(headline - target) <= 1e-8 * abs(target)),
        "closed_form_matches_quadrature": bool(abs(exact_total - quad_total) <= 1e-8 * abs(exact_total)),
        "t_cross": t_cross,
        "t_cross_below_10_ramp_times": bool(t_cross < 10.0 * nu ** -0.5),
        "ordered_after_cross": ordered,
    }
    write_json(
        os.path.join(out_dir, f"{name}.json"),
        {
            "nu": nu,
            "k": k,
            "C": C,
            "exponent_headline_at_final": headline,
            "exponent_exact_at_final": exact_total,
            "exponent_exact_at_final_quadrature": quad_total,
            "headline_minus_exact": headline - exact_total,
            "diffusion_exponent_at_final": float(exp_d[-1]),
            "checks": checks,
        },
    )
    return EXIT_OK if all(v for v in checks.values() if isinstance(v, bool)) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _load_config(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err


def _scenario_from_args(args) -> Scenario:
    config = _load_config(args.config)
    if args.checks:
        config = copy.deepcopy(config)
        config["checks"] = [c for c in args.checks.split(",") if c]
    return Scenario(config, seed_override=args.seed)


def _worker_count(n_jobs: int) -> int:
    cap = os.environ.get("SHEARLAB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def _run_sweep_job(payload) -> int:
    config, out_dir, force = payload
    scn = Scenario(config)
    return run_simulate(scn, out_dir, force=force)


def run_sweep(base_config: dict, nu_list, k_list, out_dir: str, force: bool = False) -> int:
    jobs = []
    for nu in nu_list:
        for k in k_list:
            config = copy.deepcopy(base_config)
            config["nu"] = nu
            config["k"] = k
            if "nu" in config.get("modulation", {}):
                config["modulation"]["nu"] = nu
            config["name"] = f"{base_config['name']}_nu{_fmt(nu)}_k{k}"
            jobs.append((config, out_dir, force))
    workers = _worker_count(len(jobs))
    if workers == 1:
        codes = [_run_sweep_job(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(_run_sweep_job, jobs))
    return max(codes, default=EXIT_OK)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shearlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="scenario JSON path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--checks", default=None, help="comma-separated check list override")
        p.add_argument("--force", action="store_true", help="run envelopes/checks despite inadmissibility")

    add_common(sub.add_parser("simulate", help="run a scenario and its checks"))
    add_common(sub.add_parser("admissibility", help="classify the modulation"))
    add_common(sub.add_parser("envelope", help="evaluate the theorem envelope"))
    add_common(sub.add_parser("mixing", help="inviscid mixing-norm study"))

    fig = sub.add_parser("figure2", help="envelope-only decay comparison")
    fig.add_argument("--nu", type=float, default=1e-10)
    fig.add_argument("--k", type=int, default=1)
    fig.add_argument("--rate-constant", type=float, default=1.0, dest="rate_constant")
    fig.add_argument("--out", default="out")

    sweep = sub.add_parser("sweep", help="cartesian sweep over nu and k lists")
    add_common(sweep)
    sweep.add_argument("--nu-list", required=True, help="comma-separated nu values")
    sweep.add_argument("--k-list", required=True, help="comma-separated k values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure2":
            return run_figure2(args.nu, args.k, args.rate_constant, args.out)
        if args.command == "sweep":
            base = _load_config(args.config)
            validate_config(base)
            nu_list = [float(x) for x in args.nu_list.split(",") if x]
            k_list = [int(x) for x in args.k_list.split(",") if x]
            return run_sweep(base, nu_list, k_list, args.out, force=args.force)
        scn = _scenario_from_args(args)
        if args.command == "simulate":
            return run_simulate(scn, args.out, force=args.force)
        if args.command == "admissibility":
            return run_admissibility(scn, args.out)
        if args.command == "envelope":
            return run_envelope(scn, args.out, force=args.force)
        if args.command == "mixing":
            return run_mixing(scn, args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, TypeError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
