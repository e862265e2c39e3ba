"""Time-modulation functions xi(t), their antiderivatives, and admissibility.

A Modulation is an ordered list of pieces, each a tagged closed-form formula
on an interval, partitioning [0, T].  Exact antiderivatives are available for
every registered formula tag; adaptive quadrature provides an independent
cross-check.  classify() tests a modulation against the hypotheses of the two
decay theorems by dense sampling and reports violations probe by probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import adaptive_simpson

FORMULA_TAGS = ("const", "linear", "exp", "cos_affine", "poly4", "rational_rampdown")

_REL_TOL = 1e-9  # slack for bound comparisons that the formulas meet with equality


def _xi_value(tag: str, params: dict, t):
    t = np.asarray(t, dtype=np.float64)
    if tag == "const":
        return np.full_like(t, params["value"])
    if tag == "linear":
        return params["slope"] * t + params["intercept"]
    if tag == "exp":
        return params["amplitude"] * np.exp(params["rate"] * t)
    if tag == "cos_affine":
        return params["amplitude"] * np.cos(params["omega"] * t) + params["offset"]
    if tag == "poly4":
        return (1.0 + params["growth"] * (t - params["t_ref"])) ** 4
    if tag == "rational_rampdown":
        nu = params["nu"]
        return (nu * t - 1.0) / (nu ** 0.25 - 1.0)
    raise ValueError(f"unknown formula tag {tag!r}")


def _xi_antiderivative(tag: str, params: dict, t0: float, t1: float) -> float:
    """Exact integral of the tagged formula over [t0, t1]."""
    if tag == "const":
        return params["value"] * (t1 - t0)
    if tag == "linear":
        a, b = params["slope"], params["intercept"]
        return 0.5 * a * (t1 * t1 - t0 * t0) + b * (t1 - t0)
    if tag == "exp":
        amp, rate = params["amplitude"], params["rate"]
        if rate == 0.0:
            return amp * (t1 - t0)
        return amp / rate * (math.exp(rate * t1) - math.exp(rate * t0))
    if tag == "cos_affine":
        a, w, b = params["amplitude"], params["omega"], params["offset"]
        if w == 0.0:
            return (a + b) * (t1 - t0)
        return a / w * (math.sin(w * t1) - math.sin(w * t0)) + b * (t1 - t0)
    if tag == "poly4":
        c, tr = params["growth"], params["t_ref"]
        if c == 0.0:
            return t1 - t0
        return ((1.0 + c * (t1 - tr)) ** 5 - (1.0 + c * (t0 - tr)) ** 5) / (5.0 * c)
    if tag == "rational_rampdown":
        nu = params["nu"]
        a = nu / (nu ** 0.25 - 1.0)
        b = -1.0 / (nu ** 0.25 - 1.0)
        return 0.5 * a * (t1 * t1 - t0 * t0) + b * (t1 - t0)
    raise ValueError(f"unknown formula tag {tag!r}")


def _xi_cubed_antiderivative(tag: str, params: dict, t0: float, t1: float):
    """Exact integral of xi^3 where a closed form exists, else None."""
    if tag == "const":
        return params["value"] ** 3 * (t1 - t0)
    if tag in ("linear", "rational_rampdown"):
        if tag == "linear":
            a, b = params["slope"], params["intercept"]
        else:
            nu = params["nu"]
            a = nu / (nu ** 0.25 - 1.0)
            b = -1.0 / (nu ** 0.25 - 1.0)
        if a == 0.0:
            return b ** 3 * (t1 - t0)
        return ((a * t1 + b) ** 4 - (a * t0 + b) ** 4) / (4.0 * a)
    if tag == "exp":
        amp, rate = params["amplitude"], params["rate"]
        if rate == 0.0:
            return amp ** 3 * (t1 - t0)
        return amp ** 3 / (3.0 * rate) * (math.exp(3.0 * rate * t1) - math.exp(3.0 * rate * t0))
    if tag == "poly4":
        c, tr = params["growth"], params["t_ref"]
        if c == 0.0:
            return t1 - t0
        return ((1.0 + c * (t1 - tr)) ** 13 - (1.0 + c * (t0 - tr)) ** 13) / (13.0 * c)
    return None


@dataclass(frozen=True)
class Piece:
    t0: float
    t1: float
    tag: str
    params: dict

    def __post_init__(self) -> None:
        if self.tag not in FORMULA_TAGS:
            raise ValueError(f"unknown formula tag {self.tag!r}; known: {FORMULA_TAGS}")
        if not self.t1 > self.t0:
            raise ValueError(f"piece interval [{self.t0}, {self.t1}) is empty")

    def xi(self, t):
        return _xi_value(self.tag, self.params, t)

    def integral_xi(self, a: float, b: float) -> float:
        return _xi_antiderivative(self.tag, self.params, a, b)

    def integral_xi_cubed(self, a: float, b: float):
        return _xi_cubed_antiderivative(self.tag, self.params, a, b)


@dataclass(frozen=True)
class Modulation:
    """Piecewise modulation xi(t) >= 0 on [0, horizon]."""

    pieces: tuple
    horizon: float
    name: str = "custom"

    def __post_init__(self) -> None:
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("modulation needs at least one piece")
        if abs(pieces[0].t0) > 1e-12:
            raise ValueError("first piece must start at t = 0")
        for left, right in zip(pieces, pieces[1:]):
            if abs(left.t1 - right.t0) > 1e-9 * max(1.0, abs(left.t1)):
                raise ValueError(
                    f"pieces must partition [0, T] without gaps or overlaps at t = {left.t1}"
                )
        if abs(pieces[-1].t1 - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError("last piece must end at the horizon")
        for piece in pieces:
            probes = np.linspace(piece.t0, piece.t1, 101)
            if np.min(piece.xi(probes)) < -1e-12:
                raise ValueError(f"xi must be nonnegative; negative value on piece at [{piece.t0}, {piece.t1})")
        object.__setattr__(self, "pieces", pieces)

    @property
    def breakpoints(self) -> tuple:
        """Interior piece boundaries, strictly inside (0, horizon)."""
        return tuple(piece.t1 for piece in self.pieces[:-1])

    def _check_time(self, t: float) -> None:
        if t < -1e-12 or t > self.horizon * (1 + 1e-12) + 1e-12:
            raise ValueError(f"t = {t} outside the modulation horizon [0, {self.horizon}]")

    def _piece_index(self, t: float) -> int:
        starts = [piece.t0 for piece in self.pieces]
        idx = int(np.searchsorted(starts, t, side="right")) - 1
        return min(max(idx, 0), len(self.pieces) - 1)

    def xi(self, t: float) -> float:
        """xi(t); at interior breakpoints this is the right-limit."""
        self._check_time(t)
        return float(self.pieces[self._piece_index(t)].xi(t))

    def xi_array(self, times: np.ndarray) -> np.ndarray:
        return np.array([self.xi(float(t)) for t in np.asarray(times, dtype=np.float64)])

    def Xi(self, t: float) -> float:
        """Xi(t) = integral of xi from 0 to t, exact per-piece closed forms."""
        self._check_time(t)
        total = 0.0
        for piece in self.pieces:
            if t <= piece.t0:
                break
            total += piece.integral_xi(piece.t0, min(t, piece.t1))
        return total

    def Xi_quadrature(self, t: float, tol: float = 1e-10) -> float:
        """Same as Xi(t) via adaptive Simpson; independent cross-check path."""
        self._check_time(t)
        total = 0.0
        for piece in self.pieces:
            if t <= piece.t0:
                break
            hi = min(t, piece.t1)
            total += adaptive_simpson(lambda x: float(piece.xi(x)), piece.t0, hi, tol=tol)
        return total

    def xi_minimum(self, probes_per_piece: int = 2001) -> float:
        return min(
            float(np.min(piece.xi(np.linspace(piece.t0, piece.t1, probes_per_piece))))
            for piece in self.pieces
        )

    def xi_maximum(self, probes_per_piece: int = 2001) -> float:
        return max(
            float(np.max(piece.xi(np.linspace(piece.t0, piece.t1, probes_per_piece))))
            for piece in self.pieces
        )


@dataclass(frozen=True)
class WeightFamily:
    """Decreasing weights w(t) = 1/(1 + nu^s t); the "unit" sentinel is w = 1.

    The sentinel realizes the constant-bounds regime exactly instead of
    approximating the large-s limit.
    """

    s: object  # float >= 0 or the string "unit"
    nu: float

    def __post_init__(self) -> None:
        if self.s != "unit":
            s = float(self.s)
            if s < 0:
                raise ValueError(f"weight exponent s must be >= 0, got {s}")
            object.__setattr__(self, "s", s)
        if self.nu < 0:
            raise ValueError("nu must be nonnegative")

    @property
    def is_unit(self) -> bool:
        return self.s == "unit"

    @property
    def nu_pow_s(self) -> float:
        return 0.0 if self.is_unit else self.nu ** self.s

    def w(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.is_unit:
            return np.ones_like(t)
        return 1.0 / (1.0 + self.nu_pow_s * t)


@dataclass
class TheoremCheck:
    admissible: bool
    violations: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"admissible": self.admissible, "violations": self.violations, **self.details}


@dataclass
class AdmissibilityReport:
    thm1: TheoremCheck
    thm2: TheoremCheck
    per_interval: list

    def to_dict(self) -> dict:
        return {
            "thm1": self.thm1.to_dict(),
            "thm2": self.thm2.to_dict(),
            "per_interval": [
                {"t0": t0, "t1": t1, "label": label} for t0, t1, label in self.per_interval
            ],
        }


def switch_time(nu: float, k: int, beta: float, C: float, s) -> float:
    """Time t* where the static lower bound hands over to the dynamic one.

    Negative values are clamped to 0: then the dynamic bound governs from
    t = 0.  Infinite for the unit weight family (the static bound governs
    throughout).
    """
    if s == "unit":
        return math.inf
    nu_s = nu ** float(s)
    raw = (abs(k) ** 0.5 * C * beta ** 1.5 / nu ** 0.5 - 1.0) / nu_s
    return max(0.0, raw)


def switch_time_alt(nu: float, k: int, beta: float, C: float, s) -> float:
    """Variant switch time with an extra nu^{1/2} factor inside the bracket.

    Two published forms of the handover time differ by this factor; the main
    form is switch_time().  This one is retained for cross-checking and is
    recorded in admissibility reports.
    """
    if s == "unit":
        return math.inf
    nu_s = nu ** float(s)
    raw = (abs(k) ** 0.5 * C * beta ** 1.5 - 1.0) / nu_s
    return max(0.0, raw)


def lower_bound_thm1(t, nu: float, k: int, beta: float, C: float, weights: WeightFamily, t_star: float):
    """L(t): static C^2 beta^2 before t*, dynamic (nu/(|k| beta)) w^{-2} after."""
    t = np.asarray(t, dtype=np.float64)
    static = np.full_like(t, C * C * beta * beta)
    if weights.is_unit:
        return static
    dynamic = (nu / (abs(k) * beta)) * weights.w(t) ** -2
    return np.where(t <= t_star, static, dynamic)


def upper_bound_thm1(t, weights: WeightFamily, ell: float):
    """U(t) = w(t)^{-ell}."""
    return weights.w(t) ** -ell


def _probe_times(piece: Piece, n: int = 1000) -> np.ndarray:
    return np.linspace(piece.t0, piece.t1, n + 1)


def _fd_slope(piece: Piece, t: np.ndarray) -> np.ndarray:
    """Finite-difference xi' on a piece, one-sided at its endpoints."""
    h = min(1e-3, (piece.t1 - piece.t0) / 1000.0)
    lo = np.maximum(t - h, piece.t0)
    hi = np.minimum(t + h, piece.t1)
    return (piece.xi(hi) - piece.xi(lo)) / (hi - lo)


def _check_thm1_on_pieces(pieces, nu, k, beta, ell, C, weights, local_clock: bool):
    """thm1 lower/upper bound violations over the given pieces.

    With local_clock the weight family and switch time restart at the first
    piece's start, matching how per-interval estimates are chained.
    """
    t_star = switch_time(nu, k, beta, C, weights.s)
    violations = []
    origin = pieces[0].t0 if local_clock else 0.0
    for piece in pieces:
        times = _probe_times(piece)
        xi_vals = np.asarray(piece.xi(times), dtype=np.float64)
        tau = times - origin
        lower = lower_bound_thm1(tau, nu, k, beta, C, weights, t_star)
        upper = upper_bound_thm1(tau, weights, ell)
        bad_low = xi_vals < lower * (1.0 - _REL_TOL) - 1e-300
        bad_high = xi_vals > upper * (1.0 + _REL_TOL)
        if np.any(bad_low):
            j = int(np.argmax(bad_low))
            violations.append(
                {"condition": "lower_bound", "t": float(times[j]), "xi": float(xi_vals[j]), "bound": float(lower[j])}
            )
        if np.any(bad_high):
            j = int(np.argmax(bad_high))
            violations.append(
                {"condition": "upper_bound", "t": float(times[j]), "xi": float(xi_vals[j]), "bound": float(upper[j])}
            )
    return violations, t_star


def _check_thm2_on_pieces(pieces, nu, k, C_xi):
    violations = []
    slope_cap = C_xi * (nu * abs(k)) ** 0.5
    conservative_cap = 0.01 * C_xi ** -0.5 * (nu * abs(k)) ** 0.5 if C_xi > 0 else math.inf
    conservative_ok = True
    for piece in pieces:
        times = _probe_times(piece)
        xi_vals = np.asarray(piece.xi(times), dtype=np.float64)
        slopes = _fd_slope(piece, times)
        bad_size = xi_vals > 1.0 + _REL_TOL
        bad_slope = slopes > slope_cap * (1.0 + _REL_TOL) + 1e-300
        if np.any(bad_size):
            j = int(np.argmax(bad_size))
            violations.append({"condition": "xi_le_1", "t": float(times[j]), "xi": float(xi_vals[j]), "bound": 1.0})
        if np.any(bad_slope):
            j = int(np.argmax(bad_slope))
            violations.append(
                {"condition": "slope", "t": float(times[j]), "xi_prime": float(slopes[j]), "bound": float(slope_cap)}
            )
        if np.any(slopes > conservative_cap * (1.0 + _REL_TOL)):
            conservative_ok = False
    return violations, conservative_ok


def classify(
    m: Modulation,
    nu: float,
    k: int,
    weights: WeightFamily,
    beta: float,
    ell: float,
    C: float,
    C_xi: float,
) -> AdmissibilityReport:
    """Test a modulation against both theorems' hypotheses by dense sampling.

    Produces a report always; global admissibility uses the global clock,
    per-piece labels use a clock restarted at each piece (the chaining
    convention).  Labels: thm1 beats thm2 when both hold; "off" marks pieces
    with xi identically zero; "none" marks pieces fitting neither theorem.
    """
    if not (nu / abs(k) <= beta <= 1.0 + 1e-15):
        raise ValueError(f"beta must lie in [nu/|k|, 1], got {beta}")
    if not (2.0 <= ell <= 4.0):
        raise ValueError(f"ell must lie in [2, 4], got {ell}")

    thm1_violations, t_star = _check_thm1_on_pieces(
        list(m.pieces), nu, k, beta, ell, C, weights, local_clock=False
    )
    thm2_violations, conservative_ok = _check_thm2_on_pieces(list(m.pieces), nu, k, C_xi)

    thm1 = TheoremCheck(
        admissible=not thm1_violations,
        violations=thm1_violations,
        details={
            "beta": beta,
            "s": weights.s,
            "ell": ell,
            "C": C,
            "t_star": t_star,
            "t_star_alt": switch_time_alt(nu, k, beta, C, weights.s),
        },
    )
    thm2 = TheoremCheck(
        admissible=not thm2_violations,
        violations=thm2_violations,
        details={"C_xi": C_xi, "conservative_slope_ok": conservative_ok},
    )

    per_interval = []
    for piece in m.pieces:
        if float(np.max(np.abs(piece.xi(_probe_times(piece))))) <= 1e-14:
            label = "off"
        else:
            v1, _ = _check_thm1_on_pieces([piece], nu, k, beta, ell, C, weights, local_clock=True)
            if not v1:
                label = "thm1"
            else:
                v2, _ = _check_thm2_on_pieces([piece], nu, k, C_xi)
                label = "thm2" if not v2 else "none"
        per_interval.append((piece.t0, piece.t1, label))

    return AdmissibilityReport(thm1=thm1, thm2=thm2, per_interval=per_interval)


def eval_xi(m: Modulation, t: float) -> float:
    return m.xi(t)


def eval_Xi(m: Modulation, t: float) -> float:
    return m.Xi(t)


def builtin(name: str, **params) -> Modulation:
    """Built-in modulations with exact piecewise formulas.

    Names: constant, exp_nu, exp_unit, oscillatory, poly, example_A,
    example_B.  All except "constant" and "oscillatory" require nu; a
    horizon can always be overridden.
    """

    def _need_nu() -> float:
        if "nu" not in params:
            raise ValueError(f"builtin modulation {name!r} requires nu")
        return float(params["nu"])

    if name == "constant":
        value = float(params.get("value", 1.0))
        horizon = float(params.get("horizon", params["nu"] ** -1 if "nu" in params else 1.0))
        return Modulation(
            (Piece(0.0, horizon, "const", {"value": value}),), horizon, name="constant"
        )
    if name == "exp_nu":
        nu = _need_nu()
        horizon = float(params.get("horizon", 1.0 / nu))
        return Modulation(
            (Piece(0.0, horizon, "exp", {"amplitude": 1.0, "rate": -nu}),), horizon, name="exp_nu"
        )
    if name == "exp_unit":
        nu = _need_nu()
        horizon = float(params.get("horizon", 1.0 / nu))
        return Modulation(
            (Piece(0.0, horizon, "exp", {"amplitude": 1.0, "rate": -1.0}),), horizon, name="exp_unit"
        )
    if name == "oscillatory":
        horizon = float(params.get("horizon", params["nu"] ** -1 if "nu" in params else 100.0))
        return Modulation(
            (Piece(0.0, horizon, "cos_affine", {"amplitude": 0.25, "omega": 1.0, "offset": 0.5}),),
            horizon,
            name="oscillatory",
        )
    if name == "poly":
        nu = _need_nu()
        horizon = float(params.get("horizon", nu ** -0.75))
        return Modulation(
            (Piece(0.0, horizon, "poly4", {"growth": nu ** 0.25, "t_ref": 0.0}),),
            horizon,
            name="poly",
        )
    if name == "example_A":
        nu = _need_nu()
        t1 = nu ** -0.5
        horizon = nu ** -0.75
        return Modulation(
            (
                Piece(0.0, t1, "linear", {"slope": nu ** 0.5, "intercept": 0.0}),
                Piece(t1, horizon, "poly4", {"growth": nu ** 0.25, "t_ref": t1}),
            ),
            horizon,
            name="example_A",
        )
    if name == "example_B":
        nu = _need_nu()
        t1 = nu ** -0.5
        t2 = nu ** -0.75
        horizon = 1.0 / nu
        return Modulation(
            (
                Piece(0.0, t1, "linear", {"slope": nu ** 0.5, "intercept": 0.0}),
                Piece(t1, t2, "const", {"value": 1.0}),
                Piece(t2, horizon, "rational_rampdown", {"nu": nu}),
            ),
            horizon,
            name="example_B",
        )
    raise ValueError(f"unknown builtin modulation {name!r}")


def from_config(config: dict) -> Modulation:
    """Modulation from the scenario-config schema.

    Either {"builtin": name, ...params} or
    {"pieces": [{"t0", "t1", "formula", "params"}, ...], "horizon": T}.
    """
    if "builtin" in config:
        kwargs = {key: value for key, value in config.items() if key != "builtin"}
        return builtin(config["builtin"], **kwargs)
    if "pieces" in config:
        pieces = tuple(
            Piece(float(p["t0"]), float(p["t1"]), p["formula"], dict(p.get("params", {})))
            for p in config["pieces"]
        )
        horizon = float(config.get("horizon", pieces[-1].t1))
        return Modulation(pieces, horizon, name=config.get("name", "custom"))
    raise ValueError("modulation config needs either 'builtin' or 'pieces'")
