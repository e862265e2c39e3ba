"""Shear profiles v(y): derivatives, critical points, and derived constants.

A profile carries callables for v, v', v'' plus the constants that feed the
functional parameter formulas: sup_dv = max |v'|, c_inf = 3 * max |v''|^2,
and the detected critical points with their order.  Profiles are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import TWO_PI, ComplexField, PeriodicGrid

# |v''| below this at a root of v' marks the critical point as degenerate.
SIMPLE_CURVATURE_THRESHOLD = 1e-8
ROOT_TOLERANCE = 1e-10
_CONSTANTS_RESOLUTION = 4096


@dataclass(frozen=True)
class ShearProfile:
    """2*pi-periodic C^2 velocity profile with critical-point metadata.

    critical_points is a tuple of (y, order) pairs where order 2 means a
    simple critical point (v'' != 0) and order 0 flags a degenerate one.
    """

    name: str
    v: callable
    dv: callable
    d2v: callable
    critical_points: tuple = field(default=())
    simple: bool = True
    max_order: int = 2
    sup_dv: float = 0.0
    c_inf: float = 0.0

    def sample(self, grid: PeriodicGrid):
        """(v, v', v'') sampled on the grid points."""
        y = grid.points
        return (
            np.asarray(self.v(y), dtype=np.float64),
            np.asarray(self.dv(y), dtype=np.float64),
            np.asarray(self.d2v(y), dtype=np.float64),
        )


def _derived_constants(dv, d2v) -> tuple[float, float]:
    y = TWO_PI * np.arange(_CONSTANTS_RESOLUTION) / _CONSTANTS_RESOLUTION
    sup_dv = float(np.max(np.abs(dv(y))))
    c_inf = float(3.0 * np.max(np.abs(d2v(y))) ** 2)
    return sup_dv, c_inf


def from_callables(name: str, v, dv, d2v, resolution: int = 4096) -> ShearProfile:
    """Build a profile from v and its two derivatives, detecting critical points."""
    base = ShearProfile(name=name, v=v, dv=dv, d2v=d2v)
    points = detect_critical_points(base, resolution)
    sup_dv, c_inf = _derived_constants(dv, d2v)
    simple = all(order == 2 for _, order in points)
    return ShearProfile(
        name=name,
        v=v,
        dv=dv,
        d2v=d2v,
        critical_points=tuple(points),
        simple=simple,
        max_order=2,
        sup_dv=sup_dv,
        c_inf=c_inf,
    )


def kolmogorov() -> ShearProfile:
    """v(y) = cos y, the reference profile: two simple critical points."""
    return from_callables("kolmogorov", np.cos, lambda y: -np.sin(y), lambda y: -np.cos(y))


def two_mode(a: float) -> ShearProfile:
    """v(y) = sin y + a sin 2y."""
    return from_callables(
        f"two_mode(a={a})",
        lambda y: np.sin(y) + a * np.sin(2 * y),
        lambda y: np.cos(y) + 2 * a * np.cos(2 * y),
        lambda y: -np.sin(y) - 4 * a * np.sin(2 * y),
    )


def tabulated(values, name: str = "tabulated") -> ShearProfile:
    """Profile from uniform samples of v, differentiated spectrally.

    The callables evaluate the trigonometric interpolant of the samples, so
    the profile is exactly the band-limited function through the data.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1 or vals.size < 8:
        raise ValueError("tabulated profile needs a 1-d array of at least 8 samples")
    m = vals.size
    coeffs = np.fft.fft(vals) / m
    n = np.rint(np.fft.fftfreq(m, d=1.0 / m)).astype(np.int64)
    if m % 2 == 0:
        # Drop the unpaired Nyquist mode so derivatives stay real.
        coeffs = coeffs.copy()
        coeffs[m // 2] = 0.0

    def _eval(y, mult):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        phases = np.exp(1j * np.outer(y, n))
        out = np.real(phases @ (coeffs * mult))
        return out if out.size > 1 else float(out[0])

    one = np.ones_like(coeffs)
    return from_callables(
        name,
        lambda y: _eval(y, one),
        lambda y: _eval(y, 1j * n),
        lambda y: _eval(y, -(n.astype(np.float64) ** 2)),
        resolution=max(4096, 4 * m),
    )


def _bisect_root(dv, lo: float, hi: float) -> float:
    flo = dv(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = dv(mid)
        if abs(fmid) <= ROOT_TOLERANCE and (hi - lo) < 1e-12:
            return mid
        if flo * fmid <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def detect_critical_points(profile: ShearProfile, resolution: int = 4096):
    """Roots of v' on the circle via sign-change bracketing plus bisection.

    Each root is annotated with order 2 when |v''| exceeds the curvature
    threshold there, else order 0 (degenerate).  Grid points where v'
    vanishes to within tolerance are treated as roots even without a sign
    change, which catches tangential (even-order) zeros landing on the scan.
    """
    if resolution < 64:
        raise ValueError(f"resolution must be >= 64, got {resolution}")
    y = TWO_PI * np.arange(resolution + 1) / resolution  # closes the circle
    g = np.asarray(profile.dv(y), dtype=np.float64)
    scale = float(np.max(np.abs(g)))
    if scale < 1e-13:
        raise ValueError("derivative of the profile vanishes identically: no isolated critical points")

    roots: list[float] = []

    def _push(root: float) -> None:
        root = root % TWO_PI
        for existing in roots:
            gap = abs(root - existing)
            if min(gap, TWO_PI - gap) < 1e-7:
                return
        roots.append(root)

    near_zero = np.abs(g) <= ROOT_TOLERANCE * max(1.0, scale)
    for j in range(resolution):
        if near_zero[j]:
            _push(y[j])
        elif not near_zero[j + 1] and g[j] * g[j + 1] < 0.0:
            _push(_bisect_root(profile.dv, y[j], y[j + 1]))

    annotated = []
    for root in sorted(roots):
        curvature = abs(float(profile.d2v(root)))
        annotated.append((root, 2 if curvature > SIMPLE_CURVATURE_THRESHOLD else 0))
    return annotated


def _bump(y: np.ndarray, center: float, width: float) -> np.ndarray:
    dist = np.angle(np.exp(1j * (y - center)))
    return np.exp(-((dist / width) ** 2))


def _trial_fields(profile: ShearProfile, grid: PeriodicGrid, trials: int, seed: int):
    """Deterministic sequence of trial fields probing the gap inequality.

    Mix of single Fourier modes, bumps pinned at (and away from) critical
    points at several widths, and random band-limited draws.
    """
    y = grid.points
    fields: list[np.ndarray] = []
    for n in range(1, 9):
        fields.append(np.exp(1j * n * y))
    widths = (0.03, 0.05, 0.1, 0.2, 0.4)
    centers = [yc for yc, _ in profile.critical_points]
    centers += [(a + b) / 2 + np.pi / 7 for a, b in zip(centers, centers[1:] + centers[:1])]
    for width in widths:
        for center in centers:
            fields.append(_bump(y, center, width).astype(np.complex128))
            fields.append(_bump(y, center, width) * np.exp(4j * y))
    rng = np.random.Generator(np.random.Philox(seed))
    while len(fields) < trials:
        coeffs = np.zeros(grid.n_points, dtype=np.complex128)
        modes = np.arange(-16, 17)
        coeffs[modes % grid.n_points] = rng.standard_normal(modes.size) + 1j * rng.standard_normal(
            modes.size
        )
        fields.append(np.fft.ifft(coeffs * grid.n_points))
    return fields[:trials]


def estimate_spectral_gap_constant(
    profile: ShearProfile,
    sigma_grid=None,
    trials: int = 200,
    seed: int = 101,
    n_points: int = 512,
) -> float:
    """Smallest constant C with sigma^{1/2} E0 <= C (sigma E1 + E4) over trials.

    The estimate is a supremum of the observed ratio over the sampled sigma
    values and trial fields, clamped to at least 1.  It is monotone
    non-decreasing in the number of trials because the trial sequence is a
    deterministic prefix-extendable list.
    """
    if not profile.simple:
        raise ValueError("spectral-gap estimation requires a profile with only simple critical points")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    if sigma_grid is None:
        sigma_grid = np.logspace(-4, 0, 33)
    sigma_grid = np.asarray(sigma_grid, dtype=np.float64)
    if np.any(sigma_grid <= 0.0) or np.any(sigma_grid > 1.0):
        raise ValueError("sigma values must lie in (0, 1]")

    grid = PeriodicGrid(n_points)
    dy = grid.spacing
    wavenumbers = grid.wavenumbers
    dv_vals = np.asarray(profile.dv(grid.points), dtype=np.float64)

    best = 0.0
    any_nonzero = False
    for values in _trial_fields(profile, grid, trials, seed):
        e0 = dy * float(np.sum(np.abs(values) ** 2))
        if e0 <= 0.0:
            continue
        any_nonzero = True
        deriv = np.fft.ifft(np.fft.fft(values) * (1j * wavenumbers))
        e1 = dy * float(np.sum(np.abs(deriv) ** 2))
        e4 = dy * float(np.sum(np.abs(dv_vals * values) ** 2))
        ratios = np.sqrt(sigma_grid) * e0 / (sigma_grid * e1 + e4)
        best = max(best, float(np.max(ratios)))
    if not any_nonzero:
        raise ValueError("all trial fields were zero")
    return max(best, 1.0)
