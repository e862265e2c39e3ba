"""Periodic grids, complex scalar fields, and spectral calculus on the circle.

Everything downstream (shear profiles, the per-mode solver, energy ledgers)
is built on the two value types here: a uniform grid on the 2*pi torus and a
complex field sampled on it, tagged with its nonzero horizontal wavenumber.
All operations are pure; fields are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid y_j = 2*pi*j/n_points on the 2*pi-periodic circle."""

    n_points: int

    def __post_init__(self) -> None:
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError(f"n_points must be an integer >= 8, got {self.n_points!r}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def length(self) -> float:
        return TWO_PI

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n_points

    @property
    def points(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_points) / self.n_points

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order: 0, 1, ..., N/2-1, -N/2, ..., -1."""
        return np.rint(np.fft.fftfreq(self.n_points, d=1.0 / self.n_points)).astype(np.int64)


@dataclass(frozen=True)
class ComplexField:
    """Complex samples theta(y_j) on a grid, for one horizontal mode k != 0."""

    grid: PeriodicGrid
    values: np.ndarray
    x_wavenumber: int

    def __post_init__(self) -> None:
        if self.x_wavenumber == 0:
            raise ValueError("x_wavenumber must be nonzero (fields are mean-free in x)")
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.ndim != 1 or vals.shape[0] != self.grid.n_points:
            raise ValueError(
                f"values must be a 1-d array of length {self.grid.n_points}, got shape {vals.shape}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "x_wavenumber", int(self.x_wavenumber))

    def with_values(self, values: np.ndarray) -> "ComplexField":
        """New field on the same grid and mode with replaced samples."""
        return ComplexField(self.grid, values, self.x_wavenumber)

    def coefficients(self) -> np.ndarray:
        """Fourier coefficients c_n with f(y) = sum_n c_n e^{i n y}, FFT order."""
        return np.fft.fft(self.values) / self.grid.n_points


def single_mode(grid: PeriodicGrid, n: int, k: int, amplitude: complex = 1.0) -> ComplexField:
    """Field amplitude * e^{i n y} on the given grid, tagged with mode k."""
    return ComplexField(grid, amplitude * np.exp(1j * n * grid.points), k)


def from_function(grid: PeriodicGrid, func, k: int) -> ComplexField:
    """Sample a callable y -> complex on the grid."""
    return ComplexField(grid, np.asarray(func(grid.points), dtype=np.complex128), k)


def random_band_limited(
    grid: PeriodicGrid, k: int, seed: int, bandwidth: int = 8
) -> ComplexField:
    """Random field with iid complex-Gaussian coefficients on |n| <= bandwidth.

    Uses the counter-based Philox generator so a single 64-bit seed fully
    determines the draw independent of call order.
    """
    if bandwidth < 1 or bandwidth > grid.n_points // 2 - 1:
        raise ValueError(f"bandwidth must be in [1, n_points/2 - 1], got {bandwidth}")
    rng = np.random.Generator(np.random.Philox(seed))
    coeffs = np.zeros(grid.n_points, dtype=np.complex128)
    modes = np.arange(-bandwidth, bandwidth + 1)
    draws = rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)
    coeffs[modes % grid.n_points] = draws / np.sqrt(2.0)
    values = np.fft.ifft(coeffs * grid.n_points)
    return ComplexField(grid, values, k)


def _require_same_grid(f: ComplexField, g: ComplexField) -> None:
    if f.grid.n_points != g.grid.n_points:
        raise ValueError(
            f"grid mismatch: {f.grid.n_points} vs {g.grid.n_points} points"
        )


def spectral_derivative(f: ComplexField, order: int) -> ComplexField:
    """order-th y-derivative via Fourier multipliers (i n)^order.

    Exact for band-limited fields; only orders 1 and 2 are supported.
    """
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    n = f.grid.wavenumbers
    hat = np.fft.fft(f.values) * (1j * n) ** order
    return f.with_values(np.fft.ifft(hat))


def l2_inner(f: ComplexField, g: ComplexField) -> complex:
    """<f, g> = integral over the circle of f conj(g), uniform-grid quadrature.

    The rectangle rule is spectrally accurate for periodic integrands and
    exact on trigonometric polynomials below the Nyquist limit.
    """
    _require_same_grid(f, g)
    return complex(f.grid.spacing * np.sum(f.values * np.conj(g.values)))


def l2_norm_sq(f: ComplexField) -> float:
    """Squared L2 norm, guaranteed real and nonnegative."""
    return float(f.grid.spacing * np.sum(np.abs(f.values) ** 2))


def sobolev_norm(f: ComplexField, s: float) -> float:
    """Sobolev norm (sum_n (1+n^2)^s |c_n|^2 * 2*pi)^{1/2} for s in {-1, 0, 1}.

    s = 0 reduces to the L2 norm; s = -1 is the Fourier-multiplier realization
    of the norm dual to H^1, which makes the mixing functional computable
    exactly on the grid.
    """
    if s not in (-1, 0, 1):
        raise ValueError(f"sobolev index must be one of -1, 0, 1, got {s}")
    n = f.grid.wavenumbers
    coeffs = f.coefficients()
    weights = (1.0 + n.astype(np.float64) ** 2) ** s
    return float(np.sqrt(TWO_PI * np.sum(weights * np.abs(coeffs) ** 2)))
