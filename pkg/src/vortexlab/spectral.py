"""Periodic spectral substrate: grid, transforms, derivatives, Leray split, norms.

Fields live on a uniform n x n grid over the periodic box [0, L)^2.  Fourier
coefficients follow the convention

    f_hat(eta) = sum_x f(x) exp(+i eta . x) dx^2,

so the coefficient at eta = 0 is the discrete integral of f and partial_k
acts as multiplication by -i eta_k.  Profiles and moments treat the box
center L/2 as the origin of the plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAX_DERIVATIVE_ORDER = 8


class SpectralError(ValueError):
    """Raised on violated grid/field contracts."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with fft-ordered wavenumbers 2*pi*k/L.

    Parameters
    ----------
    n : int
        Points per axis; must be a power of two, at least 8.
    L : float
        Physical side length of the box.
    """

    n: int
    L: float

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise SpectralError(f"grid size must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise SpectralError(f"box size must be positive, got {self.L}")

    @property
    def dx(self) -> float:
        return self.L / self.n

    @cached_property
    def k_index(self) -> np.ndarray:
        # integer lattice -n/2 .. n/2-1 in fft order
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def eta1(self) -> np.ndarray:
        return (2.0 * np.pi / self.L) * self.k_index[:, None] * np.ones((1, self.n))

    @cached_property
    def eta2(self) -> np.ndarray:
        return (2.0 * np.pi / self.L) * self.k_index[None, :] * np.ones((self.n, 1))

    @cached_property
    def eta_sq(self) -> np.ndarray:
        return self.eta1**2 + self.eta2**2

    @cached_property
    def eta1_odd(self) -> np.ndarray:
        # Nyquist row zeroed: the -n/2 mode has no +n/2 partner, so odd
        # multipliers there would break Hermitian symmetry of real fields.
        out = self.eta1.copy()
        out[self.k_index == -(self.n // 2), :] = 0.0
        return out

    @cached_property
    def eta2_odd(self) -> np.ndarray:
        out = self.eta2.copy()
        out[:, self.k_index == -(self.n // 2)] = 0.0
        return out

    @cached_property
    def eta_sq_odd(self) -> np.ndarray:
        return self.eta1_odd**2 + self.eta2_odd**2

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        # 2/3 rule per axis: keep |k| <= n/3
        keep = np.abs(self.k_index) <= self.n // 3
        return keep[:, None] & keep[None, :]

    @cached_property
    def x1(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        return x[:, None] * np.ones((1, self.n))

    @cached_property
    def x2(self) -> np.ndarray:
        x = np.arange(self.n) * self.dx
        return x[None, :] * np.ones((self.n, 1))

    @cached_property
    def xc1(self) -> np.ndarray:
        """First coordinate measured from the box center."""
        return self.x1 - self.L / 2.0

    @cached_property
    def xc2(self) -> np.ndarray:
        return self.x2 - self.L / 2.0


def make_grid(n: int, L: float) -> Grid:
    """Validated grid constructor."""
    return Grid(int(n), float(L))


@dataclass(frozen=True)
class SpectralField:
    """Scalar field stored as complex Fourier coefficients on a grid."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.grid.n, self.grid.n):
            raise SpectralError(
                f"coefficient shape {self.coeffs.shape} does not match grid n={self.grid.n}"
            )

    def values(self) -> np.ndarray:
        """Physical-space samples (real part; fields represent real functions)."""
        return np.real(np.fft.fft2(self.coeffs)) / self.grid.L**2

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * self.grid.dealias_mask)

    def hermitian_defect(self) -> float:
        """Max |coeffs(-eta) - conj(coeffs(eta))| over the lattice."""
        flipped = np.conj(_reverse_modes(self.coeffs))
        return float(np.abs(self.coeffs - flipped).max())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    @staticmethod
    def zero(grid: Grid) -> "SpectralField":
        return SpectralField(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))


def _reverse_modes(coeffs: np.ndarray) -> np.ndarray:
    # index map k -> -k on the fft-ordered lattice (Nyquist row maps to itself)
    return np.roll(coeffs[::-1, ::-1], shift=(1, 1), axis=(0, 1))


def _check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise SpectralError("fields live on different grids")


@dataclass(frozen=True)
class State:
    """Pair X = (rho_tilde, m): density oscillation and momentum components."""

    rho: SpectralField
    m: tuple[SpectralField, SpectralField]

    def __post_init__(self):
        _check_same_grid(self.rho.grid, self.m[0].grid)
        _check_same_grid(self.rho.grid, self.m[1].grid)

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def components(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return (self.rho, self.m[0], self.m[1])

    def dealiased(self) -> "State":
        return State(self.rho.dealiased(), (self.m[0].dealiased(), self.m[1].dealiased()))

    def __add__(self, other: "State") -> "State":
        return State(self.rho + other.rho, (self.m[0] + other.m[0], self.m[1] + other.m[1]))

    def __sub__(self, other: "State") -> "State":
        return State(self.rho - other.rho, (self.m[0] - other.m[0], self.m[1] - other.m[1]))

    def __mul__(self, scalar: float) -> "State":
        return State(self.rho * scalar, (self.m[0] * scalar, self.m[1] * scalar))

    __rmul__ = __mul__

    @staticmethod
    def zero(grid: Grid) -> "State":
        z = SpectralField.zero
        return State(z(grid), (z(grid), z(grid)))


def transform(values: np.ndarray, grid: Grid) -> SpectralField:
    """Forward transform of physical samples; coeffs(0,0) equals sum f dx^2."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n, grid.n):
        raise SpectralError(f"sample shape {values.shape} does not match grid n={grid.n}")
    return SpectralField(grid, np.fft.ifft2(values) * grid.L**2)


def inverse_transform(field: SpectralField) -> np.ndarray:
    """Physical samples of a spectral field (round-trips with ``transform``)."""
    return field.values()


def as_multi_index(sigma) -> tuple[int, int]:
    """Validate a derivative multi-index (sigma1, sigma2), |sigma| <= 8."""
    s1, s2 = int(sigma[0]), int(sigma[1])
    if s1 < 0 or s2 < 0:
        raise SpectralError(f"multi-index must be nonnegative, got {sigma}")
    if s1 + s2 > MAX_DERIVATIVE_ORDER:
        raise SpectralError(f"|sigma| capped at {MAX_DERIVATIVE_ORDER}, got {s1 + s2}")
    return s1, s2


def derivative_multiplier(grid: Grid, sigma) -> np.ndarray:
    """Fourier multiplier of D^sigma: (-i eta1)^s1 (-i eta2)^s2.

    Odd powers use the Nyquist-zeroed wavenumbers so that real fields stay
    real; even powers keep the full lattice.
    """
    s1, s2 = as_multi_index(sigma)
    mult = np.ones((grid.n, grid.n), dtype=np.complex128)
    for order, eta, eta_odd in ((s1, grid.eta1, grid.eta1_odd), (s2, grid.eta2, grid.eta2_odd)):
        if order == 0:
            continue
        base = eta_odd if order % 2 else eta
        mult = mult * (-1j * base) ** order
    return mult


def derivative(field: SpectralField, sigma) -> SpectralField:
    """Spectral derivative D^sigma."""
    return SpectralField(field.grid, field.coeffs * derivative_multiplier(field.grid, sigma))


def gradient(field: SpectralField) -> tuple[SpectralField, SpectralField]:
    return derivative(field, (1, 0)), derivative(field, (0, 1))


def divergence(m: tuple[SpectralField, SpectralField]) -> SpectralField:
    return derivative(m[0], (1, 0)) + derivative(m[1], (0, 1))


def curl(m: tuple[SpectralField, SpectralField]) -> SpectralField:
    """Scalar vorticity d1 m2 - d2 m1."""
    return derivative(m[1], (1, 0)) - derivative(m[0], (0, 1))


def leray_decompose(
    m: tuple[SpectralField, SpectralField],
) -> tuple[tuple[SpectralField, SpectralField], tuple[SpectralField, SpectralField]]:
    """Split m = m_perp + m_par into divergence-free and curl-free parts.

    The zero mode (and the partnerless Nyquist rows) is assigned to m_perp:
    a constant momentum field is divergence-free.
    """
    grid = m[0].grid
    _check_same_grid(grid, m[1].grid)
    e1, e2 = grid.eta1_odd, grid.eta2_odd
    mag2 = grid.eta_sq_odd
    safe = np.where(mag2 == 0.0, 1.0, mag2)
    dot = (e1 * m[0].coeffs + e2 * m[1].coeffs) / safe
    dot = np.where(mag2 == 0.0, 0.0, dot)
    par = (SpectralField(grid, e1 * dot), SpectralField(grid, e2 * dot))
    perp = (m[0] - par[0], m[1] - par[1])
    return perp, par


def lp_norm(field: SpectralField, p: float) -> float:
    """Riemann-sum L^p norm of the physical samples; p = inf gives the max."""
    return _lp_of_magnitude(np.abs(field.values()), field.grid, p)


def lp_norm_vector(m: tuple[SpectralField, SpectralField], p: float) -> float:
    """L^p norm of the pointwise Euclidean magnitude of a vector field."""
    mag = np.hypot(m[0].values(), m[1].values())
    return _lp_of_magnitude(mag, m[0].grid, p)


def lp_norm_state(state: State, p: float) -> float:
    """L^p norm of the pointwise magnitude over the three state components."""
    r, m1, m2 = (c.values() for c in state.components())
    mag = np.sqrt(r**2 + m1**2 + m2**2)
    return _lp_of_magnitude(mag, state.grid, p)


def _lp_of_magnitude(mag: np.ndarray, grid: Grid, p: float) -> float:
    p = float(p)
    if p < 1.0:
        raise SpectralError(f"Lebesgue exponent must satisfy p >= 1, got {p}")
    if np.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * grid.dx**2) ** (1.0 / p))


def sobolev_norm(state: State, s: int) -> float:
    """H^s norm from Fourier coefficients with the discrete measure 1/L^2."""
    s = int(s)
    if s < 0:
        raise SpectralError(f"Sobolev index must be nonnegative, got {s}")
    grid = state.grid
    weight = (1.0 + grid.eta_sq) ** s
    total = 0.0
    for comp in state.components():
        total += np.sum(weight * np.abs(comp.coeffs) ** 2)
    return float(np.sqrt(total) / grid.L)


def l2_inner(a: SpectralField, b: SpectralField) -> float:
    """L^2 inner product via Parseval."""
    _check_same_grid(a.grid, b.grid)
    return float(np.real(np.sum(a.coeffs * np.conj(b.coeffs))) / a.grid.L**2)


def sample(grid: Grid, func) -> SpectralField:
    """Transform func(xc1, xc2) evaluated on box-centered coordinates."""
    return transform(func(grid.xc1, grid.xc2), grid)
