"""Uniform periodic grids, sampled functions, the discrete Fourier pair and
Hermite bases.

The Fourier convention is fixed once for the whole package::

    f_hat(xi) = integral f(x) exp(-2 pi i x . xi) dx

On a grid with half-width ``L`` and ``N`` points per axis the frequency
samples are ``k / (2L)`` for ``k = -N/2 .. N/2 - 1``.  That frequency lattice
is itself a :class:`Grid` (half-width ``N / (4L)``), returned by
:meth:`Grid.dual`, so ``dft`` maps grid functions to grid functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatchError, ResolutionError


@dataclass(frozen=True)
class Tolerances:
    roundtrip: float = 1e-12
    hermite_gram: float = 1e-8
    hermite_recurrence: float = 1e-8
    tail_mass: float = 1e-10


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L, L)^dim`` with ``N`` points per axis."""

    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.L > 0:
            raise ValueError("half-width must be positive")
        if self.N < 4 or self.N % 2:
            raise ValueError("points per axis must be even and at least 4")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def size(self) -> int:
        return self.N**self.dim

    @property
    def cell(self) -> float:
        """Volume element ``h**dim``."""
        return self.h**self.dim

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``(size, dim)``."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def dual(self) -> "Grid":
        return Grid(self.dim, self.N / (4.0 * self.L), self.N)

    def sample(self, func) -> "GridFunction":
        """Sample ``func(*coords)`` (vectorized, one array per axis)."""
        vals = np.asarray(func(*self.mesh()), dtype=complex)
        return GridFunction(self, np.broadcast_to(vals, self.shape).copy())


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.size != self.grid.size:
            raise GridMismatchError(
                f"{vals.size} values for a grid of {self.grid.size} points"
            )
        object.__setattr__(self, "values", vals.reshape(self.grid.shape))

    def norm(self) -> float:
        return sqrt(self.grid.cell * float(np.sum(np.abs(self.values) ** 2)))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same(self.grid, other.grid)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _check_same(self.grid, other.grid)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__


def _check_same(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def _axes(dim):
    return tuple(range(dim))


def dft(f: GridFunction) -> GridFunction:
    """Quadrature of the forward transform; result lives on ``f.grid.dual()``."""
    g = f.grid
    ax = _axes(g.dim)
    F = sfft.fftshift(sfft.fftn(sfft.ifftshift(f.values, axes=ax), axes=ax), axes=ax)
    return GridFunction(g.dual(), g.cell * F)


def idft(F: GridFunction) -> GridFunction:
    """Inverse of :func:`dft`; ``F`` is indexed by the frequency grid."""
    g = F.grid.dual()
    ax = _axes(g.dim)
    f = sfft.fftshift(sfft.ifftn(sfft.ifftshift(F.values, axes=ax), axes=ax), axes=ax)
    return GridFunction(g, f / g.cell)


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    _check_same(f.grid, g.grid)
    return complex(f.grid.cell * np.vdot(g.values, f.values))


def tail_fraction(f: GridFunction, inner: float = 0.75) -> float:
    """Fraction of ``|f|^2`` lying outside the cube ``|x_i| <= inner * L``."""
    g = f.grid
    inside = np.ones(g.shape, dtype=bool)
    for m in g.mesh():
        inside &= np.abs(m) <= inner * g.L
    total = np.sum(np.abs(f.values) ** 2)
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(f.values[~inside]) ** 2) / total)


# --- smooth cutoffs --------------------------------------------------------


def smooth_step(s):
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class EdgeCutoff:
    """Radial-per-axis bump: 1 on ``|s| <= inner*H``, 0 beyond ``outer*H``."""

    inner: float = 0.75
    outer: float = 0.95

    def __call__(self, s, H):
        r = np.abs(np.asarray(s, dtype=float)) / H
        return 1.0 - smooth_step((r - self.inner) / (self.outer - self.inner))


DEFAULT_EDGE = EdgeCutoff()


# --- Hermite functions -----------------------------------------------------


def hermite_functions(M: int, u, lam: float = 1.0) -> np.ndarray:
    """Rows ``n = 0..M-1`` of ``|lam|^(1/4) h_n(sqrt|lam| u)``.

    ``h_n`` are the L2-normalized Hermite functions, built with the
    three-term recurrence.
    """
    u = np.asarray(u, dtype=float)
    a = abs(lam)
    s = sqrt(a) * u
    out = np.empty((M,) + u.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * s * s)
    if M > 1:
        out[1] = sqrt(2.0) * s * out[0]
    for n in range(1, M - 1):
        out[n + 1] = sqrt(2.0 / (n + 1)) * s * out[n] - sqrt(n / (n + 1)) * out[n - 1]
    return out * a**0.25


def hermite_grid(M: int, lam: float = 1.0) -> Grid:
    """A 1-d grid satisfying the Hermite resolution rule for ``(M, lam)``.

    Besides the rule checked in :func:`hermite_basis`, the spacing is kept
    below the Nyquist limit of products of two mode-``M`` functions.
    """
    a = abs(lam)
    L = 2.0 * sqrt(2.0 * M / min(a, 1.0)) + 6.0 / sqrt(a)
    h_max = np.pi / (2.0 * sqrt((2 * M + 1) * a) + 4.0 * sqrt(a))
    n_rule = 8 * ceil(sqrt(M * max(a, 1.0 / a)))
    N = max(n_rule, int(ceil(2 * L / h_max)))
    N = int(2 ** ceil(np.log2(max(N, 4))))
    return Grid(1, L, N)


@dataclass(frozen=True, eq=False)
class HermiteBasis:
    M: int
    lam: float
    grid: Grid
    vectors: np.ndarray = field(repr=False)

    def gram(self) -> np.ndarray:
        return self.grid.h * self.vectors.conj() @ self.vectors.T

    def gram_deviation(self) -> float:
        return float(np.max(np.abs(self.gram() - np.eye(self.M))))

    def recurrence_residual(self) -> float:
        """Max residual of the three-term recurrence over interior points."""
        s = sqrt(abs(self.lam)) * self.grid.axis
        v = self.vectors
        worst = 0.0
        for n in range(1, self.M - 1):
            r = v[n + 1] - sqrt(2.0 / (n + 1)) * s * v[n] + sqrt(n / (n + 1)) * v[n - 1]
            worst = max(worst, float(np.max(np.abs(r[1:-1]))))
        return worst


def hermite_basis(M: int, lam: float, grid: Grid, tol: float | None = None) -> HermiteBasis:
    if M < 1:
        raise ValueError("truncation must be at least 1")
    if lam == 0:
        raise ValueError("scale must be nonzero")
    if grid.dim != 1:
        raise GridMismatchError("Hermite bases live on 1-d grids")
    tol = DEFAULT_TOLERANCES.hermite_gram if tol is None else tol
    a = abs(lam)
    need_N = 8 * ceil(sqrt(M * max(a, 1.0 / a)))
    need_L = 2.0 * sqrt(2.0 * M / min(a, 1.0))
    if grid.N < need_N or grid.L < need_L:
        raise ResolutionError(
            f"grid (L={grid.L}, N={grid.N}) below rule (L>={need_L:.3g}, N>={need_N})"
        )
    basis = HermiteBasis(M, lam, grid, hermite_functions(M, grid.axis, lam))
    dev = basis.gram_deviation()
    if dev > tol:
        raise ResolutionError(f"Gram deviation {dev:.2e} exceeds {tol:.1e}")
    return basis
