"""The Heisenberg group ``H_1`` with the symmetric group law

    (x, y, t)(x', y', t') = (x + x', y + y', t + t' + (x y' - x' y) / 2),

its dilations ``(r x, r y, r^2 t)`` (homogeneous dimension 4), functions on a
cubic grid over ``(x, y, t)``, convolution and the left-invariant fields
``X1 = d_x - (y/2) d_t``, ``X2 = d_y + (x/2) d_t``, ``T = d_t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

from ..errors import GridMismatchError, ResolutionError, SupportOverflowError
from ..grid import Grid
from .. import kernels

HOMOGENEOUS_DIMENSION = 4


@dataclass(frozen=True)
class HeisenbergElement:
    x: float = 0.0
    y: float = 0.0
    t: float = 0.0

    def __mul__(self, other: "HeisenbergElement") -> "HeisenbergElement":
        return multiply(self, other)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.t)


IDENTITY = HeisenbergElement()


def multiply(g: HeisenbergElement, h: HeisenbergElement) -> HeisenbergElement:
    return HeisenbergElement(g.x + h.x, g.y + h.y, g.t + h.t + 0.5 * (g.x * h.y - h.x * g.y))


def inverse(g: HeisenbergElement) -> HeisenbergElement:
    return HeisenbergElement(-g.x, -g.y, -g.t)


def dilate(r: float, g: HeisenbergElement) -> HeisenbergElement:
    if not r > 0:
        raise ValueError("dilation factor must be positive")
    return HeisenbergElement(r * g.x, r * g.y, r * r * g.t)


def dilation_jacobian(r: float) -> float:
    """Jacobian of ``g -> dilate(r, g)`` with respect to Haar measure ``dx dy dt``."""
    return float(np.linalg.det(np.diag([r, r, r * r])))


def multiply_arrays(x1, y1, t1, x2, y2, t2):
    """Vectorized group law on coordinate arrays."""
    return x1 + x2, y1 + y2, t1 + t2 + 0.5 * (x1 * y2 - x2 * y1)


# -- functions on the group --------------------------------------------------


@dataclass(frozen=True, eq=False)
class HGroupFunction:
    """Samples on a cubic 3-d grid, axes ordered ``(x, y, t)``."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.grid.dim != 3:
            raise GridMismatchError("group functions need a 3-d grid")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise GridMismatchError(f"values of shape {vals.shape} on grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def sample(cls, grid: Grid, func) -> "HGroupFunction":
        x, y, t = grid.mesh()
        return cls(grid, np.broadcast_to(np.asarray(func(x, y, t), dtype=complex), grid.shape).copy())

    def norm(self) -> float:
        return float(np.sqrt(self.grid.cell * np.sum(np.abs(self.values) ** 2)))

    def __add__(self, other):
        _same(self, other)
        return HGroupFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same(self, other)
        return HGroupFunction(self.grid, self.values - other.values)

    def __mul__(self, c):
        return HGroupFunction(self.grid, self.values * c)

    __rmul__ = __mul__


#: (weight, width factor) combinations of Gaussians whose low moments vanish
_MOLLIFIER_MIX = {
    2: ((1.0, 1.0),),
    4: ((2.0, 1.0), (-1.0, np.sqrt(2.0))),
    6: ((3.0, 1.0), (-3.0, np.sqrt(2.0)), (1.0, np.sqrt(3.0))),
}


def mollified_delta(grid: Grid, width: float, order: int = 2) -> HGroupFunction:
    """Approximate identity at the group identity with unit discrete mass.

    ``order=2`` is a single Gaussian ``exp(-pi |g|^2 / width^2)``; orders 4
    and 6 combine Gaussians of widths ``width * sqrt(k)`` so that the second
    (and fourth) moments vanish, which makes ``f * delta - f`` of that order
    in ``width``.
    """
    if order not in _MOLLIFIER_MIX:
        raise ValueError(f"order must be one of {sorted(_MOLLIFIER_MIX)}")
    x, y, t = grid.mesh()
    r2 = x * x + y * y + t * t
    vals = np.zeros(grid.shape)
    for weight, factor in _MOLLIFIER_MIX[order]:
        bump = np.exp(-pi * r2 / (width * factor) ** 2)
        vals += weight * bump / (bump.sum() * grid.cell)
    return HGroupFunction(grid, vals)


def _same(f, g):
    if f.grid != g.grid:
        raise GridMismatchError("group functions live on different grids")


# -- t-axis Fourier transform (exact on the grid) -----------------------------


def t_frequencies(grid: Grid) -> np.ndarray:
    """Frequencies ``lambda_k = pi k / L`` dual to the periodic t-axis (fft order)."""
    return 2 * pi * np.fft.fftfreq(grid.N, d=grid.h)


def t_transform(f: HGroupFunction) -> np.ndarray:
    """``sum_t f(x, y, t) exp(-i lambda_k t) h`` for every ``lambda_k`` (last axis, fft order)."""
    g = f.grid
    k = np.fft.fftfreq(g.N, d=1.0 / g.N)
    return np.fft.fft(f.values, axis=2) * (g.h * np.exp(1j * pi * k))


def t_inverse(Ft: np.ndarray, grid: Grid) -> np.ndarray:
    k = np.fft.fftfreq(grid.N, d=1.0 / grid.N)
    return np.fft.ifft(Ft * np.exp(-1j * pi * k) / grid.h, axis=2)


def t_slice(f: HGroupFunction, lam: float) -> np.ndarray:
    """``sum_t f(x, y, t) exp(-i lam t) h`` at an arbitrary ``lam``."""
    t = f.grid.axis
    return f.values @ (np.exp(-1j * lam * t) * f.grid.h)


# -- convolution ---------------------------------------------------------------


#: fraction of the convolution's mass allowed in the outer eighth of any axis
EDGE_MASS_TOL = 1e-10


#: relative size below which a convolution counts as numerically zero
ROUNDOFF_FLOOR = 1e-12


def edge_mass_fraction(f: HGroupFunction) -> float:
    """Largest fraction of ``|f|^2`` lying within ``L/8`` of the boundary, over the three axes."""
    p = np.abs(f.values) ** 2
    total = p.sum()
    if total == 0:
        return 0.0
    band = np.abs(f.grid.axis) > 7 * f.grid.L / 8
    return float(max(p[band].sum(), p[:, band].sum(), p[:, :, band].sum()) / total)


def convolve(f1: HGroupFunction, f2: HGroupFunction, check: bool = True,
             skip: float = 1e-30) -> HGroupFunction:
    """``(f1 * f2)(g) = integral f1(h) f2(h^-1 g) dh``.

    The result is rejected when its mass reaches the edge band, which is
    where truncation in ``(x, y)`` or periodic wraparound in ``t`` shows up.

    After a Fourier transform in ``t`` this is, for every ``lambda``, a
    twisted convolution in ``(x, y)`` with phase
    ``exp(i lambda (x y' - x' y) / 2)``.
    """
    _same(f1, f2)
    g = f1.grid
    A, B = t_transform(f1), t_transform(f2)
    lams = t_frequencies(g)
    ax = g.axis
    out = np.zeros_like(A)
    scale = max(np.abs(A).max(), 1e-300) * max(np.abs(B).max(), 1e-300)
    for k, lam in enumerate(lams):
        a, b = A[:, :, k], B[:, :, k]
        if np.abs(a).max() * np.abs(b).max() <= 1e-18 * scale:
            continue
        cut = skip * np.abs(a).max() ** 2
        out[:, :, k] = kernels.twisted_convolution(np.ascontiguousarray(a), np.ascontiguousarray(b),
                                                    ax, ax, float(lam), g.h * g.h, cut)
    res = HGroupFunction(g, t_inverse(out, g))
    # a result at roundoff level (Young: ||f1 * f2|| <= ||f1|| ||f2||_1) has no meaningful support
    floor = ROUNDOFF_FLOOR * f1.norm() * float(np.sum(np.abs(f2.values))) * g.cell
    if check and res.norm() > floor:
        frac = edge_mass_fraction(res)
        if frac > EDGE_MASS_TOL:
            raise SupportOverflowError(f"{frac:.2e} of the convolution's mass reaches the grid edge")
    return res


# -- left-invariant vector fields ---------------------------------------------


def _spectral_derivative(v: np.ndarray, axis: int, grid: Grid) -> np.ndarray:
    k = 2j * pi * np.fft.fftfreq(grid.N, d=grid.h)
    shape = [1, 1, 1]
    shape[axis] = grid.N
    if grid.N % 2 == 0:
        k[grid.N // 2] = 0.0
    return np.fft.ifft(np.fft.fft(v, axis=axis) * k.reshape(shape), axis=axis)


def _fd_derivative(v: np.ndarray, axis: int, grid: Grid) -> np.ndarray:
    return np.gradient(v, grid.h, axis=axis, edge_order=2)


FIELDS = ("X1", "X2", "T")


def left_invariant_derivative(field_name: str, f: HGroupFunction, method: str = "spectral") -> HGroupFunction:
    """Apply ``X1``, ``X2`` or ``T``.

    ``method='spectral'`` differentiates with the FFT along each axis (for
    smooth, numerically compact ``f``); ``method='fd'`` uses second-order
    finite differences and is exact on quadratic polynomials.
    """
    if field_name not in FIELDS:
        raise ValueError(f"unknown field {field_name!r}; expected one of {FIELDS}")
    deriv = {"spectral": _spectral_derivative, "fd": _fd_derivative}.get(method)
    if deriv is None:
        raise ValueError(f"unknown method {method!r}")
    g = f.grid
    v = f.values
    if method == "spectral":
        edge = np.abs(v[[0, -1], :, :]).max(), np.abs(v[:, [0, -1], :]).max(), np.abs(v[:, :, [0, -1]]).max()
        if max(edge) > 1e-8 * max(np.abs(v).max(), 1e-300):
            raise ResolutionError("spectral derivative needs a function that vanishes at the grid edge")
    x, y, _ = g.mesh()
    dt = deriv(v, 2, g)
    if field_name == "T":
        out = dt
    elif field_name == "X1":
        out = deriv(v, 0, g) - 0.5 * y * dt
    else:
        out = deriv(v, 1, g) + 0.5 * x * dt
    return HGroupFunction(g, out)
