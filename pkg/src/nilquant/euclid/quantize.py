"""Kohn-Nirenberg and Weyl quantization on a uniform grid, and the
semiclassical rescaling ``a_eps(x, xi) = a(x, eps xi)``.

Symbols are given analytically (a vectorized callable).  For ``dim == 1``
the callable receives plain arrays ``x`` and ``xi``; for ``dim > 1`` each
argument carries a trailing axis of length ``dim``.

Both quantizations are plain quadrature.  Symbols are multiplied by a fixed
smooth edge cutoff in ``x`` and ``xi`` so that polynomial or order-zero
symbols can be used on a finite periodic grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import GridMismatchError, ResolutionError, SupportOverflowError
from ..grid import DEFAULT_EDGE, EdgeCutoff, Grid, GridFunction, dft, idft, inner_product
from .. import kernels

#: relative magnitude below which samples are treated as numerically zero
NEGLIGIBLE = 1e-14
#: a symbol is "supported" where its modulus exceeds this
SUPPORT_THRESHOLD = 1e-10
_CHUNK = 1 << 22


@dataclass(frozen=True)
class PhaseSymbol:
    """Analytic symbol ``a(x, xi)`` on ``R^n x R^n``.

    ``xi_radius`` is the declared radius of the numerical xi-support, or
    ``None`` for symbols that are not compactly supported in xi (these rely
    on the edge cutoff).
    """

    func: Callable
    dim: int = 1
    xi_radius: float | None = None
    grid: Grid | None = None
    edge: EdgeCutoff = DEFAULT_EDGE
    name: str = ""
    eps: float = 1.0
    base: "PhaseSymbol | None" = field(default=None, repr=False, compare=False)

    def __call__(self, x, xi):
        return self.func(x, xi)

    def values(self, grid: Grid | None = None) -> np.ndarray:
        """Raw samples ``a(x_i, xi_k)`` (no cutoff), shape ``(size, size)``."""
        grid = grid or self.grid
        xs, ks = _points(grid), _points(grid.dual())
        return np.asarray(self.func(xs[:, None], ks[None, :]), dtype=complex)

    def conj(self) -> "PhaseSymbol":
        f = self.func
        return replace(self, func=lambda x, xi: np.conj(f(x, xi)), name=f"conj({self.name})")

    def __add__(self, other: "PhaseSymbol") -> "PhaseSymbol":
        f, g = self.func, other.func
        rad = None
        if self.xi_radius is not None and other.xi_radius is not None:
            rad = max(self.xi_radius, other.xi_radius)
        return PhaseSymbol(lambda x, xi: f(x, xi) + g(x, xi), self.dim, rad, self.grid, self.edge)

    def __mul__(self, c) -> "PhaseSymbol":
        f = self.func
        return replace(self, func=lambda x, xi: c * f(x, xi))

    __rmul__ = __mul__


def _points(grid: Grid) -> np.ndarray:
    pts = grid.points()
    return pts[:, 0] if grid.dim == 1 else pts


def _cutoff(edge: EdgeCutoff, pts: np.ndarray, H: float) -> np.ndarray:
    c = edge(pts, H)
    return c if c.ndim == 1 else np.prod(c, axis=-1)


def _phase(xs, ks):
    if xs.ndim == 1:
        return np.exp(2j * np.pi * np.multiply.outer(xs, ks))
    return np.exp(2j * np.pi * (xs @ ks.T))


def _check_compatible(a: PhaseSymbol, f: GridFunction) -> None:
    if a.dim != f.grid.dim:
        raise GridMismatchError(f"symbol dimension {a.dim} vs grid dimension {f.grid.dim}")
    if a.grid is not None and a.grid != f.grid:
        raise GridMismatchError("symbol and function live on different grids")


def _check_xi_support(a: PhaseSymbol, grid: Grid) -> None:
    if a.xi_radius is None:
        return
    H = grid.dual().L
    if a.xi_radius > a.edge.inner * H:
        raise SupportOverflowError(
            f"xi-support radius {a.xi_radius:.4g} exceeds the cutoff plateau {a.edge.inner * H:.4g}"
        )


def check_tail(f: GridFunction, edge: EdgeCutoff = DEFAULT_EDGE, tol: float = 1e-10) -> None:
    """Raise when ``f`` or its transform has mass where the edge cutoff is not 1."""
    from ..grid import tail_fraction

    for g, what in ((f, "position"), (dft(f), "frequency")):
        frac = tail_fraction(g, edge.inner)
        if frac > tol:
            raise ResolutionError(f"{what} tail mass {frac:.2e} outside the cutoff plateau")


def _significant(values: np.ndarray) -> np.ndarray:
    mag = np.abs(values.ravel())
    top = mag.max() if mag.size else 0.0
    if top == 0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(mag > NEGLIGIBLE * top)


def _kn_rows(a: PhaseSymbol, grid: Grid, F: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    xs = _points(grid)[rows]
    dual = grid.dual()
    ks = _points(dual)[cols]
    Fc = F.ravel()[cols] * _cutoff(a.edge, ks, dual.L)
    bx = _cutoff(a.edge, xs, grid.L)
    out = np.empty(rows.size, dtype=complex)
    step = max(1, _CHUNK // max(cols.size, 1))
    for s in range(0, rows.size, step):
        sl = slice(s, s + step)
        xr = xs[sl]
        sym = np.asarray(a.func(xr[:, None] if xr.ndim == 1 else xr[:, None, :],
                                ks[None, :] if ks.ndim == 1 else ks[None, :, :]), dtype=complex)
        sym = np.broadcast_to(sym, (xr.shape[0], ks.shape[0]))
        out[sl] = (_phase(xr, ks) * sym) @ Fc
    return dual.cell * bx * out


def quantize_kn(a: PhaseSymbol, f: GridFunction, rows: np.ndarray | None = None,
                check: bool = True) -> GridFunction:
    """``x -> integral exp(2 pi i x.xi) a(x, xi) f_hat(xi) dxi`` by quadrature.

    ``rows`` restricts the evaluation to a subset of flat grid indices (other
    entries are returned as zero).  ``check=False`` skips the tail-mass
    precondition (used inside power iteration).
    """
    _check_compatible(a, f)
    _check_xi_support(a, f.grid)
    if check:
        check_tail(f, a.edge)
    F = dft(f).values
    cols = _significant(F)
    rows = np.arange(f.grid.size) if rows is None else np.asarray(rows)
    out = np.zeros(f.grid.size, dtype=complex)
    if cols.size and rows.size:
        out[rows] = _kn_rows(a, f.grid, F, rows, cols)
    return GridFunction(f.grid, out)


def quantize_kn_adjoint(a: PhaseSymbol, g: GridFunction) -> GridFunction:
    """Adjoint of :func:`quantize_kn` with respect to the grid inner product."""
    _check_compatible(a, g)
    grid, dual = g.grid, g.grid.dual()
    xs, ks = _points(grid), _points(dual)
    bx = _cutoff(a.edge, xs, grid.L)
    bk = _cutoff(a.edge, ks, dual.L)
    gv = g.values.ravel() * bx
    rows = _significant(gv)
    # inner[k] = h^n sum_i exp(-2 pi i x_i xi_k) conj(a(x_i, xi_k)) g_i
    inner = np.zeros(ks.shape[0], dtype=complex)
    step = max(1, _CHUNK // max(ks.shape[0], 1))
    for s in range(0, rows.size, step):
        r = rows[s : s + step]
        xr = xs[r]
        sym = np.asarray(a.func(xr[:, None] if xr.ndim == 1 else xr[:, None, :],
                                ks[None, :] if ks.ndim == 1 else ks[None, :, :]), dtype=complex)
        sym = np.broadcast_to(sym, (r.size, ks.shape[0]))
        inner += (np.conj(_phase(xr, ks) * sym)).T @ gv[r]
    inner *= grid.cell * bk
    return idft(GridFunction(dual, inner))


def quantize_weyl(a: PhaseSymbol, f: GridFunction) -> GridFunction:
    """``x -> iint exp(2 pi i (x-y) xi) a((x+y)/2, xi) f(y) dy dxi`` (1-d only).

    The xi-integral is done with one inverse FFT per midpoint, so the
    symbol is sampled on the half-grid of midpoints times the frequency grid.
    """
    _check_compatible(a, f)
    if f.grid.dim != 1:
        raise GridMismatchError("Weyl quantization is implemented in one dimension")
    _check_xi_support(a, f.grid)
    check_tail(f, a.edge)
    grid, dual = f.grid, f.grid.dual()
    N, h = grid.N, grid.h
    mids = -grid.L + 0.5 * h * np.arange(2 * N - 1)
    ks = dual.axis
    sym = np.asarray(a.func(mids[:, None], ks[None, :]), dtype=complex)
    sym = np.broadcast_to(sym, (2 * N - 1, N)) * _cutoff(a.edge, ks, dual.L)[None, :]
    sym = sym * _cutoff(a.edge, mids, grid.L)[:, None]
    # A[s, d] = dxi * sum_k exp(2 pi i d h xi_k) sym[s, k]
    sign = (-1.0) ** np.arange(N)
    A = np.fft.ifft(sym, axis=1) * (N * dual.h) * sign[None, :]
    return GridFunction(grid, kernels.weyl_apply(np.ascontiguousarray(A), f.values.ravel(), h))


def scale_symbol(a: PhaseSymbol, eps: float, grid: Grid | None = None) -> PhaseSymbol:
    """Return ``(x, xi) -> a(x, eps xi)``.

    Refuses (rather than aliasing) when the rescaled xi-support no longer fits
    inside the cutoff plateau of ``grid`` (or ``a.grid``).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps == 1.0:
        return a
    f = a.func
    rad = None if a.xi_radius is None else a.xi_radius / eps
    scaled = replace(
        a,
        func=lambda x, xi: f(x, eps * xi),
        xi_radius=rad,
        eps=a.eps * eps,
        base=a.base or a,
        name=f"{a.name}[eps={eps:g}]",
    )
    grid = grid or a.grid
    if grid is not None:
        _check_xi_support(scaled, grid)
        if a.xi_radius is None:
            _check_sampled_overflow(a, scaled, grid)
    return scaled


def _check_sampled_overflow(a: PhaseSymbol, scaled: PhaseSymbol, grid: Grid) -> None:
    dual = grid.dual()
    ks = _points(dual)
    band = np.abs(ks) >= a.edge.inner * dual.L
    if band.ndim > 1:
        band = band.any(axis=-1)
    xs = _points(grid)
    xs = xs[:: max(1, xs.shape[0] // 128)]
    kb = ks[band]

    def edge_max(sym):
        v = sym.func(xs[:, None] if xs.ndim == 1 else xs[:, None, :],
                     kb[None, :] if kb.ndim == 1 else kb[None, :, :])
        return float(np.max(np.abs(v)))

    if edge_max(a) <= SUPPORT_THRESHOLD < edge_max(scaled):
        raise SupportOverflowError("rescaled symbol reaches the frequency-grid edge")


def support_radius(a: PhaseSymbol, grid: Grid, threshold: float = SUPPORT_THRESHOLD) -> float:
    """Largest ``|xi|`` on the frequency grid where ``max_x |a| > threshold``."""
    vals = np.abs(a.values(grid)).max(axis=0)
    ks = _points(grid.dual())
    r = np.abs(ks) if ks.ndim == 1 else np.linalg.norm(ks, axis=-1)
    hit = vals > threshold
    return float(r[hit].max()) if hit.any() else 0.0


def matrix_element(a: PhaseSymbol, eps: float, f: GridFunction, g: GridFunction,
                   quantization: str = "kn") -> complex:
    """``(Op_eps(a) f, g)`` with ``Op_eps(a) = Op(a(x, eps xi))``."""
    if f.grid != g.grid:
        raise GridMismatchError("f and g must share a grid")
    a_eps = scale_symbol(a, eps, f.grid)
    if quantization == "kn":
        rows = _significant(g.values)
        op_f = quantize_kn(a_eps, f, rows=rows)
    elif quantization == "weyl":
        op_f = quantize_weyl(a_eps, f)
    else:
        raise ValueError(f"unknown quantization {quantization!r}")
    return inner_product(op_f, g)


def observed_operator_norm(a: PhaseSymbol, eps: float, probes, power_steps: int = 0) -> float:
    """Largest ``||Op_eps(a) f|| / ||f||`` over the probes.

    With ``power_steps > 0`` each probe is first pushed through that many
    steps of power iteration on ``Op^* Op``.
    """
    best = 0.0
    for f in probes:
        a_eps = scale_symbol(a, eps, f.grid)
        for _ in range(power_steps):
            g = quantize_kn_adjoint(a_eps, quantize_kn(a_eps, f, check=False))
            f = g * (1.0 / g.norm())
        best = max(best, quantize_kn(a_eps, f, check=power_steps == 0).norm() / f.norm())
    return best
