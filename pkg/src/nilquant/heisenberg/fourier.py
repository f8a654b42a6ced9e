"""Group Fourier transform ``f_hat(pi_lam) = integral f(g) pi_lam(g)^* dg`` on a
Hermite basis, its trace inverse, and calibration of the Plancherel constant.

The kernel of ``f_hat(pi_lam)`` is

    K(u, v) = F(-lam (u + v) / 2, u - v, lam),   F(w, y, lam) = iint f exp(-i w x - i lam t) dx dt,

which is evaluated on a u-grid whose spacing divides the y-spacing of ``f``
(band-limited upsampling in ``y``) and projected onto the basis.  Only the
band ``|u - v| <= L_y`` is nonzero, so the projection costs
``O(N_u * band * M)``.

Dual nodes are the frequencies ``pi k / L_t`` of the periodic t-axis lying in
``[lam_min, lam_max]`` (both signs), so the t-transform is exactly invertible.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import ceil, pi

import numpy as np
from scipy.signal import resample

from ..errors import CalibrationError, GridMismatchError
from ..grid import Grid, HermiteBasis, hermite_basis, hermite_functions, hermite_grid
from .group import HGroupFunction, t_slice
from .rep import LAM_RANGE, RepOperator, default_truncation

#: calibration is rejected when per-function residuals spread more than this
CALIBRATION_SPREAD = 0.05
#: relative HS tail at which adaptive truncation stops growing M
DEFAULT_TAIL_TOL = 1e-4
#: hard cap for adaptive truncation
MAX_TRUNCATION = 512


@dataclass(frozen=True)
class DualGridMeasure:
    """Quadrature for ``c |lam| dlam`` on ``+-[lam_min, lam_max]``."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    spacing: float
    lam_min: float
    lam_max: float
    c: float | None = None

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")
        if self.c is not None and not self.c > 0:
            raise ValueError("Plancherel constant must be positive")

    @property
    def calibrated(self) -> bool:
        return self.c is not None

    def with_constant(self, c: float) -> "DualGridMeasure":
        if self.c is not None:
            raise CalibrationError("the Plancherel constant is already fixed")
        return replace(self, c=float(c))


def dual_measure(grid: Grid, lam_min: float = LAM_RANGE[0], lam_max: float = LAM_RANGE[1],
                 refine: int = 1) -> DualGridMeasure:
    """Nodes ``pi k / (refine L)`` with ``lam_min <= |lam| <= lam_max``.

    With ``refine=1`` these are the frequencies of the grid's t-axis and the
    trace inverse is exact in ``t``; larger ``refine`` subdivides the spacing
    for refinement studies.
    """
    if refine < 1 or int(refine) != refine:
        raise ValueError("refine must be a positive integer")
    step = pi / (grid.L * refine)
    k = np.arange(1, int(refine) * grid.N // 2)
    pos = k * step
    pos = pos[(pos >= lam_min) & (pos <= lam_max)]
    if pos.size == 0:
        raise CalibrationError("no dual nodes inside the window")
    nodes = np.concatenate([-pos[::-1], pos])
    return DualGridMeasure(nodes, np.abs(nodes) * step, step, lam_min, lam_max)


def u_basis(M: int, lam: float, h_y: float) -> HermiteBasis:
    """Hermite basis at scale ``|lam|`` on a grid whose spacing is ``h_y / k``."""
    ref = hermite_grid(M, lam)
    k = max(1, int(ceil(h_y / ref.h - 1e-12)))
    h_u = h_y / k
    half = int(ceil(ref.L / h_u))
    return hermite_basis(M, abs(lam), Grid(1, half * h_u, 2 * half))


def _kernel_band(f: HGroupFunction, lam: float, basis: HermiteBasis):
    """Banded kernel ``K(u_i, u_i - y_d)``: returns offsets ``d`` and values ``(band, N_u)``."""
    g = f.grid
    h_u = basis.grid.h
    k = int(round(g.h / h_u))
    if not np.isclose(k * h_u, g.h, rtol=1e-10):
        raise GridMismatchError("basis spacing must divide the y-spacing")
    Ft = t_slice(f, lam)
    Fy = resample(Ft, k * g.N, axis=1) if k > 1 else Ft
    offsets = np.arange(k * g.N) - k * g.N // 2
    col = np.abs(Fy).max(axis=0)
    keep = col > 1e-16 * max(col.max(), 1e-300)
    offsets, Fy = offsets[keep], Fy[:, keep]
    n_u = basis.grid.N
    i = np.arange(n_u)
    # s = u_i - y_d / 2 = (2 (i - n_u/2) - d) h_u / 2 on a half-step grid
    m_lo = -n_u - offsets.max()
    m = np.arange(m_lo, n_u - offsets.min() + 1)
    s_vals = m * h_u / 2
    E = np.exp(1j * lam * np.multiply.outer(s_vals, g.axis)) * g.h
    # samples carry no x-frequencies beyond Nyquist; the x-sum would alias them
    E[np.abs(lam * s_vals) > pi / g.h] = 0.0
    G = E @ Fy
    idx = (2 * (i[None, :] - n_u // 2) - offsets[:, None]) - m_lo
    K = np.take_along_axis(G.T, idx, axis=1)
    return offsets, K


#: rows per dense block when applying a banded kernel
_BLOCK_ROWS = 512


def _project(offsets, K, basis: HermiteBasis) -> tuple[np.ndarray, float]:
    """``H^* Kmat H^T`` for the banded kernel ``Kmat[i, i - d] = K[d, i]``, in dense row blocks."""
    H = basis.vectors
    n_u = basis.grid.N
    h = basis.grid.h
    HT = H.T
    d_lo, d_hi = int(offsets.min()), int(offsets.max())
    i_all = np.arange(n_u)
    valid = (i_all[None, :] - offsets[:, None] >= 0) & (i_all[None, :] - offsets[:, None] < n_u)
    hs2 = float(np.sum(np.abs(K[valid]) ** 2))
    Y = np.empty((n_u, basis.M), dtype=complex)
    for a in range(0, n_u, _BLOCK_ROWS):
        b = min(n_u, a + _BLOCK_ROWS)
        c_lo, c_hi = max(0, a - d_hi), min(n_u, b - d_lo)
        block = np.zeros((b - a, c_hi - c_lo), dtype=complex)
        rows = np.arange(a, b)
        cols = rows[None, :] - offsets[:, None]
        ok = (cols >= c_lo) & (cols < c_hi)
        r_idx = np.broadcast_to(rows - a, cols.shape)[ok]
        block[r_idx, cols[ok] - c_lo] = K[:, a:b][ok]
        Y[a:b] = block @ HT[c_lo:c_hi]
    mat = h * h * (H.conj() @ Y)
    return mat, hs2 * h * h


def group_fourier(f: HGroupFunction, lam: float, M: int | None = None,
                  basis: HermiteBasis | None = None, lam_range=None,
                  tail_tol: float | None = None) -> RepOperator:
    """``integral f(g) pi_lam(g)^* dg`` as an ``M x M`` matrix.

    ``details`` carries the Hilbert-Schmidt norm of the full kernel and the
    part of it not captured by the truncation (``tail``).  With ``tail_tol``
    and no explicit ``M`` the truncation starts at :func:`default_truncation`
    and doubles until ``tail <= tail_tol * max(kernel_hs, ||f||)``; the
    floor stops the search at nodes where ``f_hat`` itself is negligible.
    """
    if lam == 0:
        raise ValueError("lam must be nonzero")
    if lam_range is not None and not lam_range[0] <= abs(lam) <= lam_range[1]:
        raise CalibrationError(f"|lam| = {abs(lam):g} outside {lam_range}")
    if basis is not None:
        return _transform(f, lam, basis)
    if M is not None or tail_tol is None:
        return _transform(f, lam, u_basis(default_truncation(lam) if M is None else M, lam, f.grid.h))
    M = default_truncation(lam)
    floor = f.norm()
    while True:
        op = _transform(f, lam, u_basis(M, lam, f.grid.h))
        if op.details["tail"] <= tail_tol * max(op.details["kernel_hs"], floor) or M >= MAX_TRUNCATION:
            return op
        M = min(2 * M, MAX_TRUNCATION)


def _transform(f: HGroupFunction, lam: float, basis: HermiteBasis) -> RepOperator:
    offsets, K = _kernel_band(f, lam, basis)
    mat, kernel_hs2 = _project(offsets, K, basis)
    mat_hs2 = float(np.sum(np.abs(mat) ** 2))
    tail = np.sqrt(max(kernel_hs2 - mat_hs2, 0.0))
    return RepOperator(lam, basis.M, mat, {"basis": basis, "kernel_hs": np.sqrt(kernel_hs2), "tail": tail})


def group_fourier_nodes(f: HGroupFunction, measure: DualGridMeasure, M_rule=None,
                        tail_tol: float | None = None) -> dict:
    """``{lam: f_hat(pi_lam)}`` over the measure's nodes.

    For real ``f`` only ``lam > 0`` is computed; ``f_hat(pi_-lam)`` is its
    complex conjugate in the (real) Hermite basis.
    """
    real = not np.any(f.values.imag)
    out = {}
    for lam in measure.nodes:
        if real and lam < 0:
            continue
        M = None if M_rule is None else M_rule(lam)
        out[float(lam)] = group_fourier(f, float(lam), M, tail_tol=tail_tol)
    if real:
        for lam in measure.nodes[measure.nodes < 0]:
            op = out[float(-lam)]
            out[float(lam)] = RepOperator(float(lam), op.M, op.matrix.conj(), op.details)
    return out


def plancherel_sum(f: HGroupFunction, measure: DualGridMeasure, M_rule=None,
                   tail_tol: float | None = DEFAULT_TAIL_TOL) -> tuple[float, float]:
    """``sum_k w_k ||f_hat(lam_k)||_HS^2`` (without the constant) and the summed truncation tail."""
    ops = group_fourier_nodes(f, measure, M_rule, tail_tol)
    total = tail = 0.0
    for lam, w in zip(measure.nodes, measure.weights):
        op = ops[float(lam)]
        total += w * op.hs_norm() ** 2
        tail += w * op.details["tail"] ** 2
    return total, tail


@dataclass
class PlancherelFit:
    measure: DualGridMeasure
    residuals: np.ndarray
    heldout_residuals: np.ndarray
    tails: np.ndarray


def plancherel_fit(calibration, measure: DualGridMeasure | None = None, heldout=(),
                   M_rule=None, tail_tol: float | None = DEFAULT_TAIL_TOL) -> PlancherelFit:
    """Least-squares fit of ``c`` in ``||f||^2 = c sum w ||f_hat||_HS^2``.

    Relative residuals are reported for the calibration set and for the
    held-out functions; calibration is rejected when they spread by more
    than ``CALIBRATION_SPREAD``.
    """
    calibration = list(calibration)
    if len(calibration) < 3:
        raise CalibrationError("need at least three calibration functions")
    vecs = np.array([f.values.ravel() for f in calibration])
    if np.linalg.matrix_rank(vecs, tol=1e-8 * np.abs(vecs).max()) < len(calibration):
        raise CalibrationError("calibration functions are linearly dependent")
    if measure is None:
        measure = dual_measure(calibration[0].grid)
    sums, tails = [], []
    for f in list(calibration) + list(heldout):
        s, t = plancherel_sum(f, measure, M_rule, tail_tol)
        sums.append(s / f.norm() ** 2)
        tails.append(t / f.norm() ** 2)
    q = np.array(sums)
    n = len(calibration)
    c = float(np.sum(q[:n]) / np.sum(q[:n] ** 2))
    res = c * q - 1.0
    if np.ptp(res[:n]) > CALIBRATION_SPREAD:
        raise CalibrationError(f"calibration residuals spread by {np.ptp(res[:n]):.2%}")
    return PlancherelFit(replace(measure, c=c), res[:n], res[n:], np.array(tails))


# -- inverse ------------------------------------------------------------------


def trace_pairing(A: np.ndarray, lam: float, basis: HermiteBasis, x, y, t) -> np.ndarray:
    """``Tr(pi_lam(x, y, t) A)`` for an operator given in ``basis``.

    Uses ``Tr(pi(g) A) = exp(i lam t) integral exp(-i lam x s) A(s + y/2, s - y/2) ds``
    with the kernel of ``A`` rebuilt from the Hermite functions.
    """
    x, y, t = (np.asarray(v, dtype=float) for v in (x, y, t))
    x, y, t = np.broadcast_arrays(x, y, t)
    s = basis.grid.axis
    h = basis.grid.h
    out = np.empty(x.shape, dtype=complex)
    ys, inv = np.unique(y.ravel(), return_inverse=True)
    xf, tf = x.ravel(), t.ravel()
    flat = out.reshape(-1)
    for j, yv in enumerate(ys):
        Hp = hermite_functions(basis.M, s + yv / 2, basis.lam)
        Hm = hermite_functions(basis.M, s - yv / 2, basis.lam)
        q = np.sum(Hp * (A @ Hm), axis=0)
        sel = inv == j
        phase = np.exp(-1j * lam * np.multiply.outer(xf[sel], s))
        flat[sel] = np.exp(1j * lam * tf[sel]) * (phase @ q) * h
    return out


def operator_kernel_slice(A: np.ndarray, lam: float, basis: HermiteBasis, grid: Grid) -> np.ndarray:
    """``Tr(pi_lam(x, y, 0) A)`` on the ``(x, y)`` axes of a 3-d grid.

    Mirror image of the forward kernel evaluation: the kernel of ``A`` is
    read along the diagonals ``u - v = y`` and summed against
    ``exp(-i lam x s)`` with ``s = (u + v) / 2``.
    """
    h_u = basis.grid.h
    k = int(round(grid.h / h_u))
    if k < 1 or not np.isclose(k * h_u, grid.h, rtol=1e-10):
        raise GridMismatchError("basis spacing must divide the grid spacing")
    H = basis.vectors
    # only the diagonals u - v = y of the kernel H^T A H are needed
    B = H.T @ A
    HT = H.T
    n_u = basis.grid.N
    offsets = k * (np.arange(grid.N) - grid.N // 2)
    m_lo = -n_u - offsets.max()
    m_hi = n_u - offsets.min()
    Q = np.zeros((m_hi - m_lo + 1, grid.N), dtype=complex)
    for j, d in enumerate(offsets):
        lo, hi = max(0, d), min(n_u, n_u + d)
        if lo >= hi:
            continue
        i = np.arange(lo, hi)
        Q[2 * (i - n_u // 2) - d - m_lo, j] = np.einsum("ij,ij->i", B[lo:hi], HT[lo - d:hi - d])
    s_vals = np.arange(m_lo, m_hi + 1) * h_u / 2
    E = np.exp(-1j * lam * np.multiply.outer(grid.axis, s_vals)) * h_u
    E[:, np.abs(lam * s_vals) > pi / grid.h] = 0.0
    return E @ Q


def inverse_group_fourier(ops: dict, measure: DualGridMeasure, grid: Grid) -> HGroupFunction:
    """``f(g) = c sum_k w_k Tr(pi_k(g) f_hat(pi_k))`` sampled on ``grid``."""
    if not measure.calibrated:
        raise CalibrationError("the measure has no Plancherel constant yet")
    t = grid.axis
    vals = np.zeros(grid.shape, dtype=complex)
    for lam, w in zip(measure.nodes, measure.weights):
        op = ops[float(lam)]
        xy = operator_kernel_slice(op.matrix, float(lam), op.details["basis"], grid)
        vals += (w * xy)[:, :, None] * np.exp(1j * lam * t)[None, None, :]
    return HGroupFunction(grid, measure.c * vals)
