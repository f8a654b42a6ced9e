"""Schrodinger representations of ``H_1`` truncated to a Hermite basis.

``pi_lam(x, y, t) phi(u) = exp(i lam (t - x u - x y / 2)) phi(u + y)`` is a
unitary representation for the symmetric group law.  Matrices are taken in
the Hermite basis at scale ``|lam|``; in that basis dilating the group
element is the same as rescaling ``lam``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CalibrationError, ResolutionError
from ..grid import HermiteBasis, hermite_basis, hermite_functions, hermite_grid
from .group import HeisenbergElement, multiply

#: default calibrated range of |lam|
LAM_RANGE = (1.0 / 8.0, 8.0)
#: size of the top-left block on which truncation residuals are measured
PROBE_BLOCK = 8


@dataclass(frozen=True, eq=False)
class RepOperator:
    """An ``M x M`` matrix attached to the representation ``pi_lam``."""

    lam: float
    M: int
    matrix: np.ndarray = field(repr=False)
    details: dict = field(default_factory=dict, repr=False)

    def __matmul__(self, other: "RepOperator") -> "RepOperator":
        if self.lam != other.lam or self.M != other.M:
            raise ValueError("operators belong to different representations or truncations")
        return RepOperator(self.lam, self.M, self.matrix @ other.matrix)

    def adjoint(self) -> "RepOperator":
        return RepOperator(self.lam, self.M, self.matrix.conj().T)

    def hs_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


def default_truncation(lam: float) -> int:
    return max(16, int(np.ceil(32 * np.sqrt(abs(lam)))))


def basis_for(lam: float, M: int | None = None) -> HermiteBasis:
    M = default_truncation(lam) if M is None else M
    return hermite_basis(M, abs(lam), hermite_grid(M, lam))


def _check(lam: float, basis: HermiteBasis, lam_range) -> None:
    if lam == 0:
        raise ValueError("lam must be nonzero")
    if lam_range is not None and not lam_range[0] <= abs(lam) <= lam_range[1]:
        raise CalibrationError(f"|lam| = {abs(lam):g} outside the calibrated range {lam_range}")
    if not np.isclose(abs(basis.lam), abs(lam), rtol=1e-12, atol=0):
        raise ResolutionError(f"basis scale {basis.lam:g} does not match |lam| = {abs(lam):g}")


def schrodinger_rep(lam: float, g: HeisenbergElement, basis: HermiteBasis,
                    lam_range=LAM_RANGE) -> RepOperator:
    """Matrix ``<h_m, pi_lam(g) h_n>`` by quadrature on the basis grid."""
    _check(lam, basis, lam_range)
    u = basis.grid.axis
    shifted = hermite_functions(basis.M, u + g.y, basis.lam)
    phase = np.exp(1j * lam * (g.t - g.x * u - 0.5 * g.x * g.y))
    mat = basis.grid.h * (basis.vectors.conj() * phase[None, :]) @ shifted.T
    return RepOperator(lam, basis.M, mat)


def unitarity_residual(op: RepOperator, block: int = PROBE_BLOCK) -> float:
    """``max |U* U - I|`` on the top-left probe block."""
    k = min(block, op.M)
    U = op.matrix
    return float(np.max(np.abs((U.conj().T @ U)[:k, :k] - np.eye(k))))


def homomorphism_residual(lam: float, g: HeisenbergElement, h: HeisenbergElement,
                          basis: HermiteBasis, block: int = PROBE_BLOCK, lam_range=LAM_RANGE) -> float:
    """``max |pi(g) pi(h) - pi(gh)|`` on the top-left probe block."""
    k = min(block, basis.M)
    prod = schrodinger_rep(lam, g, basis, lam_range).matrix @ schrodinger_rep(lam, h, basis, lam_range).matrix
    direct = schrodinger_rep(lam, multiply(g, h), basis, lam_range).matrix
    return float(np.max(np.abs(prod[:k, :k] - direct[:k, :k])))
