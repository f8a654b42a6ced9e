"""Quantization on ``H_1``.

A symbol ``sigma(x, pi)`` is stored on its kernel side as a finite
separable field

    kappa_x(y) = sum_r psi_r(x) kappa_r(y),

(``psi_r`` smooth amplitudes on the group, ``kappa_r`` sampled kernels) and
on its Fourier side as ``sigma(x, pi_lam) = sum_r psi_r(x) pi_lam(kappa_r)``
at the nodes of a calibrated dual measure.  Then

    Op(sigma) f(x) = integral Tr(pi(x) sigma(x, pi) f_hat(pi)) dmu(pi)
                   = sum_r psi_r(x) (f * kappa_r)(x),

which gives two independent evaluation paths.  ``kappa_r = None`` stands for
the exact identity kernel.

Semiclassical scaling ``sigma(x, eps . pi)`` has kernel
``eps^-Q kappa_x(dilate(1/eps, y))``.  Rather than sampling that ever
narrower kernel, the kernel path works in the dilated frame: with
``V f = f o dilate(eps)`` one has ``Op^eps(sigma) = V^-1 Op(sigma_eps) V``
where ``sigma_eps`` carries the amplitudes ``psi_r o dilate(eps)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import Callable, Sequence

import numpy as np

from .errors import CalibrationError, DegenerateInputError, GridMismatchError, WeakLimitError
from .euclid.limits import LimitEstimate, richardson
from .grid import Grid, smooth_step
from .heisenberg.fourier import (
    DEFAULT_TAIL_TOL,
    DualGridMeasure,
    dual_measure,
    group_fourier,
    group_fourier_nodes,
    inverse_group_fourier,
    u_basis,
)
from .heisenberg.group import (
    HOMOGENEOUS_DIMENSION,
    HeisenbergElement,
    HGroupFunction,
    convolve,
    multiply_arrays,
)
from .heisenberg.rep import RepOperator, default_truncation
from .ovmeasure import OperatorValuedMeasure, PointSpace

Q = HOMOGENEOUS_DIMENSION
#: default number of x-nodes per axis used for sup over x
X_NODES = 8
#: slack allowed in the A0 norm bound
NORM_SLACK = 0.05


def unit_amplitude(x, y, t):
    return np.ones(np.broadcast(x, y, t).shape)


def dilated_amplitude(psi: Callable, eps: float) -> Callable:
    """``psi o dilate(eps)``."""
    if psi is unit_amplitude:
        return psi
    return lambda x, y, t: psi(eps * x, eps * y, eps * eps * t)


@dataclass(frozen=True, eq=False)
class KernelComponent:
    amplitude: Callable
    kernel: HGroupFunction | None


@dataclass(frozen=True, eq=False)
class KernelField:
    """``x -> kappa_x`` as ``sum_r psi_r(x) kappa_r`` with kernels on one grid.

    ``x_grid`` is the coarse grid of x-nodes on which ``sup_x`` is taken.
    """

    components: tuple
    grid: Grid
    x_grid: Grid | None = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DegenerateInputError("a kernel field needs at least one component")
        for c in comps:
            if c.kernel is not None and c.kernel.grid != self.grid:
                raise GridMismatchError("all kernels of a field must share one grid")
        object.__setattr__(self, "components", comps)
        if self.x_grid is None:
            object.__setattr__(self, "x_grid", Grid(3, self.grid.L, X_NODES))

    @classmethod
    def constant(cls, kernel: HGroupFunction) -> "KernelField":
        return cls((KernelComponent(unit_amplitude, kernel),), kernel.grid)

    @classmethod
    def identity(cls, grid: Grid, amplitude: Callable = unit_amplitude) -> "KernelField":
        return cls((KernelComponent(amplitude, None),), grid)

    @classmethod
    def separable(cls, pairs, x_grid: Grid | None = None) -> "KernelField":
        pairs = list(pairs)
        grid = next((k.grid for _, k in pairs if k is not None), None)
        if grid is None:
            raise DegenerateInputError("give at least one sampled kernel")
        return cls(tuple(KernelComponent(a, k) for a, k in pairs), grid, x_grid)

    @property
    def x_independent(self) -> bool:
        return all(c.amplitude is unit_amplitude for c in self.components)

    def at(self, x: HeisenbergElement) -> HGroupFunction:
        """The kernel ``kappa_x`` (identity components are not representable and rejected)."""
        vals = np.zeros(self.grid.shape, dtype=complex)
        for c in self.components:
            if c.kernel is None:
                raise DegenerateInputError("the identity kernel has no samples")
            vals += complex(np.ravel(c.amplitude(x.x, x.y, x.t))[0]) * c.kernel.values
        return HGroupFunction(self.grid, vals)

    def map_kernels(self, func) -> "KernelField":
        comps = tuple(KernelComponent(c.amplitude, None if c.kernel is None else func(c.kernel))
                      for c in self.components)
        return KernelField(comps, self.grid, self.x_grid)

    def with_amplitudes(self, func) -> "KernelField":
        comps = tuple(KernelComponent(func(c.amplitude), c.kernel) for c in self.components)
        return KernelField(comps, self.grid, self.x_grid)


def _identity_op(lam: float) -> RepOperator:
    M = default_truncation(lam)
    return RepOperator(lam, M, np.eye(M, dtype=complex), {"identity": True})


def _is_identity(op: RepOperator) -> bool:
    return bool(op.details.get("identity", False))


def _pad(mat: np.ndarray, M: int) -> np.ndarray:
    if mat.shape[0] == M:
        return mat
    out = np.zeros((M, M), dtype=complex)
    k = min(M, mat.shape[0])
    out[:k, :k] = mat[:k, :k]
    return out


def _compose(a: RepOperator, b: RepOperator, h_y: float) -> RepOperator:
    """``a @ b`` in the common (larger) truncation; identity operators act exactly."""
    if _is_identity(a):
        return b
    if _is_identity(b):
        return a
    M = max(a.M, b.M)
    basis = b.details["basis"] if b.M == M else a.details["basis"] if a.M == M else u_basis(M, b.lam, h_y)
    return RepOperator(b.lam, M, _pad(a.matrix, M) @ _pad(b.matrix, M), {"basis": basis})


@dataclass(frozen=True, eq=False)
class GroupSymbolA0:
    """Kernel field plus its Fourier side ``{lam: pi_lam(kappa_r)}`` per component.

    ``scale`` is the semiclassical parameter already applied: the operator
    stored at node ``lam`` is ``pi_{scale^2 lam}(kappa_r)`` written in the
    Hermite basis at ``lam``.
    """

    field: KernelField
    fourier: tuple = field(repr=False)
    dual: DualGridMeasure = field(repr=False)
    scale: float = 1.0
    tail_tol: float = DEFAULT_TAIL_TOL

    def at(self, x: HeisenbergElement, lam: float) -> np.ndarray:
        """Matrix of ``sigma(x, pi_lam)`` at a dual node."""
        ops = [ops_r[float(lam)] for ops_r in self.fourier]
        M = max(op.M for op in ops)
        out = np.zeros((M, M), dtype=complex)
        for c, op in zip(self.field.components, ops):
            amp = complex(np.ravel(c.amplitude(x.x, x.y, x.t))[0])
            out += amp * _pad(op.matrix, M)
        return out


def _fourier_component(kernel, dual: DualGridMeasure, scale: float, tail_tol, h: float) -> dict:
    out = {}
    # positive nodes first so real kernels reuse them for -lam
    for lam in sorted(dual.nodes, key=lambda l: (l < 0, abs(l))):
        lam = float(lam)
        if kernel is None:
            out[lam] = _identity_op(lam)
            continue
        if lam < 0 and not np.any(kernel.values.imag) and -lam in out:
            op = out[-lam]
            out[lam] = RepOperator(lam, op.M, op.matrix.conj(), {**op.details, "basis": u_basis(op.M, lam, h)})
            continue
        op = group_fourier(kernel, scale * scale * lam, tail_tol=tail_tol)
        basis = op.details["basis"] if scale == 1.0 else u_basis(op.M, lam, h)
        out[lam] = RepOperator(lam, op.M, op.matrix, {**op.details, "basis": basis})
    return out


def _check_dual(dual: DualGridMeasure, scale: float) -> None:
    if not dual.calibrated:
        raise CalibrationError("the dual measure must be calibrated")
    lo, hi = scale * scale * np.abs(dual.nodes).min(), scale * scale * np.abs(dual.nodes).max()
    if lo < dual.lam_min * (1 - 1e-12):
        raise CalibrationError(
            f"dilated nodes reach |lam| = {lo:.3g} below lam_min = {dual.lam_min:g}; enlarge the grid's t-range "
            "or lower lam_min")
    if hi > dual.lam_max * (1 + 1e-12):
        raise CalibrationError(f"dilated nodes reach |lam| = {hi:.3g} above lam_max = {dual.lam_max:g}")


def symbol_from_kernel(kfield: KernelField, dual: DualGridMeasure,
                       tail_tol: float = DEFAULT_TAIL_TOL) -> GroupSymbolA0:
    """``sigma(x, pi) = pi(kappa_x)`` at every dual node."""
    _check_dual(dual, 1.0)
    h = kfield.grid.h
    fourier = tuple(_fourier_component(c.kernel, dual, 1.0, tail_tol, h) for c in kfield.components)
    return GroupSymbolA0(kfield, fourier, dual, 1.0, tail_tol)


def identity_symbol(grid: Grid, dual: DualGridMeasure, amplitude: Callable = unit_amplitude) -> GroupSymbolA0:
    """``sigma(x, pi) = psi(x) I``."""
    return symbol_from_kernel(KernelField.identity(grid, amplitude), dual)


def kernel_from_symbol(sigma: GroupSymbolA0, grid: Grid | None = None) -> KernelField:
    """Inverse transform of every component: ``kappa_r = c sum w Tr(pi(.) sigma_r)``.

    Identity components come back as the window- and truncation-limited
    delta kernel.
    """
    grid = sigma.field.grid if grid is None else grid
    comps = []
    for c, ops in zip(sigma.field.components, sigma.fourier):
        full = {}
        for lam, op in ops.items():
            if _is_identity(op):
                op = RepOperator(lam, op.M, op.matrix, {"basis": u_basis(op.M, lam, grid.h)})
            full[lam] = op
        comps.append(KernelComponent(c.amplitude, inverse_group_fourier(full, sigma.dual, grid)))
    return KernelField(tuple(comps), grid, sigma.field.x_grid)


def dilate_symbol(sigma: GroupSymbolA0, eps: float) -> GroupSymbolA0:
    """``sigma(x, eps . pi_lam) = sigma(x, pi_{eps^2 lam})``, recomputed from the kernel side."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if eps == 1.0:
        return sigma
    scale = sigma.scale * eps
    _check_dual(sigma.dual, scale)
    h = sigma.field.grid.h
    fourier = tuple(_fourier_component(c.kernel, sigma.dual, scale, sigma.tail_tol, h)
                    for c in sigma.field.components)
    return GroupSymbolA0(sigma.field, fourier, sigma.dual, scale, sigma.tail_tol)


# -- applying the operator ------------------------------------------------------


@dataclass
class OpResult:
    value: HGroupFunction
    truncation: dict


def op_apply(sigma: GroupSymbolA0, f: HGroupFunction, max_error: float | None = None,
             modes: dict | None = None) -> OpResult:
    """``Op(sigma) f(x) = c sum_k w_k Tr(pi_k(x) sigma(x, pi_k) f_hat(pi_k))`` on ``f``'s grid.

    The truncation report carries

    * ``plancherel_deficit``: relative L2 norm of the part of ``f`` the
      dual window and Hermite truncation do not see,
      ``sqrt(1 - c sum w ||f_hat||^2 / ||f||^2)``;
    * ``hermite_tail``: relative size of what the Hermite truncation of
      ``f_hat`` drops, ``sqrt(c sum w tail^2) / ||f||``;
    * ``window_doubling``: relative change of the result when the window
      grows to ``[lam_min / 2, 2 lam_max]`` (only nodes the grid carries);
    * ``estimate``: the largest of the three.

    ``modes`` (``{lam: M}``, as returned in the report) fixes the Hermite
    truncation of ``f_hat``; the adaptive default depends on ``f``, so only a
    fixed truncation makes the result exactly linear in ``f``.

    ``max_error`` turns an estimate above it into a :class:`CalibrationError`;
    the (costly) window doubling is skipped when the other terms already
    exceed it.
    """
    dual = sigma.dual
    if f.grid != sigma.field.grid:
        raise GridMismatchError("function and symbol kernels live on different grids")
    if modes is None:
        fhat = group_fourier_nodes(f, dual, tail_tol=sigma.tail_tol)
    else:
        fhat = group_fourier_nodes(f, dual, M_rule=lambda lam: modes[float(lam)])
    value = _fourier_path(sigma, fhat, dual, f.grid)

    pairs = list(zip(dual.nodes, dual.weights))
    captured = dual.c * sum(w * fhat[float(l)].hs_norm() ** 2 for l, w in pairs)
    dropped = dual.c * sum(w * fhat[float(l)].details["tail"] ** 2 for l, w in pairs)
    norm2 = f.norm() ** 2
    deficit = float(np.sqrt(max(0.0, 1.0 - captured / norm2))) if norm2 > 0 else 0.0
    hermite = float(np.sqrt(dropped / norm2)) if norm2 > 0 else 0.0
    report = {"plancherel_deficit": deficit, "hermite_tail": hermite,
              "max_truncation": max(op.M for op in fhat.values()),
              "modes": {lam: op.M for lam, op in fhat.items()}}
    if max_error is not None and max(deficit, hermite) > max_error:
        raise CalibrationError(f"dual truncation estimate {max(deficit, hermite):.2e} exceeds {max_error:.2e}")
    doubling, extra_nodes = _window_doubling(sigma, f, value)
    report.update(window_doubling=doubling, extra_nodes=extra_nodes, estimate=max(deficit, hermite, doubling))
    if max_error is not None and report["estimate"] > max_error:
        raise CalibrationError(f"dual truncation estimate {report['estimate']:.2e} exceeds {max_error:.2e}")
    return OpResult(value, report)


def _fourier_path(sigma: GroupSymbolA0, fhat: dict, dual: DualGridMeasure, grid: Grid) -> HGroupFunction:
    X, Y, T = grid.mesh()
    vals = np.zeros(grid.shape, dtype=complex)
    for c, ops in zip(sigma.field.components, sigma.fourier):
        prod = {lam: _compose(ops[lam], fhat[lam], grid.h) for lam in fhat}
        part = inverse_group_fourier(prod, dual, grid).values
        vals += part if c.amplitude is unit_amplitude else c.amplitude(X, Y, T) * part
    return HGroupFunction(grid, vals)


def _window_doubling(sigma: GroupSymbolA0, f: HGroupFunction, value: HGroupFunction) -> tuple[float, int]:
    dual = sigma.dual
    wide = dual_measure(f.grid, dual.lam_min / 2, min(2 * dual.lam_max, np.pi / f.grid.h * (1 - 1e-12)))
    present = set(np.round(dual.nodes, 12))
    keep = np.array([round(l, 12) not in present for l in wide.nodes])
    if not keep.any():
        return 0.0, 0
    extra = DualGridMeasure(wide.nodes[keep], wide.weights[keep], wide.spacing, wide.lam_min, wide.lam_max, dual.c)
    ext_sigma = GroupSymbolA0(sigma.field,
                              tuple(_fourier_component(c.kernel, extra, sigma.scale, sigma.tail_tol, f.grid.h)
                                    for c in sigma.field.components),
                              extra, sigma.scale, sigma.tail_tol)
    fhat = group_fourier_nodes(f, extra, tail_tol=sigma.tail_tol)
    delta = _fourier_path(ext_sigma, fhat, extra, f.grid)
    base = (value + delta).norm()
    return (float(delta.norm() / base) if base > 0 else 0.0), int(keep.sum())


def apply_via_kernels(kfield: KernelField, f: HGroupFunction, eps: float = 1.0) -> HGroupFunction:
    """``Op^eps(sigma)`` in the dilated frame: ``sum_r (psi_r o dilate(eps)) (f * kappa_r)``.

    ``f`` is the probe already transported to that frame.
    """
    if f.grid != kfield.grid:
        raise GridMismatchError("function and kernels live on different grids")
    X, Y, T = f.grid.mesh()
    vals = np.zeros(f.grid.shape, dtype=complex)
    for c in kfield.components:
        part = f.values if c.kernel is None else convolve(f, c.kernel).values
        amp = dilated_amplitude(c.amplitude, eps)
        vals += part if amp is unit_amplitude else amp(X, Y, T) * part
    return HGroupFunction(f.grid, vals)


def _kernel_adjoint(k: HGroupFunction) -> HGroupFunction:
    """``kappa*(g) = conj(kappa(g^-1))`` on the grid (``g^-1 = -g``)."""
    v = np.roll(np.flip(k.values, axis=(0, 1, 2)), 1, axis=(0, 1, 2))
    return HGroupFunction(k.grid, v.conj())


def apply_adjoint_via_kernels(kfield: KernelField, f: HGroupFunction, eps: float = 1.0) -> HGroupFunction:
    """Adjoint of :func:`apply_via_kernels`: ``sum_r (conj(psi_r o dilate(eps)) f) * kappa_r^*``."""
    X, Y, T = f.grid.mesh()
    vals = np.zeros(f.grid.shape, dtype=complex)
    for c in kfield.components:
        amp = dilated_amplitude(c.amplitude, eps)
        weighted = f if amp is unit_amplitude else HGroupFunction(f.grid, np.conj(amp(X, Y, T)) * f.values)
        vals += weighted.values if c.kernel is None else convolve(weighted, _kernel_adjoint(c.kernel)).values
    return HGroupFunction(f.grid, vals)


# -- A0 seminorm and the norm bound ---------------------------------------------


def _sup_over_x(kfield: KernelField, kernels: Sequence[np.ndarray]) -> np.ndarray:
    """``sup_x |sum_r psi_r(x) kappa_r(y)|`` pointwise in ``y`` over the x-nodes."""
    X, Y, T = kfield.x_grid.mesh()
    amps = []
    for c in kfield.components:
        a = c.amplitude(X, Y, T)
        amps.append(np.broadcast_to(a, X.shape).ravel().astype(complex))
    A = np.unique(np.round(np.array(amps).T, 14), axis=0)
    A = A[np.any(A != 0, axis=1)]
    if A.shape[0] == 0:
        return np.zeros(kfield.grid.shape)
    if len(kernels) == 1:
        return np.abs(A[:, 0]).max() * np.abs(kernels[0])
    stack = np.array([k.ravel() for k in kernels])
    best = np.zeros(stack.shape[1])
    for start in range(0, A.shape[0], 16):
        np.maximum(best, np.abs(A[start:start + 16] @ stack).max(axis=0), out=best)
    return best.reshape(kfield.grid.shape)


def a0_seminorm(sigma, weight: Callable | None = None) -> float:
    """``integral sup_x |kappa_x(y)| dy`` by quadrature on the kernel grid.

    ``sigma`` is a :class:`GroupSymbolA0` or a :class:`KernelField`.  The
    value is invariant under :func:`dilate_symbol` (the ``eps^-Q`` prefactor
    cancels the volume change), so a dilated symbol reports its undilated
    seminorm.  ``weight`` multiplies the kernels pointwise in ``y`` first.
    """
    kfield = sigma.field if isinstance(sigma, GroupSymbolA0) else sigma
    if any(c.kernel is None for c in kfield.components):
        if len(kfield.components) == 1:
            X, Y, T = kfield.x_grid.mesh()
            return float(np.abs(kfield.components[0].amplitude(X, Y, T)).max())
        raise DegenerateInputError("the A0 seminorm of a mixed identity field is not sampled")
    kernels = [c.kernel.values for c in kfield.components]
    if weight is not None:
        w = weight(*kfield.grid.mesh())
        kernels = [k * w for k in kernels]
    return float(np.sum(_sup_over_x(kfield, kernels)) * kfield.grid.cell)


@dataclass
class NormBoundReport:
    eps: float
    seminorm: float
    ratios: list
    power_ratio: float | None
    bound: float

    @property
    def worst(self) -> float:
        return max(self.ratios + ([self.power_ratio] if self.power_ratio is not None else []))

    @property
    def passed(self) -> bool:
        return self.worst <= self.bound


def op_norm_bound_check(sigma, eps: float, probes: Sequence[HGroupFunction],
                        power_steps: int = 0, slack: float = NORM_SLACK) -> NormBoundReport:
    """``||Op^eps(sigma) f|| / ||f||`` over probes (and a power-iteration probe) against the A0 seminorm.

    Probes are given in the dilated frame, where the operator is
    ``sum_r (psi_r o dilate(eps)) (. * kappa_r)``; the dilation is unitary up
    to a constant so ratios are unchanged.
    """
    kfield = sigma.field if isinstance(sigma, GroupSymbolA0) else sigma
    if not probes:
        raise DegenerateInputError("at least one probe is required")
    semi = a0_seminorm(kfield)
    ratios = []
    for f in probes:
        n = f.norm()
        if n == 0:
            raise DegenerateInputError("zero probe")
        ratios.append(apply_via_kernels(kfield, f, eps).norm() / n)
    power = None
    if power_steps > 0:
        # iterate the compression P Op P, P a smooth window away from the
        # edges: its norm is a lower bound for the norm of Op and the
        # iterates cannot spread into the periodic wraparound
        window = _interior_window(kfield.grid)
        g = probes[int(np.argmax(ratios))] * window
        for _ in range(power_steps):
            g = g * (1.0 / g.norm())
            image = apply_via_kernels(kfield, g, eps) * window
            g = apply_adjoint_via_kernels(kfield, image, eps) * window
        g = g * (1.0 / g.norm())
        power = (apply_via_kernels(kfield, g, eps) * window).norm()
    return NormBoundReport(eps, semi, [float(r) for r in ratios], None if power is None else float(power),
                           semi * (1 + slack))


def _interior_window(grid: Grid) -> np.ndarray:
    """1 on the inner part of the box, 0 near the edges (narrower in ``t``, which grows under products)."""
    X, Y, T = grid.mesh()
    L = grid.L

    def bump(v, inner, outer):
        return 1.0 - smooth_step((np.abs(v) / L - inner) / (outer - inner))

    return bump(X, 0.3, 0.45) * bump(Y, 0.3, 0.45) * bump(T, 0.2, 0.35)


# -- kernel concentration --------------------------------------------------------


def homogeneous_norm(x, y, t):
    """Koranyi gauge ``((x^2 + y^2)^2 + 16 t^2)^(1/4)``, homogeneous of degree one."""
    return ((x * x + y * y) ** 2 + 16 * t * t) ** 0.25


def homogeneous_cutoff(radius: float) -> Callable:
    """``chi = 1`` for gauge ``<= radius``, ``0`` beyond ``2 radius``, smooth in between."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    return lambda x, y, t: 1.0 - smooth_step(homogeneous_norm(x, y, t) / radius - 1.0)


@dataclass
class ConcentrationReport:
    eps: np.ndarray
    residuals: np.ndarray
    exponents: np.ndarray

    @property
    def final_exponent(self) -> float:
        return float(self.exponents[-1]) if self.exponents.size else float("nan")


def kernel_concentration_check(sigma, eps_ladder: Sequence[float], chi: Callable) -> ConcentrationReport:
    """A0 seminorm of ``kappa_x (1 - chi(dilate(eps, .)))`` along the ladder.

    Exponents are the local slopes ``log(r_k / r_{k+1}) / log(eps_k / eps_{k+1})``.
    Raises :class:`WeakLimitError` when the residuals stop decreasing
    before reaching zero.
    """
    eps = np.asarray(eps_ladder, dtype=float)
    if eps.size < 2 or np.any(np.diff(eps) >= 0):
        raise ValueError("eps ladder must be strictly decreasing with at least two rungs")
    res = []
    for e in eps:
        weight = lambda x, y, t, e=e: 1.0 - chi(e * x, e * y, e * e * t)
        res.append(a0_seminorm(sigma, weight))
    res = np.array(res)
    for a, b in zip(res, res[1:]):
        if a > 0 and not b < a:
            raise WeakLimitError(f"concentration residuals do not decrease: {res}")
        if a == 0 and b != 0:
            raise WeakLimitError(f"concentration residuals do not decrease: {res}")
    exps = []
    for k in range(eps.size - 1):
        if res[k + 1] > 0:
            exps.append(log(res[k] / res[k + 1]) / log(eps[k] / eps[k + 1]))
        else:
            exps.append(np.inf)
    return ConcentrationReport(eps, res, np.array(exps))


# -- semiclassical limits --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupFamily:
    """``f_eps(g) = eps^(-Q/2) g_eps(dilate(1/eps, anchor^-1 g))``.

    ``rescaled(eps)`` returns ``g_eps`` on the working grid; for a
    concentration family it is the same profile on every rung.
    """

    schedule: tuple
    rescaled: Callable
    anchor: HeisenbergElement = HeisenbergElement()
    kind: str = "custom"
    profile: HGroupFunction | None = None

    def member_on(self, eps: float, grid: Grid, profile_func: Callable) -> HGroupFunction:
        """Sample ``f_eps`` itself from an analytic profile (for direct checks at moderate eps)."""
        a = self.anchor
        inv = (-a.x, -a.y, -a.t)

        def func(x, y, t):
            u, v, s = multiply_arrays(*inv, x, y, t)
            return eps ** (-Q / 2) * profile_func(u / eps, v / eps, s / eps**2)

        return HGroupFunction.sample(grid, func)


def concentration_family(profile: HGroupFunction, anchor: HeisenbergElement, schedule) -> GroupFamily:
    """``f_eps(g) = eps^(-Q/2) F(dilate(1/eps, anchor^-1 g))``."""
    return GroupFamily(tuple(float(e) for e in schedule), lambda eps: profile, anchor, "concentration", profile)


@dataclass
class GroupLimitResult:
    estimate: LimitEstimate
    oracle: complex | None
    measure: OperatorValuedMeasure | None
    measure_pairing: complex | None
    details: dict = field(default_factory=dict)


def _pairings(kfield: KernelField, g: HGroupFunction, anchor: HeisenbergElement, eps: float,
              convolved: list) -> complex:
    X, Y, T = g.grid.mesh()
    total = 0j
    for c, conv in zip(kfield.components, convolved):
        if c.amplitude is unit_amplitude:
            amp = 1.0
        else:
            amp = c.amplitude(*multiply_arrays(anchor.x, anchor.y, anchor.t, eps * X, eps * Y, eps * eps * T))
        total += np.sum(amp * conv * np.conj(g.values)) * g.grid.cell
    return complex(total)


def estimate_group_sc_limit(family: GroupFamily, sigma: GroupSymbolA0, norm_ratio: float = 10.0) -> GroupLimitResult:
    """Per-rung ``(Op^eps(sigma) f_eps, f_eps)`` and their extrapolation.

    Rungs are evaluated in the dilated frame around ``family.anchor``.  For
    a concentration family the limit is
    ``sum_r psi_r(anchor) (F * kappa_r, F)`` (the ``oracle``), and the
    atomic operator-valued summary puts at ``(anchor, lam_k)`` the weight
    ``c w_k`` and the block ``F_hat(lam_k) F_hat(lam_k)^*``; pairing
    ``sigma(anchor, .)`` with it is the Fourier-side value of the same limit.
    """
    kfield = sigma.field
    eps = np.array(family.schedule, dtype=float)
    values, norms = [], []
    cache = {}
    for e in eps:
        g = family.rescaled(e)
        if g.grid != kfield.grid:
            raise GridMismatchError("family and kernels live on different grids")
        key = id(g)
        if key not in cache:
            cache[key] = [g.values if c.kernel is None else convolve(g, c.kernel).values for c in kfield.components]
        values.append(_pairings(kfield, g, family.anchor, e, cache[key]))
        norms.append(g.norm())
    norms = np.array(norms)
    if norms.min() <= 0 or norms.max() / norms.min() > norm_ratio:
        raise DegenerateInputError("family norms are not bounded along the ladder")
    est = richardson(eps, values)

    oracle = measure = paired = None
    if family.kind == "concentration" and family.profile is not None:
        F = family.profile
        a = family.anchor
        oracle = complex(sum(
            complex(np.ravel(c.amplitude(a.x, a.y, a.t))[0]) * np.sum(conv * np.conj(F.values)) * F.grid.cell
            for c, conv in zip(kfield.components, cache[id(F)])))
        measure, paired = _measure_summary(F, a, sigma)
    return GroupLimitResult(est, oracle, measure, paired, {"norms": norms})


def _measure_summary(F: HGroupFunction, anchor: HeisenbergElement, sigma: GroupSymbolA0):
    dual = sigma.dual
    fhat = group_fourier_nodes(F, dual, tail_tol=sigma.tail_tol)
    triples = []
    mats = []
    for lam, w in zip(dual.nodes, dual.weights):
        op = fhat[float(lam)]
        s = sigma.at(anchor, float(lam))
        M = max(op.M, s.shape[0])
        A = _pad(op.matrix, M)
        block = A @ A.conj().T
        triples.append(((anchor.x, anchor.y, anchor.t, float(lam)), dual.c * w, block))
        if any(_is_identity(ops[float(lam)]) for ops in sigma.fourier):
            s = _symbol_with_identity(sigma, anchor, float(lam), M)
        mats.append(_pad(s, M))
    m = OperatorValuedMeasure.from_triples(triples, PointSpace("H1 x dual"))
    from .ovmeasure import pair

    return m, pair(mats, m)


def _symbol_with_identity(sigma: GroupSymbolA0, x: HeisenbergElement, lam: float, M: int) -> np.ndarray:
    out = np.zeros((M, M), dtype=complex)
    for c, ops in zip(sigma.field.components, sigma.fourier):
        op = ops[lam]
        amp = complex(np.ravel(c.amplitude(x.x, x.y, x.t))[0])
        out += amp * (np.eye(M) if _is_identity(op) else _pad(op.matrix, M))
    return out


def gram_field(components, x_grid: Grid | None = None) -> KernelField:
    """Kernel field of ``tau(x)^* tau(x)`` for ``tau(x) = sum_a phi_a(x) pi(tau_a)``.

    Uses ``pi(tau_a)^* pi(tau_b) = pi(tau_b * tau_a^*)`` with
    ``tau^*(g) = conj(tau(g^-1))``.
    """
    comps = list(components)
    pairs = []
    for phi_a, tau_a in comps:
        for phi_b, tau_b in comps:
            amp = _product_amplitude(phi_a, phi_b)
            pairs.append((amp, convolve(tau_b, _kernel_adjoint(tau_a))))
    return KernelField.separable(pairs, x_grid)


def _product_amplitude(phi_a, phi_b):
    if phi_a is unit_amplitude and phi_b is unit_amplitude:
        return unit_amplitude
    return lambda x, y, t: np.conj(phi_a(x, y, t)) * phi_b(x, y, t)
