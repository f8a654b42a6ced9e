"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np
from scipy.signal import fftconvolve


def twisted_convolution(A, B, xs, ys, lam, cell, skip=0.0):
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    nx, ny = A.shape
    cx, cy = nx // 2, ny // 2
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    P1 = np.exp(0.5j * lam * np.outer(xs, ys))
    P2 = np.conj(P1)
    A = np.where(np.abs(A) ** 2 > skip, A, 0)
    out = np.zeros((nx, ny), dtype=complex)
    ip_all = np.arange(nx)
    for i in range(nx):
        bi = i - ip_all + cx
        ok = (bi >= 0) & (bi < nx)
        ips = ip_all[ok]
        if ips.size == 0:
            continue
        C = A[ips] * P1[i][None, :]
        D = B[bi[ok]]
        full = fftconvolve(C, D, axes=1)
        E = full[:, cy : cy + ny]
        out[i] = np.sum(E * P2[ips], axis=0)
    return cell * out


def weyl_apply(A, f, h, chunk=512):
    A = np.asarray(A)
    f = np.asarray(f, dtype=complex)
    n = f.size
    j = np.arange(n)
    out = np.empty(n, dtype=complex)
    for s in range(0, n, chunk):
        i = np.arange(s, min(s + chunk, n))[:, None]
        out[i[:, 0]] = A[i + j, (i - j) % n] @ f
    return h * out
