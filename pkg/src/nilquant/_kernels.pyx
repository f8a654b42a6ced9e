# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Signatures mirror ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


def twisted_convolution(const double complex[:, :] A, const double complex[:, :] B,
                        const double[:] xs, const double[:] ys, double lam,
                        double cell, double skip=0.0):
    """out[i,j] = cell * sum A[i',j'] B[i-i'+cx, j-j'+cy] exp(i lam (x_i y_j' - x_i' y_j) / 2)."""
    cdef Py_ssize_t nx = A.shape[0], ny = A.shape[1]
    cdef Py_ssize_t cx = nx // 2, cy = ny // 2
    cdef Py_ssize_t i, j, ip, jp, bi, j0, j1
    cdef double complex a, acc
    cdef double ph
    out_arr = np.zeros((nx, ny), dtype=np.complex128)
    cdef double complex[:, :] out = out_arr
    # phase tables: P1[i, j'] = exp(i lam x_i y_j' / 2), P2[i', j] = exp(-i lam x_i' y_j / 2)
    P1_arr = np.empty((nx, ny), dtype=np.complex128)
    P2_arr = np.empty((nx, ny), dtype=np.complex128)
    cdef double complex[:, :] P1 = P1_arr
    cdef double complex[:, :] P2 = P2_arr
    for i in range(nx):
        for j in range(ny):
            ph = 0.5 * lam * xs[i] * ys[j]
            P1[i, j] = cos(ph) + 1j * sin(ph)
            P2[i, j] = cos(ph) - 1j * sin(ph)
    row_arr = np.empty(ny, dtype=np.complex128)
    cdef double complex[:] row = row_arr
    cdef double mag
    for i in range(nx):
        for ip in range(nx):
            bi = i - ip + cx
            if bi < 0 or bi >= nx:
                continue
            for j in range(ny):
                row[j] = 0
            for jp in range(ny):
                a = A[ip, jp]
                mag = a.real * a.real + a.imag * a.imag
                if mag <= skip:
                    continue
                a = a * P1[i, jp]
                # j - jp + cy in [0, ny)  <=>  j in [jp - cy, jp - cy + ny)
                j0 = jp - cy
                if j0 < 0:
                    j0 = 0
                j1 = jp - cy + ny
                if j1 > ny:
                    j1 = ny
                for j in range(j0, j1):
                    row[j] = row[j] + a * B[bi, j - jp + cy]
            for j in range(ny):
                out[i, j] = out[i, j] + row[j] * P2[ip, j]
    for i in range(nx):
        for j in range(ny):
            out[i, j] = out[i, j] * cell
    return out_arr


def weyl_apply(const double complex[:, :] A, const double complex[:] f, double h):
    """r_i = h * sum_j A[i + j, (i - j) mod N] f_j."""
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i, j, d
    cdef double complex acc
    out_arr = np.empty(n, dtype=np.complex128)
    cdef double complex[:] out = out_arr
    for i in range(n):
        acc = 0
        for j in range(n):
            d = i - j
            if d < 0:
                d = d + n
            acc = acc + A[i + j, d] * f[j]
        out[i] = h * acc
    return out_arr
