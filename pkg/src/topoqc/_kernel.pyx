# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evolution kernel: 8x8 density-matrix conjugation plus the
replacement depolarizing channel, looped over a gate list.

Same contract as _kernel_py.apply_circuit.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF DIM = 8


cdef void _conjugate(double complex[:, ::1] u,
                     double complex[:, ::1] rho,
                     double complex[:, ::1] tmp,
                     double complex[:, ::1] out) nogil:
    cdef int i, j, k
    cdef double complex acc
    for i in range(DIM):
        for j in range(DIM):
            acc = 0
            for k in range(DIM):
                acc += u[i, k] * rho[k, j]
            tmp[i, j] = acc
    for i in range(DIM):
        for j in range(DIM):
            acc = 0
            for k in range(DIM):
                acc += tmp[i, k] * u[j, k].conjugate()
            out[i, j] = acc


cdef void _depolarize(double complex[:, ::1] rho,
                      double complex[:, ::1] out,
                      int mask, double eps) nogil:
    # rho -> (1-eps) rho + eps (Tr_mask rho) (x) I/2^m on the mask qubits
    cdef int r, c, f, nq, keep, r0, c0, add, q, l
    cdef double w
    cdef double complex acc
    nq = 0
    for q in range(3):
        if (mask >> q) & 1:
            nq += 1
    keep = (~mask) & (DIM - 1)
    w = 1.0 / (1 << nq)
    for r in range(DIM):
        for c in range(DIM):
            out[r, c] = (1.0 - eps) * rho[r, c]
            if (r & mask) != (c & mask):
                continue
            r0 = r & keep
            c0 = c & keep
            acc = 0
            for f in range(1 << nq):
                add = 0
                l = 0
                for q in range(3):
                    if (mask >> q) & 1:
                        if (f >> l) & 1:
                            add |= 1 << q
                        l += 1
                acc += rho[r0 | add, c0 | add]
            out[r, c] += eps * w * acc


def apply_circuit(cnp.ndarray[cnp.complex128_t, ndim=3] mats,
                  cnp.ndarray[cnp.int64_t, ndim=1] masks,
                  cnp.ndarray[cnp.float64_t, ndim=1] eps):
    """Evolve |000><000| through the gate list with per-gate noise."""
    cdef int n = mats.shape[0]
    cdef int g
    rho_a = np.zeros((DIM, DIM), dtype=np.complex128)
    rho_b = np.zeros((DIM, DIM), dtype=np.complex128)
    tmp_a = np.zeros((DIM, DIM), dtype=np.complex128)
    cdef double complex[:, ::1] rho = rho_a
    cdef double complex[:, ::1] buf = rho_b
    cdef double complex[:, ::1] tmp = tmp_a
    cdef double complex[:, :, ::1] ms = np.ascontiguousarray(mats)
    cdef cnp.int64_t[::1] mk = masks
    cdef double[::1] ep = eps
    cdef double complex[:, ::1] swap
    rho[0, 0] = 1.0
    with nogil:
        for g in range(n):
            _conjugate(ms[g], rho, tmp, buf)
            swap = rho
            rho = buf
            buf = swap
            if ep[g] > 0.0 and mk[g] != 0:
                _depolarize(rho, buf, <int> mk[g], ep[g])
                swap = rho
                rho = buf
                buf = swap
    # rho may alias either buffer after the swaps; copy out explicitly
    out = np.zeros((DIM, DIM), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    cdef int i, j
    for i in range(DIM):
        for j in range(DIM):
            ov[i, j] = rho[i, j]
    return out
