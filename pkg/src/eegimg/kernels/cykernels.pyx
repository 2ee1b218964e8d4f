# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Mirrors eegimg.kernels.numpy_backend expression-for-expression so both
backends produce identical output (integer kernels exactly, SMO bit-for-bit
given IEEE double arithmetic).
"""

import numpy as np

from libc.math cimport fabs

NAME = "cython"


def lbp_codes(img):
    """8-neighbor LBP code per interior pixel; see numpy_backend.lbp_codes."""
    cdef const unsigned char[:, ::1] im = np.ascontiguousarray(img, dtype=np.uint8)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1]
    out = np.empty((h - 2, w - 2), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef Py_ssize_t r, c
    cdef unsigned char ctr
    cdef int code
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            ctr = im[r, c]
            # branchless: comparisons evaluate to 0/1
            code = ((im[r - 1, c - 1] >= ctr) << 7) \
                 | ((im[r - 1, c] >= ctr) << 6) \
                 | ((im[r - 1, c + 1] >= ctr) << 5) \
                 | ((im[r, c + 1] >= ctr) << 4) \
                 | ((im[r + 1, c + 1] >= ctr) << 3) \
                 | ((im[r + 1, c] >= ctr) << 2) \
                 | ((im[r + 1, c - 1] >= ctr) << 1) \
                 | (im[r, c - 1] >= ctr)
            o[r - 1, c - 1] = <unsigned char>code
    return out


def glcm_counts(binned, int drow, int dcol, int levels):
    """Directed co-occurrence counts; see numpy_backend.glcm_counts."""
    cdef const unsigned char[:, ::1] im = np.ascontiguousarray(binned, dtype=np.uint8)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1]
    out = np.zeros((levels, levels), dtype=np.int64)
    cdef long long[:, ::1] o = out
    cdef Py_ssize_t r0 = max(0, -drow), r1 = h - max(0, drow)
    cdef Py_ssize_t c0 = max(0, -dcol), c1 = w - max(0, dcol)
    cdef Py_ssize_t r, c
    for r in range(r0, r1):
        for c in range(c0, c1):
            o[im[r, c], im[r + drow, c + dcol]] += 1
    return out


def smo_solve(K, y, double C, double tol, int max_sweeps):
    """Binary SVM dual ascent; see numpy_backend.smo_solve."""
    cdef double[:, ::1] K_ = np.ascontiguousarray(K, dtype=np.float64)
    cdef double[::1] y_ = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = K_.shape[0]
    alpha_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    E_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] E = E_arr
    cdef double b = 0.0
    cdef Py_ssize_t i, j, t, sweep
    cdef int changed, sweeps = 0
    cdef double Ei, Ej, r, best, s, ai_old, aj_old, ai, aj, L, H, eta
    cdef double b1, b2, b_new, di, dj, db
    for t in range(n):
        E[t] = -y_[t]
    for sweep in range(max_sweeps):
        changed = 0
        for i in range(n):
            Ei = E[i]
            r = Ei * y_[i]
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0.0)):
                continue
            best = -1.0
            j = -1
            for t in range(n):
                if t == i:
                    continue
                s = fabs(E[t] - Ei)
                if s > best:
                    best = s
                    j = t
            if j < 0:
                continue
            Ej = E[j]
            ai_old = alpha[i]
            aj_old = alpha[j]
            if y_[i] != y_[j]:
                L = max(0.0, aj_old - ai_old)
                H = min(C, C + aj_old - ai_old)
            else:
                L = max(0.0, ai_old + aj_old - C)
                H = min(C, ai_old + aj_old)
            if L == H:
                continue
            eta = (2.0 * K_[i, j]) - K_[i, i] - K_[j, j]
            if eta >= 0.0:
                continue
            aj = aj_old - (y_[j] * (Ei - Ej)) / eta
            if aj > H:
                aj = H
            elif aj < L:
                aj = L
            if fabs(aj - aj_old) < 1e-12:
                continue
            ai = ai_old + (y_[i] * y_[j]) * (aj_old - aj)
            b1 = b - Ei - (y_[i] * (ai - ai_old)) * K_[i, i] - (y_[j] * (aj - aj_old)) * K_[i, j]
            b2 = b - Ej - (y_[i] * (ai - ai_old)) * K_[i, j] - (y_[j] * (aj - aj_old)) * K_[j, j]
            if 0.0 < ai < C:
                b_new = b1
            elif 0.0 < aj < C:
                b_new = b2
            else:
                b_new = (b1 + b2) / 2.0
            di = (ai - ai_old) * y_[i]
            dj = (aj - aj_old) * y_[j]
            db = b_new - b
            for t in range(n):
                E[t] = E[t] + (((di * K_[i, t]) + (dj * K_[j, t])) + db)
            alpha[i] = ai
            alpha[j] = aj
            b = b_new
            changed += 1
        sweeps += 1
        if changed == 0:
            break
    return alpha_arr, b, sweeps
