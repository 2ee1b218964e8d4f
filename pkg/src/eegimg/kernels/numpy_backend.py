"""Pure-numpy implementations of the hot kernels.

Fallback used when the compiled extension is unavailable (or forced via
EEGIMG_FORCE_NUMPY=1). Every function here is the contract reference for
eegimg.kernels.cykernels: both backends must produce identical results, so
the arithmetic below mirrors the compiled loops expression-for-expression.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def lbp_codes(img: np.ndarray) -> np.ndarray:
    """8-neighbor LBP code for every interior pixel.

    A bit is set when the neighbor is >= the center; bits run clockwise from
    the top-left neighbor, most significant first. Output is (H-2, W-2) u8.
    """
    img = np.ascontiguousarray(img, dtype=np.uint8)
    c = img[1:-1, 1:-1]
    code = (img[0:-2, 0:-2] >= c).astype(np.uint8) << 7
    code |= (img[0:-2, 1:-1] >= c).astype(np.uint8) << 6
    code |= (img[0:-2, 2:] >= c).astype(np.uint8) << 5
    code |= (img[1:-1, 2:] >= c).astype(np.uint8) << 4
    code |= (img[2:, 2:] >= c).astype(np.uint8) << 3
    code |= (img[2:, 1:-1] >= c).astype(np.uint8) << 2
    code |= (img[2:, 0:-2] >= c).astype(np.uint8) << 1
    code |= (img[1:-1, 0:-2] >= c).astype(np.uint8)
    return code


def glcm_counts(binned: np.ndarray, drow: int, dcol: int, levels: int) -> np.ndarray:
    """Directed co-occurrence counts for one pixel offset.

    Counts pairs (binned[r, c], binned[r+drow, c+dcol]) over all in-bounds
    positions. Symmetrization is the caller's job.
    """
    binned = np.ascontiguousarray(binned)
    h, w = binned.shape
    r0, r1 = max(0, -drow), h - max(0, drow)
    c0, c1 = max(0, -dcol), w - max(0, dcol)
    if r0 >= r1 or c0 >= c1:
        return np.zeros((levels, levels), dtype=np.int64)
    src = binned[r0:r1, c0:c1].astype(np.int64)
    dst = binned[r0 + drow:r1 + drow, c0 + dcol:c1 + dcol].astype(np.int64)
    flat = np.bincount((src * levels + dst).ravel(), minlength=levels * levels)
    return flat.reshape(levels, levels).astype(np.int64)


def smo_solve(K: np.ndarray, y: np.ndarray, C: float, tol: float,
              max_sweeps: int) -> tuple[np.ndarray, float, int]:
    """Binary SVM dual ascent over a precomputed kernel matrix.

    Simplified sequential-minimal-optimization: full index sweeps, second
    index chosen deterministically as the largest |E_i - E_j| (lowest index
    on ties), error cache updated incrementally. Stops after a sweep with no
    updates or after max_sweeps sweeps.

    Returns (alpha, bias, sweeps_run).
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = K.shape[0]
    alpha = np.zeros(n, dtype=np.float64)
    b = 0.0
    E = -y.copy()
    sweeps = 0
    for _ in range(max_sweeps):
        changed = 0
        for i in range(n):
            Ei = E[i]
            r = Ei * y[i]
            if not ((r < -tol and alpha[i] < C) or (r > tol and alpha[i] > 0.0)):
                continue
            scores = np.abs(E - Ei)
            scores[i] = -1.0
            j = int(np.argmax(scores))
            if j == i:
                continue
            Ej = E[j]
            ai_old = alpha[i]
            aj_old = alpha[j]
            if y[i] != y[j]:
                L = max(0.0, aj_old - ai_old)
                H = min(C, C + aj_old - ai_old)
            else:
                L = max(0.0, ai_old + aj_old - C)
                H = min(C, ai_old + aj_old)
            if L == H:
                continue
            eta = (2.0 * K[i, j]) - K[i, i] - K[j, j]
            if eta >= 0.0:
                continue
            aj = aj_old - (y[j] * (Ei - Ej)) / eta
            if aj > H:
                aj = H
            elif aj < L:
                aj = L
            if abs(aj - aj_old) < 1e-12:
                continue
            ai = ai_old + (y[i] * y[j]) * (aj_old - aj)
            b1 = b - Ei - (y[i] * (ai - ai_old)) * K[i, i] - (y[j] * (aj - aj_old)) * K[i, j]
            b2 = b - Ej - (y[i] * (ai - ai_old)) * K[i, j] - (y[j] * (aj - aj_old)) * K[j, j]
            if 0.0 < ai < C:
                b_new = b1
            elif 0.0 < aj < C:
                b_new = b2
            else:
                b_new = (b1 + b2) / 2.0
            di = (ai - ai_old) * y[i]
            dj = (aj - aj_old) * y[j]
            db = b_new - b
            E += (di * K[i]) + (dj * K[j]) + db
            alpha[i] = ai
            alpha[j] = aj
            b = b_new
            changed += 1
        sweeps += 1
        if changed == 0:
            break
    return alpha, b, sweeps
