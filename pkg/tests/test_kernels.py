"""Backend equivalence: the compiled kernels must match the numpy fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from eegimg.classify import rbf_kernel
from eegimg.kernels import BACKEND, available_backends

BACKENDS = available_backends()
needs_compiled = pytest.mark.skipif(
    "cython" not in BACKENDS, reason="compiled kernels not built"
)


def test_default_backend_is_known():
    assert BACKEND in ("cython", "numpy")


@needs_compiled
def test_lbp_codes_identical():
    rng = np.random.default_rng(0)
    for _ in range(30):
        h, w = rng.integers(3, 40, size=2)
        img = rng.integers(0, 256, size=(h, w)).astype(np.uint8)
        np.testing.assert_array_equal(
            BACKENDS["numpy"].lbp_codes(img), BACKENDS["cython"].lbp_codes(img)
        )


@needs_compiled
def test_glcm_counts_identical():
    rng = np.random.default_rng(1)
    offsets = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, 2), (-3, 1)]
    for _ in range(30):
        h, w = rng.integers(2, 30, size=2)
        levels = int(rng.integers(2, 33))
        img = rng.integers(0, levels, size=(h, w)).astype(np.uint8)
        for dr, dc in offsets:
            np.testing.assert_array_equal(
                BACKENDS["numpy"].glcm_counts(img, dr, dc, levels),
                BACKENDS["cython"].glcm_counts(img, dr, dc, levels),
            )


@needs_compiled
def test_smo_solve_bit_identical():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(4, 120))
        d = int(rng.integers(1, 12))
        x = rng.normal(size=(n, d))
        y = np.where(rng.random(n) > 0.5, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
        kernel = rbf_kernel(x, x, 1.0 / d)
        c = float(rng.choice([0.5, 1.0, 10.0]))
        a1, b1, s1 = BACKENDS["numpy"].smo_solve(kernel, y, c, 1e-3, 25)
        a2, b2, s2 = BACKENDS["cython"].smo_solve(kernel, y, c, 1e-3, 25)
        np.testing.assert_array_equal(a1, a2)
        assert b1 == b2
        assert s1 == s2


def test_force_numpy_env_var():
    env = dict(os.environ, EEGIMG_FORCE_NUMPY="1")
    out = subprocess.run(
        [sys.executable, "-c", "from eegimg.kernels import BACKEND; print(BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"
