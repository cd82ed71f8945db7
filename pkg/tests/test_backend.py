import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbtsim import _backend

fb = _backend.fallback
needs_compiled = pytest.mark.skipif(_backend.compiled is None, reason="compiled kernels not built")


def _backend_name(env_value):
    env = dict(os.environ)
    env.pop("VBTSIM_PURE_PYTHON", None)
    if env_value is not None:
        env["VBTSIM_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "from vbtsim import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_switch_selects_fallback():
    assert _backend_name("1") == "python"
    assert _backend_name("0") in ("python", "cython")


def test_disk_coverage_examples():
    cov = fb.disk_coverage(5.0, 5.0, 2.0, 0, 0, 11, 11, ss=4)
    assert cov[5, 5] == 1.0 and cov[0, 0] == 0.0
    assert abs(cov.sum() - np.pi * 4) < 0.5
    assert np.array_equal(cov, cov.T)


def test_shift_rows_integer_shift():
    img = np.arange(20, dtype=np.float64).reshape(2, 10)
    out = fb.shift_rows_linear(img, [0.0, 2.0])
    assert np.array_equal(out[0], img[0])
    assert np.array_equal(out[1, 2:], img[1, :-2])
    assert np.all(out[1, :2] == img[1, 0])  # edge clamp


def test_label_moments_example():
    lab = np.array([[1, 1, 0], [0, 2, 2]])
    w = np.array([[1.0, 3.0, 9.0], [9.0, 2.0, 2.0]])
    m = fb.label_moments(lab, w, 2)
    assert np.array_equal(m, [[4.0, 3.0, 0.0, 2.0], [4.0, 6.0, 4.0, 2.0]])


@needs_compiled
@given(st.floats(-3, 40), st.floats(-3, 40), st.floats(0.1, 12), st.integers(-5, 5), st.integers(-5, 5),
       st.integers(1, 30), st.integers(1, 30), st.sampled_from([1, 4, 8]))
def test_disk_coverage_backends_agree(cx, cy, r, i0, j0, nx, ny, ss):
    a = fb.disk_coverage(cx, cy, r, i0, j0, nx, ny, ss)
    b = _backend.compiled.disk_coverage(cx, cy, r, i0, j0, nx, ny, ss)
    assert np.array_equal(a, b)


@needs_compiled
@given(st.tuples(*[st.floats(0, 30)] * 4), st.floats(0.1, 3), st.integers(1, 30), st.integers(1, 30),
       st.sampled_from([1, 4, 8]))
def test_capsule_coverage_backends_agree(seg, hw, nx, ny, ss):
    a = fb.capsule_coverage(*seg, hw, 0, 0, nx, ny, ss)
    b = _backend.compiled.capsule_coverage(*seg, hw, 0, 0, nx, ny, ss)
    # sample points within rounding of the boundary may flip; allow one sample per pixel
    assert np.abs(a - b).max() <= 1.0 / (ss * ss)
    assert np.mean(a != b) < 0.02


@needs_compiled
@given(st.integers(0, 2**32 - 1), st.integers(1, 20), st.integers(1, 20), st.booleans())
def test_shift_rows_backends_agree(seed, h, w, color):
    rng = np.random.default_rng(seed)
    img = rng.random((h, w, 3) if color else (h, w))
    shifts = rng.uniform(-w, w, h)
    a = fb.shift_rows_linear(img, shifts)
    b = _backend.compiled.shift_rows_linear(img, shifts)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


@needs_compiled
@given(st.integers(0, 2**32 - 1), st.integers(1, 25), st.integers(1, 25), st.integers(1, 6))
def test_label_moments_backends_agree(seed, h, w, n):
    rng = np.random.default_rng(seed)
    lab = rng.integers(0, n + 2, (h, w))
    wts = rng.random((h, w))
    a = fb.label_moments(lab, wts, n)
    b = _backend.compiled.label_moments(lab, wts, n)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
