import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfmda import _kernels as K

pytestmark = pytest.mark.skipif(not K._HAVE_NUMBA, reason="numba not installed")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4), st.integers(3, 9), st.integers(3, 9),
       st.sampled_from([1, 2]), st.integers(0, 2**32 - 1))
def test_conv_paths_agree(n, c_in, c_out, hp, wp, stride, seed):
    r = np.random.default_rng(seed)
    xp = r.standard_normal((n, c_in, hp, wp))
    w = r.standard_normal((c_out, c_in, 3, 3))
    b = r.standard_normal(c_out)
    ho, wo = (hp - 3) // stride + 1, (wp - 3) // stride + 1
    a = K._conv_fwd_nb(xp, w, b, stride, ho, wo)
    assert np.allclose(a, K._conv_fwd_np(xp, w, b, stride, ho, wo), rtol=0, atol=1e-12)
    g = r.standard_normal(a.shape)
    for u, v in zip(K._conv_bwd_nb(xp, w, g, stride), K._conv_bwd_np(xp, w, g, stride)):
        assert np.allclose(u, v, rtol=0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(3, 10), st.integers(3, 10), st.sampled_from([1, 2]),
       st.sampled_from([3, 5]), st.integers(0, 2**32 - 1))
def test_plane_paths_agree(p, hp, wp, stride, m, seed):
    if m > min(hp, wp):
        return
    r = np.random.default_rng(seed)
    xp = r.standard_normal((p, hp, wp))
    k = r.standard_normal((m, m))
    ho, wo = (hp - m) // stride + 1, (wp - m) // stride + 1
    assert np.allclose(K._plane_corr_nb(xp, k, stride, ho, wo), K._plane_corr_np(xp, k, stride, ho, wo),
                       rtol=0, atol=1e-12)
    g = r.standard_normal((p, ho, wo))
    assert np.allclose(K._plane_corr_T_nb(g, k, stride, hp, wp), K._plane_corr_T_np(g, k, stride, hp, wp),
                       rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 8, 64])
def test_fft_paths_agree(rng, n):
    x = rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))
    for inverse in (False, True):
        a = K._fft_rows_nb(x, inverse)
        assert np.allclose(a, K._fft_rows_np(x, inverse), rtol=0, atol=1e-12)
    assert np.allclose(K._fft_rows_np(x, False), np.fft.fft(x, axis=1), rtol=0, atol=1e-10)


def test_env_flag_selects_numpy(tmp_path):
    import os
    import subprocess
    import sys

    env = dict(os.environ, LFM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from lfmda import _kernels; print(_kernels.USE_NUMBA)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
