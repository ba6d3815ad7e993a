"""Time the numba kernels against their numpy twins, plus one training epoch under each.

    python benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call both implementations directly. The epoch timing runs a
child process per backend because ``LFM_DISABLE_NUMBA`` is read at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from lfmda import _kernels as K

EPOCH_SNIPPET = """
import time
from lfmda import arch, nn, synthdata as sd, _kernels
d = sd.generate_arrays(sd.GenConfig())
x, y = d["A", "train"]
m = nn.build_model(arch.toy_spec("baseline"), 1)
nn.train_source(m, x[:16], y[:16], nn.TrainConfig(epochs=1))  # warm-up / jit
t = time.perf_counter()
nn.train_source(m, x, y, nn.TrainConfig(epochs=3))
print(_kernels.USE_NUMBA, (time.perf_counter() - t) / 3)
"""


def bench(fn, repeat):
    fn()  # compile / warm caches
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not K._HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    xp = rng.standard_normal((16, 8, 34, 34))
    w = rng.standard_normal((16, 8, 3, 3))
    b = rng.standard_normal(16)
    g = rng.standard_normal((16, 16, 16, 16))
    planes = rng.standard_normal((256, 34, 34))
    k3 = rng.standard_normal((3, 3))
    rows = rng.standard_normal((64, 64)) + 0j
    cases = [
        ("conv forward 16x8->16 32x32 s2", lambda: K._conv_fwd_nb(xp, w, b, 2, 16, 16),
         lambda: K._conv_fwd_np(xp, w, b, 2, 16, 16)),
        ("conv backward", lambda: K._conv_bwd_nb(xp, w, g, 2), lambda: K._conv_bwd_np(xp, w, g, 2)),
        ("depthwise blur 256 planes", lambda: K._plane_corr_nb(planes, k3, 1, 32, 32),
         lambda: K._plane_corr_np(planes, k3, 1, 32, 32)),
        ("depthwise blur adjoint s2", lambda: K._plane_corr_T_nb(planes[:, :17, :17], k3, 2, 35, 35),
         lambda: K._plane_corr_T_np(planes[:, :17, :17], k3, 2, 35, 35)),
        ("radix-2 fft 64 rows x 64", lambda: K._fft_rows_nb(rows, False), lambda: K._fft_rows_np(rows, False)),
    ]
    print(f"{'kernel':<34} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, nb, npy in cases:
        a, c = bench(nb, args.repeat), bench(npy, args.repeat)
        print(f"{name:<34} {a * 1e3:10.3f} {c * 1e3:10.3f} {c / a:8.2f}")
    print()
    for flag in ("0", "1"):
        env = dict(os.environ, LFM_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET], env=env, capture_output=True, text=True,
                             check=True).stdout.split()
        label = "numba" if out[0] == "True" else "numpy"
        print(f"one training epoch (120 images), {label}: {float(out[1]):.3f} s")


if __name__ == "__main__":
    main()
