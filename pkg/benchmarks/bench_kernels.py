"""Compare the compiled raster kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends; the table lists the
best-of-N wall time and the speedup.  The last row renders a full C-Tac frame
in a fresh interpreter per backend, selected through VBTSIM_PURE_PYTHON.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vbtsim import _backend

RENDER_SNIPPET = """
import timeit
from vbtsim import preset
from vbtsim.markers import build_layout
from vbtsim.optics import render_mdm
cfg = preset("c-tac"); lay = build_layout(cfg)
render_mdm(lay, cfg)
print(min(timeit.repeat(lambda: render_mdm(lay, cfg), number=1, repeat={repeat})))
"""


def kernel_cases():
    rng = np.random.default_rng(0)
    img = rng.random((480, 480, 3))
    shifts = rng.uniform(-3, 3, 480)
    labels = rng.integers(0, 50, (480, 480))
    weights = rng.random((480, 480))
    return {
        "disk_coverage (r=6 px, ss=8)": lambda k: k.disk_coverage(100.3, 80.7, 6.0, 92, 72, 17, 17, 8),
        "capsule_coverage (30 px, ss=8)": lambda k: k.capsule_coverage(10.2, 10.9, 40.1, 25.3, 2.0, 6, 6, 40, 25, 8),
        "shift_rows_linear (480x480x3)": lambda k: k.shift_rows_linear(img, shifts),
        "label_moments (480x480, 50 labels)": lambda k: k.label_moments(labels, weights, 50),
    }


def time_render(pure: bool, repeat: int) -> float:
    env = dict(os.environ, VBTSIM_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", RENDER_SNIPPET.format(repeat=repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _backend.compiled is None:
        sys.exit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    backends = {"python": _backend.fallback, "cython": _backend.compiled}
    print(f"{'kernel':40s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in kernel_cases().items():
        t = {}
        for b, mod in backends.items():
            number = 20 if b == "cython" else 5
            t[b] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number
        print(f"{name:40s} {1e3 * t['python']:10.3f} {1e3 * t['cython']:10.3f} {t['python'] / t['cython']:8.1f}x")
    tp, tc = time_render(True, args.repeat), time_render(False, args.repeat)
    print(f"{'render_mdm, C-Tac 49 disks':40s} {1e3 * tp:10.1f} {1e3 * tc:10.1f} {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
