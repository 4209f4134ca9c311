"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from usr import kernels
from usr.nn.rng import DeterministicRng


def cases(dtype):
    r = DeterministicRng(0, 0, "bench")
    x = r.uniform((4, 16, 48, 48)).astype(dtype)
    u = r.uniform((4, 16, 3, 3)).astype(dtype)
    g = r.uniform((4, 16, 48, 48)).astype(dtype)
    img = r.uniform((3, 192, 192)).astype(dtype)
    k = r.uniform((21, 21)).astype(dtype)
    cols = None

    def setup(b):
        nonlocal cols
        cols = b.im2col(x, 3, 1, 1)

    return [
        ("im2col 4x16x48x48 k3", lambda b: b.im2col(x, 3, 1, 1)),
        ("col2im 4x16x48x48 k3", lambda b: b.col2im(cols, x.shape, 3, 1, 1)),
        ("dwconv fwd 4x16x48x48", lambda b: b.dwconv_forward(x, u)),
        ("dwconv bwd 4x16x48x48", lambda b: b.dwconv_backward(x, u, g)),
        ("blur 3x192x192 k21", lambda b: b.correlate_reflect(img, k)),
        ("splitmix64 1e6", lambda b: b.splitmix64_block(12345, 1_000_000)),
    ], setup


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--dtype", default="float32", choices=["float32", "float64"])
    a = ap.parse_args()
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is available")
    rows, setup = cases(np.dtype(a.dtype))
    print(f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in rows:
        times = []
        for b in backends:
            mod = kernels.get_backend(b)
            setup(mod)
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=a.repeat)) * 1e3)
        line = f"{name:<26}" + "".join(f"{t:10.2f}ms" for t in times)
        if len(times) > 1:
            line += f"{times[0] / times[1]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
