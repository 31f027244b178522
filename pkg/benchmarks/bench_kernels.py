"""Compare the numba and pure-numpy kernel backends on training shapes.

Run:  python benchmarks/bench_kernels.py [--repeats N]

The shapes mirror what the desk-scale training loop actually feeds the
kernels (batch 16, the widest blocks, a strided block, a dilated block,
a concat-widened block, and the resize used by preprocessing and the
service). The winner per kernel is what the default
``LANG2COLOR_BACKEND=auto`` profile ships.
"""

import argparse
import time

import numpy as np

from lang2color.kernels import numpy_kernels

try:
    from lang2color.kernels import numba_kernels
except ImportError:
    numba_kernels = None

IM2COL_CASES = [
    ("block1 64x64 c16 s1 d1", (16, 16, 66, 66), 3, 1, 1),
    ("block2 64x64 c16 s2 d1", (16, 16, 66, 66), 3, 2, 1),
    ("block5 16x16 c64 s1 d2", (16, 64, 24, 24), 3, 1, 2),
    ("concat 16x16 c128 s1 d1", (16, 128, 18, 18), 3, 1, 1),
]

RESIZE_CASES = [
    ("ab 16->224", (2, 16, 16), 224, 224),
    ("rgb 480->64", (3, 480, 640), 64, 64),
]


def _out(size, k, stride, dilation):
    return (size - dilation * (k - 1) - 1) // stride + 1


def bench(fn, args, repeats):
    fn(*args)  # warmup / jit compile
    best = np.inf
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best * 1e3


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=10)
    args = parser.parse_args()

    backends = [("numpy", numpy_kernels)]
    if numba_kernels is not None:
        backends.append(("numba", numba_kernels))
    else:
        print("numba not importable; benchmarking the numpy backend only")

    rng = np.random.default_rng(0)
    print(f"{'case':34s}" + "".join(f"{name:>12s}" for name, _ in backends))

    for label, xshape, k, stride, dilation in IM2COL_CASES:
        x = rng.normal(size=xshape).astype(np.float32)
        oh = _out(xshape[2], k, stride, dilation)
        ow = _out(xshape[3], k, stride, dilation)
        row = f"im2col {label:27s}"
        cols = None
        for _, mod in backends:
            t = bench(mod.im2col, (x, k, stride, dilation, oh, ow), args.repeats)
            row += f"{t:10.2f}ms"
            cols = mod.im2col(x, k, stride, dilation, oh, ow)
        print(row)

        n, c = xshape[0], xshape[1]
        row = f"col2im {label:27s}"
        for _, mod in backends:
            t = bench(
                mod.col2im,
                (cols, n, c, xshape[2], xshape[3], k, stride, dilation, oh, ow),
                args.repeats,
            )
            row += f"{t:10.2f}ms"
        print(row)

    for label, shape, oh, ow in RESIZE_CASES:
        img = rng.normal(size=shape)
        row = f"resize {label:27s}"
        for _, mod in backends:
            t = bench(mod.bilinear_resize, (img, oh, ow), args.repeats)
            row += f"{t:10.2f}ms"
        print(row)

    if numba_kernels is not None:
        # sanity: backends agree bit for bit on the gather/scatter pair
        x = rng.normal(size=(2, 4, 12, 12)).astype(np.float32)
        a = numpy_kernels.im2col(x, 3, 1, 1, 10, 10)
        b = numba_kernels.im2col(x, 3, 1, 1, 10, 10)
        assert np.array_equal(a, b)
        print("\nbackends agree on im2col output (bit-exact)")


if __name__ == "__main__":
    main()
