"""Time the compiled GF(2^8) kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Also times one full BATS decode (K=256, 1024-byte packets) per backend.
"""

import argparse
import timeit

import numpy as np

from lampnet import _gf_numpy, bats

try:
    from lampnet import _gfcore
except ImportError:
    _gfcore = None


def _cases(rng):
    a = rng.integers(0, 256, (64, 64), dtype=np.uint8)
    b = rng.integers(0, 256, (64, 1024), dtype=np.uint8)
    sq = rng.integers(0, 256, (128, 128 + 512), dtype=np.uint8)
    dst = rng.integers(0, 256, 4096, dtype=np.uint8)
    src = rng.integers(0, 256, 4096, dtype=np.uint8)
    return {
        "axpy 4096": lambda m: m.axpy(dst, src, 0x53),
        "matmul 64x64 . 64x1024": lambda m: m.matmul(a, b),
        "rref 128x640": lambda m: m.rref(sq.copy(), 128),
    }


def _decode_case(rng):
    block = bats.SourceBlock.random(256, 1024, rng)
    params = bats.BatsParams.dense(256, batch_size=16, max_degree=256)
    received = []
    for bid in range(17):
        batch, pkts = bats.encode_batch(block, params, rng, batch_id=bid)
        received += [(batch, p) for p in pkts]
    return lambda: bats.decode(received, 256)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("numpy", _gf_numpy)] + ([("cython", _gfcore)] if _gfcore else [])

    print(f"{'kernel':<26}" + "".join(f"{name:>12}" for name, _ in backends) + "     speedup")
    for label, fn in _cases(rng).items():
        times = []
        for _, mod in backends:
            n, _ = timeit.Timer(lambda: fn(mod)).autorange()
            best = min(timeit.repeat(lambda: fn(mod), number=n, repeat=args.repeat)) / n
            times.append(best)
        row = f"{label:<26}" + "".join(f"{t * 1e3:>10.3f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:>9.1f}x"
        print(row)

    # end-to-end decode goes through whichever backend bats picked at import
    from lampnet import _kernels
    dec = _decode_case(rng)
    t = min(timeit.repeat(dec, number=1, repeat=args.repeat))
    print(f"\nbats decode K=256 x 1024 B ({_kernels.BACKEND}): {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
