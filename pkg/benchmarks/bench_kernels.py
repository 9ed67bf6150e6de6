"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from emophone import _kernels


def cases(rng):
    zx = rng.standard_normal((14, 256)).astype(np.float32)
    w_h = (0.1 * rng.standard_normal((64, 256))).astype(np.float32)
    dhs = rng.standard_normal((14, 64)).astype(np.float32)
    frames = rng.standard_normal((98, 400))
    ranks2 = 2 * np.arange(1, 19, dtype=np.int64)
    return {
        "lstm_forward (14 steps, h=64)": lambda k: k.lstm_recurrence(zx, w_h),
        "lstm_backward (14 steps, h=64)": lambda k, fw=_kernels.lstm_recurrence(zx, w_h): (
            k.lstm_recurrence_backward(dhs, fw[1], fw[2], w_h)
        ),
        "fft_power (98 frames, n=512)": lambda k: k.fft_power_frames(frames, 512),
        "signed_rank exact (n=18)": lambda k: k.signed_rank_tail_count(ranks2, 60),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = _kernels.implementations()
    rng = np.random.default_rng(0)
    names = sorted(impls)
    print(f"{'kernel':34s}" + "".join(f"{n:>14s}" for n in names) + f"{'speedup':>10s}")
    for label, fn in cases(rng).items():
        times = {}
        for n in names:
            k = impls[n]
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(k), number=1), 1e-7)))
            best = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            times[n] = best
        row = f"{label:34s}" + "".join(f"{1e3 * times[n]:12.3f}ms" for n in names)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
