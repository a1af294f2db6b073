"""Time the compiled and numpy kernels on one image.

    python benchmarks/bench_kernels.py --size 512 --repeat 5
"""

import argparse
import timeit

import numpy as np

from ademseg import _backend
from ademseg.fuzzy import default_system


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--radius", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, (args.size, args.size), dtype=np.uint8)
    fs = default_system()
    sets, doms = fs.set_matrix(), fs.domains()
    _, sigma, ncn = _backend.window_stats(px, args.radius, False, 20.0)

    print(f"{args.size}x{args.size}, radius {args.radius}, best of {args.repeat}")
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in _backend.BACKENDS))
    results = {}
    for name, call in (
        ("window_stats", lambda b: _backend.window_stats(px, args.radius, False, 20.0, backend=b)),
        ("fuzzy_weights", lambda b: _backend.fuzzy_weights(sigma, ncn, sets, doms, backend=b)),
    ):
        times = {b: best_of(lambda: call(b), args.repeat) for b in _backend.BACKENDS}
        results[name] = times
        print(f"{name:<14}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in _backend.BACKENDS))
    if "compiled" in _backend.BACKENDS:
        for name, times in results.items():
            print(f"{name}: compiled is {times['python'] / times['compiled']:.1f}x faster")
    return results


if __name__ == "__main__":
    main()
