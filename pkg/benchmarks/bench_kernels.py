"""Time the compiled kernels against the pure-Python reference.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from fedsched import _kernels_py

try:
    from fedsched import _kernels
except ImportError:
    _kernels = None

BITS, BW = 51200.0, 15000.0


def cases(rng):
    cnr = 10 ** rng.uniform(2, 7, (10, 64))
    t_cp = rng.uniform(0.005, 0.05, 10)
    e_comm = 10 ** rng.uniform(-2, 0, 10)
    p_max = np.ones(10)
    pl = rng.normal(size=10)
    inv = list(1 / cnr[0, :16])
    order = np.argsort(-pl)
    return {
        "max_level (16 subcarriers)": lambda k: k.max_level(inv, 1.0, BITS, BW, 0.1),
        "lcra_phase1 (10x64)": lambda k: k.lcra_phase1(cnr, e_comm, p_max, BITS, BW, order),
        "ldra_dual (10x64, 100 it)": lambda k: k.ldra_dual(cnr, t_cp, e_comm, p_max, BITS, BW, pl, 100, 0.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return
    for name, fn in cases(np.random.default_rng(0)).items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        print(f"{name:28s} python {t_py * 1e3:9.3f} ms   cython {t_cy * 1e3:9.3f} ms   x{t_py / t_cy:6.1f}")


if __name__ == "__main__":
    main()
