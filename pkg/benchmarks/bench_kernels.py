"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--N 64]
"""
import argparse
import math
import time

import numpy as np

from strichartz_lab import _kernels
from strichartz_lab.core import CoefficientVector, Dispersion, FrequencyRegion, TorusSpec
from strichartz_lab.norms import _encode


def resonance_case(N, m):
    ks = np.arange(N, 2 * N, dtype=np.int64)
    om = ks * ks
    om = om - ks * (3 * N) + (2 * N) ** 2  # integer slope removal, as the oracle does
    om -= om.min()
    code = _encode([ks[:, None]], m)[0]
    amps = np.ones(N, dtype=np.complex128)
    return [code] * m, [om] * m, [amps] * m


def area_case(r):
    torus = TorusSpec.unit(2)
    pts = [FrequencyRegion.ball(c, r).lattice_points(torus)
           for c in ((64, 0), (-64, 0), (0, 48))]
    return pts


def sum_case(n_modes, n_points, seed=0):
    rng = np.random.default_rng(seed)
    torus = TorusSpec.unit(1)
    c = CoefficientVector(torus, np.arange(n_modes), rng.standard_normal(n_modes) + 0j)
    om = Dispersion.schrodinger().omega(c.xi)
    x = rng.uniform(0, 2 * math.pi, (n_points, 1))
    t = rng.uniform(0, 1, n_points)
    return c.xi, om, c.amps, x, t


def bench(fn, args, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--N", type=int, default=64, help="shell size for the resonance count")
    ap.add_argument("--radius", type=float, default=6.0, help="ball radius for the area kernel")
    ap.add_argument("--points", type=int, default=20000, help="samples for the direct sum")
    args = ap.parse_args()

    backends = [("python", _kernels.python)]
    if _kernels.compiled is not None:
        backends.append(("cython", _kernels.compiled))
    else:
        print("compiled backend not built; timing the numpy fallback only")

    cases = [
        (f"resonance_energy m=2 N={args.N}", "resonance_energy", resonance_case(args.N, 2)),
        (f"resonance_energy m=3 N={args.N}", "resonance_energy", resonance_case(args.N, 3)),
        (f"min_doubled_area r={args.radius:g}", "min_doubled_area", area_case(args.radius)),
        (f"exp_sum_direct 256 x {args.points}", "exp_sum_direct", sum_case(256, args.points)),
    ]
    print(f"{'kernel':<34}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for label, name, case in cases:
        times, outs = [], []
        for _, mod in backends:
            t, out = bench(getattr(mod, name), case, args.repeat)
            times.append(t)
            outs.append(out)
        if len(outs) == 2:
            a, b = np.asarray(outs[0]), np.asarray(outs[1])
            scale = max(float(np.max(np.abs(a))), 1.0)
            if float(np.max(np.abs(a - b))) > 1e-9 * scale:
                raise SystemExit(f"{label}: backends disagree")
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) == 2 else ""
        print(f"{label:<34}" + "".join(f"{t * 1e3:>12.2f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
