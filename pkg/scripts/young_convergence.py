"""Dyadic refinement rate of the Young integral on Weierstrass-type Hölder paths.

For integrand regularity a_x and integrator regularity a_w (a_x + a_w > 1)
successive refinements differ by at most O(mesh^(a_x + a_w - 1)); the
fitted rate is printed next to that guaranteed rate.
"""

import argparse

import numpy as np

from youngflow.paths import SampledPath
from youngflow.young import young_integral


def weierstrass(t, alpha, levels=24, phase=0.0):
    k = np.arange(levels)[:, None]
    return np.sum(2.0 ** (-k * alpha) * np.cos(2.0**k * np.pi * t[None, :] + phase * (k + 1)), axis=0)


def fitted_rate(a_x, a_w, levels):
    vals = []
    for m in levels:
        t = np.linspace(0, 1, 2**m + 1)
        x = SampledPath(t, weierstrass(t, a_x, phase=0.3))
        w = SampledPath(t, t if a_w >= 1 else weierstrass(t, a_w, phase=1.1))
        vals.append(young_integral(x, w).item())
    mesh = 2.0 ** -np.array(levels[:-1], dtype=float)
    return np.polyfit(np.log(mesh), np.log(np.abs(np.diff(vals))), 1)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--min-level", type=int, default=6)
    ap.add_argument("--max-level", type=int, default=15)
    args = ap.parse_args()
    levels = list(range(args.min_level, args.max_level + 1))
    print("a_x,a_w,guaranteed,fitted")
    for a_x, a_w in [(0.6, 1.0), (0.6, 0.7), (0.55, 0.8), (0.8, 0.8)]:
        print(f"{a_x},{a_w},{a_x + a_w - 1:.2f},{fitted_rate(a_x, a_w, levels):.3f}")


if __name__ == "__main__":
    main()
