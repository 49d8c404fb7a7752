"""Across-seed dispersion of the Lyapunov spectrum for a config's system.

Usage: python scripts/ensemble_dispersion.py configs/triangular.yaml --members 50
"""

import argparse

from youngflow.config import ExperimentConfig
from youngflow.stochastic import ensemble_spectrum


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--members", type=int, default=50)
    ap.add_argument("--horizons", type=float, nargs="+", default=[25.0, 50.0, 100.0, 200.0])
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config)
    print("horizon,k,mean,std,exceed_fraction")
    for T in args.horizons:
        spec = cfg.fbm_spec(T)
        eq = cfg.build_system(spec.times)
        res = ensemble_spectrum(eq, spec, args.members, T, cfg.numerics.h, threads=args.threads)
        for k in range(eq.d):
            print(f"{T:g},{k + 1},{res.mean[k]:.4f},{res.std[k]:.4f},{res.exceed_fraction:.3f}")


if __name__ == "__main__":
    main()
