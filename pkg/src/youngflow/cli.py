"""Command-line front end: ``youngflow <command> --config FILE``.

Data goes to files in the output directory (and a short JSON summary to
stdout); progress and errors go to stderr. Identical config and seed
give byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as yio
from .config import ExperimentConfig
from .errors import ConfigError, DegeneracyError, DomainError, IterationError, YoungFlowError
from .lyapunov import discrete_spectrum, exponent_bound, nonregularity
from .paths import p_variation_seminorm
from .solver import picard_solve
from .stochastic import check_assumptions, ensemble_spectrum, gamma_p
from .triangular import TriangularYDE, triangular_fundamental, triangular_spectrum
from .young import young_integral, young_loeve_defect_bound

OUT_ENV = "YOUNGFLOW_OUT"
COMMANDS = ("integrate", "solve", "spectrum", "oracle", "regularity", "assumptions", "ensemble")

log = logging.getLogger("youngflow")


class Context:
    """Resolved config plus output handling for one command run."""

    def __init__(self, cfg: ExperimentConfig, out_dir: Path, threads: int):
        self.cfg = cfg
        self.out = out_dir
        self.threads = threads
        self.written: list[str] = []

    def _path(self, name: str) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def json(self, name: str, obj) -> None:
        if "json" in self.cfg.outputs.formats:
            yio.write_json(obj, self._path(name))
            self.written.append(name)

    def text(self, name: str, text: str) -> None:
        if "csv" in self.cfg.outputs.formats:
            self._path(name).write_text(text, encoding="utf-8")
            self.written.append(name)

    def driver(self, end: float):
        omega = self.cfg.build_driver(end)
        if self.cfg.outputs.save_driver:
            self.text("driver.csv", yio.path_to_csv(omega))
        return omega


def _window(cfg: ExperimentConfig) -> tuple[float, float]:
    n = cfg.numerics
    return n.t0, n.t0 + n.horizon


def cmd_integrate(ctx: Context) -> dict:
    cfg = ctx.cfg
    a, b = _window(cfg)
    omega = ctx.driver(b)
    x = cfg.build_integrand(omega.times)
    value = float(young_integral(x, omega, (a, b)).reshape(-1)[0])
    i = omega.index_of(a)
    j = omega.index_of(b)
    defect = abs(value - float(x.flat[i, 0] * (omega.flat[j, 0] - omega.flat[i, 0])))
    xq = p_variation_seminorm(x, cfg.numerics.q, (a, b))
    wp = p_variation_seminorm(omega, cfg.numerics.p, (a, b))
    res = {
        "value": value,
        "window": [a, b],
        "defect": defect,
        "young_loeve_bound": young_loeve_defect_bound(xq, wp, cfg.params),
        "integrand_qvar": xq,
        "driver_pvar": wp,
        "K": cfg.params.K,
        "theta": cfg.params.theta,
    }
    ctx.json("integrate.json", res)
    return res


def cmd_solve(ctx: Context) -> dict:
    cfg = ctx.cfg
    n = cfg.numerics
    a, b = _window(cfg)
    omega = ctx.driver(b)
    eq = cfg.build_system(omega.times)
    rep = picard_solve(eq, cfg.x0(), omega, (a, b), n.mu, n.tol, n.max_iter)
    ctx.text("solution.csv", yio.path_to_csv(rep.solution))
    res = {
        "solution_csv": "solution.csv" if "csv" in cfg.outputs.formats else None,
        "tau": rep.partition.taus,
        "count": rep.partition.count,
        "count_bound": rep.partition.count_bound(),
        "iterations": rep.picard_iterations,
        "sup_norm": rep.sup_norm,
        "pvar_norm": rep.pvar_norm,
        "m_star": rep.m_star,
        "mu": rep.mu,
        "bounds": {
            "growth": rep.growth_bound,
            "pvar": rep.pvar_bound,
            "log_growth": rep.log_growth_bound,
            "log_pvar": rep.log_pvar_bound,
            "hold": rep.bounds_hold(),
        },
    }
    ctx.json("solve.json", res)
    return res


def _spectrum(ctx: Context, omega, eq):
    n = ctx.cfg.numerics
    return discrete_spectrum(eq, omega, n.t0, n.horizon, n.h, n.method, n.tail_fraction, n.tol, n.max_iter)


def cmd_spectrum(ctx: Context) -> dict:
    cfg = ctx.cfg
    _, b = _window(cfg)
    omega = ctx.driver(b)
    eq = cfg.build_system(omega.times)
    series, est = _spectrum(ctx, omega, eq)
    ctx.text("exponents.csv", series.to_csv())
    units = int(np.floor(cfg.numerics.horizon))
    g = gamma_p(omega, cfg.params.p, units) if units >= 1 else 0.0
    bound = exponent_bound(eq, g, cfg.numerics.mu, cfg.numerics.gamma_delta, window=_window(cfg))
    res = est.to_dict() | {"gamma_p": g, "exponent_bound": bound, "within_bound": bool(np.all(np.abs(est.lambdas) <= bound))}
    ctx.json("spectrum.json", res)
    return res


def cmd_oracle(ctx: Context) -> dict:
    cfg = ctx.cfg
    n = cfg.numerics
    t_max = 2 * n.horizon if n.t_max is None else n.t_max
    omega = ctx.driver(n.t0 + t_max)
    eq = TriangularYDE.from_linear(cfg.build_system(omega.times))
    means, oracle = triangular_spectrum(eq, n.horizon)
    _, est = _spectrum(ctx, omega, eq)
    fund = triangular_fundamental(eq, omega, n.horizon, t_max)
    d = eq.d
    header = ["t"] + [f"z_{i + 1}{k + 1}" for i in range(d) for k in range(d)] + [f"logY_{k + 1}" for k in range(d)]
    lines = [",".join(header)]
    for t, z, ly in zip(fund.times, fund.z, fund.log_diag):
        lines.append(",".join(repr(float(v)) for v in [t, *z.reshape(-1), *ly]))
    ctx.text("fundamental.csv", "\n".join(lines) + "\n")
    diffs = np.abs(est.lambdas - oracle)
    res = {
        "oracle": oracle,
        "numeric": est.lambdas,
        "agreement": [{"k": k + 1, "oracle": oracle[k], "numeric": est.lambdas[k], "abs_diff": diffs[k]} for k in range(d)],
        "max_abs_diff": float(diffs.max()),
        "diagonal_means": means.to_dict(),
        "possibly_irregular": not means.all_exact,
        "tail_bound": fund.tail_bound,
        "base_points": fund.base_points,
    }
    ctx.json("oracle.json", res)
    return res


def cmd_regularity(ctx: Context) -> dict:
    cfg = ctx.cfg
    n = cfg.numerics
    omega = ctx.driver(n.t0 + n.horizon)
    eq = cfg.build_system(omega.times)
    rep = nonregularity(eq, omega, n.t0, n.horizon, n.h, n.method, n.tail_fraction, None, n.tol)
    res = rep.to_dict()
    ctx.json("regularity.json", res)
    return res


def cmd_assumptions(ctx: Context) -> dict:
    cfg = ctx.cfg
    horizon = int(np.floor(cfg.numerics.horizon))
    omega = ctx.driver(float(horizon))
    eq = cfg.build_system(omega.times)
    c_diag = [eq.C.map(lambda v, k=k: v[:, k, k]) for k in range(eq.d)]
    rep = check_assumptions(omega, c_diag, cfg.params.p, horizon)
    res = rep.to_dict()
    ctx.json("assumptions.json", res)
    return res


def cmd_ensemble(ctx: Context) -> dict:
    cfg = ctx.cfg
    n = cfg.numerics
    if cfg.driver.kind != "fbm":
        raise DomainError("ensembles need driver.kind = fbm")
    end = n.t0 + n.horizon
    spec = cfg.fbm_spec(end)
    eq = cfg.build_system(spec.times)
    N = cfg.ensemble.members
    res = ensemble_spectrum(eq, spec, N, n.horizon, n.h, n.method, n.tail_fraction, n.mu, ctx.threads)
    for i in range(N):
        ctx.json(
            f"members/member_{i:04d}.json",
            {
                "index": i,
                "seed": spec.member(i).seed,
                "lambdas": res.lambdas[i],
                "tail_dispersion": res.dispersion[i],
                "gamma_p": res.gammas[i],
                "exponent_bound": res.bounds[i],
            },
        )
    summary = res.to_dict() | {"members": N, "base_seed": cfg.seed}
    ctx.json("ensemble.json", summary)
    return {"mean": res.mean, "std": res.std, "exceed_fraction": res.exceed_fraction, "failures": len(res.failures)}


HANDLERS = {
    "integrate": cmd_integrate,
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "oracle": cmd_oracle,
    "regularity": cmd_regularity,
    "assumptions": cmd_assumptions,
    "ensemble": cmd_ensemble,
}

EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_ITERATION = 4
EXIT_DEGENERATE = 5
EXIT_IO = 6


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="youngflow", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML or JSON experiment config")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default: ${OUT_ENV}, then outputs.dir)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for ensembles")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__name__.replace("cmd_", "") + " experiment")
    return parser


def _error(kind: str, message: str, problems=None) -> None:
    payload = {"error": kind, "message": message}
    if problems:
        payload["problems"] = problems
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg.seed = args.seed
            problems = cfg.problems()
            if problems:
                raise ConfigError(problems)
        if args.threads < 1:
            raise ConfigError([f"--threads: must be at least 1, got {args.threads}"])
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg.outputs.dir)
        ctx = Context(cfg, out, args.threads)
        log.info("running %s into %s", args.command, out)
        summary = HANDLERS[args.command](ctx)
        ctx.json("config.json", cfg.to_dict())
    except ConfigError as exc:
        _error("config", "invalid configuration", exc.problems)
        return EXIT_CONFIG
    except IterationError as exc:
        _error("iteration", str(exc))
        return EXIT_ITERATION
    except DegeneracyError as exc:
        _error("degenerate", str(exc))
        return EXIT_DEGENERATE
    except (DomainError, YoungFlowError) as exc:
        _error("domain", str(exc))
        return EXIT_DOMAIN
    except OSError as exc:
        _error("io", str(exc))
        return EXIT_IO
    print(yio.dumps({"command": args.command, "files": sorted(ctx.written), "summary": summary}), end="")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
