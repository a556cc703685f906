"""Command-line entry point.

Verbs:
    run          full experiment per the config's scheme (h1 | levelset |
                 kaczmarz | beer_lambert)
    forward      truth phantom + simulated data only
    gradcheck    adjoint gradient vs central differences, CSV table
    convergence  reconstruction error vs noise level table
    info         print the parsed configuration summary

Exit status: 0 on success, 2 for configuration errors (the diagnostic names
the offending field), 1 for numerical failures.
"""

from __future__ import annotations

import argparse
import sys

from .experiment import ConfigError, parse_config, run_convergence, run_experiment, run_gradcheck
from .transport import SourceIterationError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpat2d",
        description="2-D RTE forward model and regularized optical inversion for QPAT",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "forward", "gradcheck", "convergence", "info"):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--threads", type=int, default=None, help="solver thread cap")
    return parser


def _apply_threads(n: int | None) -> None:
    if n is None:
        return
    try:
        import numba

        numba.set_num_threads(max(1, n))
    except (ImportError, ValueError):
        pass  # sweep kernels are sequential; the cap is best-effort


def _info(config_path: str) -> None:
    cfg = parse_config(config_path)
    print(f"scheme: {cfg.scheme}")
    print(f"grid: {cfg.grid.nx} x {cfg.grid.ny} on {cfg.grid.lx} x {cfg.grid.ly}")
    print(f"ordinates: {cfg.quad.ns}")
    print(f"anisotropy g: {cfg.phase.g}")
    print(f"bounds: [{cfg.mu_lo}, {cfg.mu_hi}]")
    print(
        f"phantom: background mu_a={cfg.phantom.background_mu_a} "
        f"mu_s={cfg.phantom.background_mu_s}, "
        f"{len(cfg.phantom.inclusions)} inclusion(s), smooth={cfg.phantom.smooth}"
    )
    print(f"sources: {len(cfg.sources)}")
    print(f"noise: delta_rel={cfg.delta_rel}, seed={cfg.seed}")
    print(f"output: {cfg.out_dir}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    _apply_threads(args.threads)
    try:
        if args.verb == "info":
            _info(args.config)
        elif args.verb == "run":
            out = run_experiment(args.config, out_dir=args.out, seed=args.seed)
            print(f"artifacts written to {out}")
        elif args.verb == "forward":
            out = run_experiment(args.config, out_dir=args.out, seed=args.seed, data_only=True)
            print(f"artifacts written to {out}")
        elif args.verb == "gradcheck":
            out = run_gradcheck(args.config, out_dir=args.out, seed=args.seed)
            print(f"artifacts written to {out}")
        elif args.verb == "convergence":
            out = run_convergence(args.config, out_dir=args.out, seed=args.seed)
            print(f"artifacts written to {out}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SourceIterationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
