"""``czlab`` command line.

Exit codes: 0 success / all invariants pass, 1 invariant or growth
violation, 2 bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .czdecomp import CZDecomposition, DecompositionError, decompose, verify_decomposition
from .harness import (ExperimentConfig, GeneratorSpec, InvariantFailure, dump_json, gen_density,
                      gen_measure, make_kernel, run_weak11_experiment)
from .measure import GrowthViolation, encode_values, load_density, load_measure, verify_growth
from .operators import empirical_l2_norm, truncated_transform, weak_sweep

log = logging.getLogger("czlab")

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``a:b:steps`` -> geometric grid from a to b; a single number -> that value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"bad grid {text!r}; expected a:b:steps") from None
    if a <= 0 or b <= 0 or k < 1:
        raise InputError(f"bad grid {text!r}; need positive endpoints and steps")
    return np.geomspace(a, b, k)


def _kernel(args, dim):
    spec = {"kind": args.kernel}
    if args.kernel == "riesz":
        spec.update(n=args.riesz_n, component=args.component)
    return make_kernel(spec, dim)


def _write(obj, path):
    if path:
        dump_json(obj, path)
    else:
        json.dump(obj, sys.stdout, indent=1, sort_keys=True)
        sys.stdout.write("\n")


def cmd_gen(args):
    spec = GeneratorSpec(kind=args.kind, dim=args.dim, count=args.count, n=args.n, C0=args.C0,
                         r_min=args.r_min, seed=args.seed, depth=args.depth, ratio=args.ratio,
                         heavy=args.heavy, heavy_mass=args.heavy_mass, levels=args.levels,
                         path=args.path)
    mu = gen_measure(spec)
    _write(mu.to_json(), args.out)
    if args.density_out:
        f = gen_density(mu, args.density, seed=args.seed + 1, complex_values=args.complex)
        dump_json(f.to_json(), args.density_out)
    log.info("generated %d atoms, growth %s", mu.size, mu.growth)
    return EXIT_OK


def cmd_verify_growth(args):
    mu = load_measure(args.measure)
    rep = verify_growth(mu)
    _write(rep.to_json(), args.out)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_decompose(args):
    mu = load_measure(args.measure)
    f = load_density(args.density)
    if args.lam is None:
        raise InputError("--lambda is required")
    dec = decompose(mu, f, args.lam, K_overlap=args.k_overlap,
                    annulus_diameter=args.annulus_diameter)
    _write(dec.to_json(), args.out)
    log.info("%d parts at lambda=%g", len(dec.parts), args.lam)
    return EXIT_OK


def cmd_verify(args):
    mu = load_measure(args.measure)
    f = load_density(args.density)
    with open(args.dec) as fh:
        dec = CZDecomposition.from_json(json.load(fh), mu)
    rep = verify_decomposition(mu, f, dec.lam, dec)
    _write(rep.to_json(), args.out)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_transform(args):
    mu = load_measure(args.measure)
    f = load_density(args.density)
    K = _kernel(args, mu.dim)
    vals = truncated_transform(mu, K, f, args.eps, adjoint=args.adjoint)
    _write({"eps": args.eps, "kernel": K.to_json(), "values": encode_values(vals)}, args.out)
    return EXIT_OK


def cmd_weak11(args):
    mu = load_measure(args.measure)
    f = load_density(args.density)
    K = _kernel(args, mu.dim)
    eps = parse_grid(args.eps_grid) if args.eps_grid else np.array([mu.growth.r_min])
    lambdas = None if args.lambda_grid in (None, "auto") else parse_grid(args.lambda_grid)
    sweep = weak_sweep(mu, K, f, eps, lambdas)
    out = sweep.to_json()
    out["kernel"] = K.to_json()
    if args.l2_trials:
        out["l2_norms"] = [empirical_l2_norm(mu, K, float(e), trials=args.l2_trials, seed=args.seed)
                           for e in eps]
    _write(out, args.out)
    if args.csv:
        sweep.write_csv(args.csv)
    if args.summary_csv:
        sweep.write_summary_csv(args.summary_csv, out.get("l2_norms"))
    return EXIT_OK


def cmd_report(args):
    cfg = ExperimentConfig.from_dict(args.experiment or {})
    if args.seed is not None:
        cfg.seed = args.seed
    rep = run_weak11_experiment(cfg, csv_path=args.csv)
    _write(rep, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="czlab", description=__doc__)
    p.add_argument("--config", help="JSON file whose keys provide defaults for the flags")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, measure=True, density=True):
        if measure:
            sp.add_argument("--measure", help="measure JSON file")
        if density:
            sp.add_argument("--density", help="density JSON file")
        sp.add_argument("--out", help="output JSON (stdout if omitted)")
        sp.add_argument("--seed", type=int, default=0)

    def kernel_opts(sp):
        sp.add_argument("--kernel", choices=["cauchy", "riesz", "power"], default="cauchy")
        sp.add_argument("--component", type=int, default=0)
        sp.add_argument("--riesz-n", type=float, default=1.0)

    sp = sub.add_parser("gen", help="generate a measure (and optionally a density)")
    common(sp, measure=False, density=False)
    sp.add_argument("--kind", default="grid",
                    choices=["grid", "cantor", "segment_plus_atoms", "lacunary", "random", "file"])
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--n", type=float)
    sp.add_argument("--C0", type=float)
    sp.add_argument("--r-min", type=float)
    sp.add_argument("--depth", type=int, default=4)
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--heavy", type=int, default=0)
    sp.add_argument("--heavy-mass", type=float, default=25.0)
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--path")
    sp.add_argument("--density", default="spikes", choices=["spikes", "ones", "random"])
    sp.add_argument("--complex", action="store_true")
    sp.add_argument("--density-out")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("verify-growth", help="check mu(B(x,r)) <= C0 r^n for r >= r_min")
    common(sp, density=False)
    sp.set_defaults(func=cmd_verify_growth)

    sp = sub.add_parser("decompose", help="Calderon-Zygmund decomposition at level lambda")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--k-overlap", type=int)
    sp.add_argument("--annulus-diameter", type=float)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("verify", help="re-check a stored decomposition")
    common(sp)
    sp.add_argument("--dec", required=False)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("transform", help="truncated transform at every atom")
    common(sp)
    kernel_opts(sp)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--adjoint", action="store_true")
    sp.set_defaults(func=cmd_transform)

    sp = sub.add_parser("weak11", help="weak (1,1) sweep over eps and lambda grids")
    common(sp)
    kernel_opts(sp)
    sp.add_argument("--eps-grid")
    sp.add_argument("--lambda-grid", default="auto")
    sp.add_argument("--l2-trials", type=int, default=0)
    sp.add_argument("--csv", help="long-format sweep: eps, lambda, exceedance_mass, quasinorm")
    sp.add_argument("--summary-csv", help="one row per eps: eps, quasinorm[, l2_norm]")
    sp.set_defaults(func=cmd_weak11)

    sp = sub.add_parser("report", help="end-to-end experiment from a config")
    sp.add_argument("--out")
    sp.add_argument("--csv")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_report, experiment=None)
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return None
    with open(known.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        cfg = _apply_config(parser, argv)
        if cfg:
            # config keys become defaults; explicit flags still win
            flat = {k.replace("-", "_"): v for k, v in cfg.items()}
            if "lambda" in flat:
                flat["lam"] = flat.pop("lambda")
            for action in parser._subparsers._group_actions:
                for sp in action.choices.values():
                    sp.set_defaults(**flat)
            parser.set_defaults(**flat)
        args = parser.parse_args(argv)
        if args.verb == "report" and cfg:
            args.experiment = cfg
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        for name in ("measure", "density"):
            if hasattr(args, name) and getattr(args, name) is None and args.verb not in ("gen",):
                raise InputError(f"--{name} is required")
        return args.func(args)
    except GrowthViolation as exc:
        print(f"czlab: growth violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (InvariantFailure, DecompositionError) as exc:
        print(f"czlab: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (InputError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"czlab: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
