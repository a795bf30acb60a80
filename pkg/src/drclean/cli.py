"""Command-line front end.

Subcommands: simulate, scree, estimate, coverage, privacy-calibrate.
Results go to --out (or stdout); diagnostics go to stderr. Exit codes:
0 success, 2 usage or configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness, io
from .cleaning import scree
from .corrupt import CorruptionSpec, sigma_for_noise_ratio, simulate_dgp
from .dictionary import Dictionary
from .dr import cross_fit_estimate
from .errors import ConfigurationError, DrcleanError
from .estimands import (
    Ate,
    AverageDerivative,
    Late,
    LocalizedAte,
    PartiallyLinear,
    Pliv,
    PolicyAffine,
)
from .privacy import (
    CentralDpSpec,
    MicroDpSpec,
    central_scale,
    central_subexp_bound,
    micro_scale,
    micro_subexp_bound,
    p_over_L_diagnostic,
)

_NOISE_NAMES = {
    "none": "none",
    "gaussian": "gaussian",
    "laplace": "laplace",
    "discretize": "discretize_poisson",
}

_DICT_NAMES = {
    "identity": "identity",
    "interacted": "interacted",
    "plinear": "partially_linear",
    "quad": "quadratic_interacted",
}


def _parse_floats(text: str | None) -> np.ndarray | None:
    if text is None:
        return None
    return np.array([float(tok) for tok in text.split(",")])


def estimand_from_args(args) -> object:
    name = args.estimand
    if name == "ate":
        return Ate()
    if name == "policy":
        return PolicyAffine(t1=_parse_floats(getattr(args, "t1", None)),
                            t2=_parse_floats(getattr(args, "t2", None)))
    if name == "derivative":
        return AverageDerivative()
    if name == "plinear":
        return PartiallyLinear()
    if name == "pliv":
        return Pliv()
    if name == "late":
        return Late()
    if name == "localized-ate":
        if getattr(args, "v", None) is None or getattr(args, "h", None) is None:
            raise ConfigurationError("localized-ate needs --v and --h")
        return LocalizedAte(v=args.v, h=args.h, kernel=args.kernel)
    raise ConfigurationError(f"unknown estimand {name!r}")


def _spec_from_args(args) -> CorruptionSpec:
    noise = _NOISE_NAMES[args.noise]
    if args.sigma is not None and args.ratio is not None:
        raise ConfigurationError("give either --sigma or --ratio, not both")
    if args.sigma is not None:
        sigma = args.sigma
    elif args.ratio is not None:
        sigma = sigma_for_noise_ratio(args.ratio, args.r)
    else:
        sigma = 0.0
    if noise in ("gaussian", "laplace") and sigma == 0.0:
        raise ConfigurationError(f"--noise {args.noise} needs --sigma or --ratio")
    if not 0.0 <= args.missing < 1.0:
        raise ConfigurationError("--missing must lie in [0, 1)")
    return CorruptionSpec(
        noise_kind=noise,
        sigma_h=sigma,
        rho=1.0 - args.missing,
        row_correlated=args.row_correlated,
        seed=args.seed,
    )


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    ds = simulate_dgp(args.n, args.p, args.r, spec, args.seed)
    io.write_dataset(args.out, ds)
    if args.out is not None:
        sidecar = os.path.splitext(args.out)[0] + ".json"
        io.write_simulation_sidecar(sidecar, ds, spec, extra={"seed": args.seed})
        print(f"wrote {args.out} and {sidecar}", file=sys.stderr)
    return 0


def cmd_scree(args) -> int:
    ds = io.read_dataset(args.input)
    io.write_scree_csv(args.out, scree(ds.Z, ds.mask))
    return 0


def cmd_estimate(args) -> int:
    estimand = estimand_from_args(args)
    if args.dict is not None:
        kind = _DICT_NAMES[args.dict]
        if kind != estimand.dictionary_kind:
            raise ConfigurationError(
                f"estimand {estimand.tag!r} requires --dict "
                f"{_cli_dict_name(estimand.dictionary_kind)!r}"
            )
    ds = io.read_dataset(args.input, iv=estimand.needs_instrument)
    dictionary = Dictionary(kind=estimand.dictionary_kind, p_in=ds.p)
    result = cross_fit_estimate(ds, estimand, k=args.k, L=args.folds,
                                seed=args.seed, dictionary=dictionary,
                                rtol=args.pinv_rtol)
    config = {
        "estimand": estimand.tag,
        "dict": _cli_dict_name(estimand.dictionary_kind),
        "k": args.k,
        "folds": args.folds,
        "seed": args.seed,
        "input": args.input,
        "pinv_rtol": args.pinv_rtol,
    }
    text = io.result_to_json(result, config)
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def _cli_dict_name(kind: str) -> str:
    return {v: k for k, v in _DICT_NAMES.items()}[kind]


def cmd_coverage(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    config = harness.parse_experiment_config(raw)
    if args.threads is not None:
        config.max_workers = args.threads
    rows = []
    for index, cell in enumerate(harness.grid_cells(config)):
        row, records = harness.run_cell_detailed(cell, max_workers=config.max_workers)
        rows.append(row)
        if args.studentized_dir is not None:
            os.makedirs(args.studentized_dir, exist_ok=True)
            values = harness.studentize(records, harness.THETA_TRUE)
            io.write_studentized_csv(
                os.path.join(args.studentized_dir, f"cell_{index:03d}.csv"), values)
        print(f"cell {row.cell} k={row.k}: coverage={row.coverage:.3f} "
              f"mean_theta={row.mean_theta:.3f}", file=sys.stderr)
    io.write_coverage_csv(args.out, rows)
    return 0


def cmd_privacy_calibrate(args) -> int:
    if args.regime == "central":
        if args.abar is None or args.l is None or args.p is None:
            raise ConfigurationError("central regime needs --p, --abar, and --l")
        A_bar = _parse_floats(args.abar)
        L = _parse_floats(args.l)
        if A_bar.size == 1 and L.size > 1:
            A_bar = np.full(L.size, A_bar[0])
        if L.size == 1 and A_bar.size > 1:
            L = np.full(A_bar.size, L[0])
        spec = CentralDpSpec(epsilon=args.epsilon, p=args.p, A_bar=A_bar, L=L)
        scale = central_scale(spec)
        k_a, kappa = central_subexp_bound(spec)
        payload = {
            "schema_version": io.SCHEMA_VERSION,
            "regime": "central",
            "epsilon": args.epsilon,
            "p": args.p,
            "scale": [float(s) for s in scale],
            "noise_variance": [float(2.0 * s**2) for s in scale],
            "k_a_bound": k_a,
            "kappa_bound": kappa,
            "p_over_L": p_over_L_diagnostic(spec, n=args.n),
        }
    else:
        if args.abar is None or args.t is None:
            raise ConfigurationError("micro regime needs --abar and --t")
        A_bar = _parse_floats(args.abar)
        if A_bar.size != 1:
            raise ConfigurationError("micro regime takes a scalar --abar")
        spec = MicroDpSpec(epsilon=args.epsilon, T=args.t, A_bar=float(A_bar[0]))
        scale = micro_scale(spec)
        k_a, kappa = micro_subexp_bound(spec)
        payload = {
            "schema_version": io.SCHEMA_VERSION,
            "regime": "micro",
            "epsilon": args.epsilon,
            "T": args.t,
            "scale": scale,
            "noise_variance": 2.0 * scale**2,
            "k_a_bound": k_a,
            "kappa_bound": kappa,
        }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drclean",
        description="Data cleaning-adjusted causal inference for corrupted covariates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a corrupted dataset as CSV + JSON sidecar")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--r", type=int, required=True)
    sim.add_argument("--noise", choices=sorted(_NOISE_NAMES), default="none")
    sim.add_argument("--ratio", type=float, default=None,
                     help="noise-to-signal variance ratio (sigma = sqrt(ratio * r))")
    sim.add_argument("--sigma", type=float, default=None, help="noise standard deviation")
    sim.add_argument("--missing", type=float, default=0.0,
                     help="fraction of entries masked per column")
    sim.add_argument("--row-correlated", action="store_true",
                     help="draw within-row dependent missingness")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    sim.set_defaults(func=cmd_simulate)

    scr = sub.add_parser("scree", help="singular value spectrum of a dataset's covariates")
    scr.add_argument("--input", required=True)
    scr.add_argument("--out", default=None)
    scr.set_defaults(func=cmd_scree)

    est = sub.add_parser("estimate", help="cross-fitted doubly robust estimate from a CSV")
    est.add_argument("--input", required=True)
    est.add_argument("--estimand", required=True,
                     choices=["ate", "policy", "derivative", "plinear", "pliv",
                              "late", "localized-ate"])
    est.add_argument("--dict", choices=sorted(_DICT_NAMES), default=None,
                     help="dictionary layout (defaults to the estimand's layout)")
    est.add_argument("--k", type=int, required=True, help="cleaning rank")
    est.add_argument("--folds", type=int, default=2)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--t1", default=None, help="policy slope (scalar or comma list)")
    est.add_argument("--t2", default=None, help="policy shift (scalar or comma list)")
    est.add_argument("--v", type=float, default=None, help="localization point")
    est.add_argument("--h", type=float, default=None, help="localization bandwidth")
    est.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian")
    est.add_argument("--pinv-rtol", type=float, default=1e-10,
                     help="relative singular value cutoff for pseudoinverse solves")
    est.add_argument("--out", default=None, help="result JSON path (stdout if omitted)")
    est.set_defaults(func=cmd_estimate)

    cov = sub.add_parser("coverage", help="Monte Carlo coverage grid from a config JSON")
    cov.add_argument("--config", required=True)
    cov.add_argument("--out", default=None, help="coverage table CSV (stdout if omitted)")
    cov.add_argument("--threads", type=int, default=None,
                     help="worker threads per cell (results identical for any value)")
    cov.add_argument("--studentized-dir", default=None,
                     help="also dump per-cell studentized estimates into this directory")
    cov.set_defaults(func=cmd_coverage)

    priv = sub.add_parser("privacy-calibrate",
                          help="Laplace scales and noise parameters for a privacy budget")
    priv.add_argument("--regime", choices=["central", "micro"], required=True)
    priv.add_argument("--epsilon", type=float, required=True)
    priv.add_argument("--p", type=int, default=None, help="published variables (central)")
    priv.add_argument("--abar", default=None, help="entry bound(s), scalar or comma list")
    priv.add_argument("--l", default=None, help="individuals per unit, scalar or comma list")
    priv.add_argument("--n", type=int, default=None, help="number of aggregate units")
    priv.add_argument("--t", type=int, default=None, help="privatized variables (micro)")
    priv.add_argument("--out", default=None)
    priv.set_defaults(func=cmd_privacy_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DrcleanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
