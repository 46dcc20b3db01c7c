"""Command-line entry point: ``ecotraj simulate|fit|predict|diagnose``.

Exit codes: 0 success, 2 configuration, 3 data, 4 numerical failure,
5 diagnostics outside the configured thresholds.  Failures also print one
JSON line ``{"category": ..., "message": ...}`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import synthetic_dataset
from .errors import ConfigError, DataError, DomainError, EcoTrajError, NumericalError, StructureError
from .inference import diagnostics, run_chains
from .io import (
    build_manifest,
    file_digests,
    load_config,
    mcmc_config_from,
    priors_from,
    read_dataset,
    read_samples,
    write_dataset,
    write_json,
    write_samples,
)
from .prediction import (
    SCENARIO_PRESETS,
    ClimateScenario,
    build_scenario_covariates,
    bundle,
    get_scenario,
    predict_transition_matrix,
    scenario_delta,
    write_long_csv,
    write_matrix_csv,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_DIAGNOSTICS = 0, 2, 3, 4, 5
DEFAULT_RHAT_MAX = 1.1
DEFAULT_ESS_MIN = 100.0


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("ECO_TRAJ_THREADS")
    if env is None:
        return 1
    try:
        return max(1, int(env))
    except ValueError:
        raise ConfigError(f"ECO_TRAJ_THREADS must be an integer, got {env!r}") from None


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("mcmc", {}).get("seed", 0))


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim_cfg = cfg.get("simulate", {})
    seed = _seed(args, cfg)
    rng = np.random.default_rng(seed)
    ds, sim = synthetic_dataset(rng, n_plots=sim_cfg.get("n_plots", 20),
                                n_rings=sim_cfg.get("n_rings", 1))
    out = write_dataset(ds, args.out)
    p = sim.params
    write_json(out / "truth.json", {
        "seed": seed, "alpha": p.alpha, "beta": p.beta, "sigma2_zeta": p.sigma2_zeta,
        "sigma2_xi": p.sigma2_xi, "sigma2_eps": p.sigma2_eps, "phi": p.phi,
        "h_names": ["intercept", *ds.landscape], "x_names": ["intercept", "temp_change", "precip_change"],
    })
    print(f"wrote simulated dataset to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    config = mcmc_config_from(cfg, seed=seed, chains=args.chains, iterations=args.iterations,
                              burn_in=args.burn_in)
    priors = priors_from(cfg)
    t0 = time.perf_counter()
    ds = read_dataset(args.data)
    design, states = ds.design(), ds.paired_states()
    t1 = time.perf_counter()
    samples = run_chains(design, states, priors, config, threads=_threads(args))
    t2 = time.perf_counter()
    out = Path(args.out)
    write_samples(samples, out)
    dims = {"n_plots": design.n_plots, "n_subplots": design.n_subplots, "n_states": ds.n_states,
            "labels": list(ds.labels), "h_names": list(design.h_names),
            "x_names": list(design.x_names), "n_draws": samples.n_draws}
    write_json(out / "manifest.json", build_manifest(
        seed, cfg, {"data_dir": str(Path(args.data).resolve()), "digests": file_digests(args.data)},
        dims, {"load_s": t1 - t0, "sample_s": t2 - t1},
        burn_in=config.burn_in, iterations=config.iterations, thin=config.thin, chains=config.chains))
    print(f"wrote {samples.n_draws} draws to {out / 'samples.csv'}")
    return EXIT_OK


def _scenario(arg):
    if arg is None or arg == "observed":
        return None
    if arg in SCENARIO_PRESETS:
        return get_scenario(arg)
    path = Path(arg)
    if not path.exists():
        raise ConfigError(f"unknown scenario {arg!r}: not a preset ({', '.join(SCENARIO_PRESETS)}) "
                          "or a file")
    sc = load_config(path).get("scenario", {})
    try:
        return ClimateScenario(sc.get("name", path.stem), sc["horizon"], sc["delta_temp"],
                               sc["delta_precip"])
    except KeyError as exc:
        raise ConfigError(f"scenario file {path.name} lacks scenario.{exc.args[0]}") from None


def cmd_predict(args) -> int:
    cfg = load_config(args.config)
    pcfg = cfg.get("predict", {})
    seed = _seed(args, cfg)
    rng = np.random.default_rng(seed)
    samples = read_samples(args.run)
    data_dir = args.data or samples.meta.get("inputs", {}).get("data_dir")
    if data_dir is None:
        raise ConfigError("predict needs --data when the run manifest has no data directory")
    ds = read_dataset(data_dir)
    scenario = _scenario(args.scenario)
    delta = None
    if scenario is not None:
        x_rows = build_scenario_covariates(ds, scenario)
        delta = scenario_delta(samples, ds.design(), x_rows, rng,
                               deterministic=args.deterministic or pcfg.get("deterministic", False))
    y0 = ds.paired_states().y_start if (args.conditional or pcfg.get("conditional", False)) else None
    tm = predict_transition_matrix(samples, rng, delta=delta, y_start=y0, labels=ds.labels)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_csv(tm, out / "transition.csv")
    write_long_csv(tm, out / "transition_long.csv")
    write_json(out / "transition.json", bundle(tm, scenario, seed=seed,
                                               conditional_start=y0 is not None))
    print(f"wrote transition bundle to {out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = load_config(args.config)
    dcfg = cfg.get("diagnose", {})
    rhat_max = dcfg.get("rhat_max", DEFAULT_RHAT_MAX)
    ess_min = dcfg.get("ess_min", DEFAULT_ESS_MIN)
    samples = read_samples(args.run)
    rows = diagnostics(samples)
    ok = True
    out = Path(args.out) if args.out else Path(args.run)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "mean", "sd", "lower", "upper", "ess", "rhat", "pass"])
        for r in rows:
            passed = (math.isnan(r.rhat) or r.rhat <= rhat_max) and (math.isnan(r.ess) or r.ess >= ess_min)
            ok &= passed
            w.writerow([r.name, *(repr(v) for v in (r.mean, r.sd, r.lower, r.upper, r.ess, r.rhat)),
                        "pass" if passed else "fail"])
            print(f"{r.name:>16s} mean={r.mean:9.4f} sd={r.sd:8.4f} ess={r.ess:8.1f} "
                  f"rhat={r.rhat:6.3f} {'ok' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_DIAGNOSTICS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecotraj", description="Latent-trajectory land-cover models")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="key-value config file (section.key = value)")
        p.add_argument("--seed", type=int, help="random seed (overrides mcmc.seed)")
        p.add_argument("--out", required=out_required, help="output directory")
        return p

    p = common(sub.add_parser("simulate", help="simulate a dataset with known parameters"))
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("fit", help="run the Gibbs sampler"))
    p.add_argument("data", help="dataset directory")
    p.add_argument("--chains", type=int)
    p.add_argument("--threads", type=int, help="worker processes (default $ECO_TRAJ_THREADS or 1)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.set_defaults(func=cmd_fit)

    p = common(sub.add_parser("predict", help="posterior-predictive transition matrix"))
    p.add_argument("run", help="directory written by fit")
    p.add_argument("--data", help="dataset directory (default: the one recorded by fit)")
    p.add_argument("--scenario", help="preset name, scenario file, or 'observed' (default)")
    p.add_argument("--deterministic", action="store_true",
                   help="scenario drift only, without redrawing plot/subplot effects")
    p.add_argument("--conditional", action="store_true",
                   help="start from the observed states instead of resampling them")
    p.set_defaults(func=cmd_predict)

    p = common(sub.add_parser("diagnose", help="ESS and split R-hat per parameter"), out_required=False)
    p.add_argument("run", help="directory written by fit")
    p.set_defaults(func=cmd_diagnose)
    return parser


def _fail(category, exc, code):
    print(json.dumps({"category": category, "message": str(exc)}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail("config", exc, EXIT_CONFIG)
    except (DataError, StructureError, DomainError) as exc:
        return _fail("data", exc, EXIT_DATA)
    except NumericalError as exc:
        return _fail("numeric", exc, EXIT_NUMERIC)
    except EcoTrajError as exc:
        return _fail(getattr(exc, "category", "error"), exc, EXIT_DATA)


if __name__ == "__main__":
    sys.exit(main())
