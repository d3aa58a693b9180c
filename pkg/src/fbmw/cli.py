"""Command line entry point: ``fbmw simulate|rates|rates-discrete|verify|transport``."""

from __future__ import annotations

import argparse
import os
import sys

from .harness.config import ConfigError, ExperimentConfig, apply_settings, read_config, write_config

# flag -> config key
FLAGS = {
    "d": "d",
    "hurst": "H",
    "p": "p",
    "t_grid": "T_grid",
    "replicas": "replicas",
    "metric": "metric",
    "resolution": "resolution",
    "alpha": "alpha",
    "epsilon_mode": "epsilon_mode",
    "seed": "seed",
    "tolerance": "tolerance",
    "threads": "threads",
}


def _common(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--config", help="key=value file; flags override it")
    ap.add_argument("--d", type=str)
    ap.add_argument("--hurst", type=str)
    ap.add_argument("--p", type=str)
    ap.add_argument("--t-grid", dest="t_grid", help="e.g. 16,32,64 or 2^4..2^10")
    ap.add_argument("--replicas", type=str)
    ap.add_argument("--metric", choices=("wasserstein_exact", "wasserstein_entropic", "sobolev_l2", "sobolev_lp"))
    ap.add_argument("--resolution", type=str)
    ap.add_argument("--alpha", type=str)
    ap.add_argument("--epsilon-mode", dest="epsilon_mode", help="rule_continuous, rule_discrete(a) or fixed(eps)")
    ap.add_argument("--seed", type=str)
    ap.add_argument("--tolerance", type=str)
    ap.add_argument("--threads", type=str)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other config key")
    ap.add_argument("--out", default=".", help="output directory")


def build_config(args) -> ExperimentConfig:
    settings = read_config(args.config) if args.config else {}
    for kv in args.set:
        if "=" not in kv:
            raise ConfigError(f"--set expects key=value, got {kv!r}")
        k, v = kv.split("=", 1)
        settings[k.strip()] = v.strip()
    for flag, key in FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            settings[key] = v
    return apply_settings(ExperimentConfig(), settings)


def _save_config(cfg, out) -> None:
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.txt"), "w", encoding="utf-8", newline="\n") as fh:
        write_config(cfg, fh)


def cmd_simulate(args) -> int:
    from .fbm import sample_torus_path, write_path_csv

    cfg = build_config(args)
    T = cfg.T_grid[-1]
    path = sample_torus_path(T, cfg.n_steps_max, cfg.H, cfg.d, cfg.seed)
    os.makedirs(args.out, exist_ok=True)
    dest = os.path.join(args.out, "path.csv")
    with open(dest, "w", encoding="utf-8", newline="\n") as fh:
        write_path_csv(path, fh)
    print(dest)
    return 0


def _rates(args, discrete: bool) -> int:
    from .harness.report import emit_report, summary_lines
    from .harness.sweeps import run_discrete_sweep, run_metric_sweep

    cfg = build_config(args)
    fit = run_discrete_sweep(cfg) if discrete else run_metric_sweep(cfg)
    _save_config(cfg, args.out)
    emit_report([fit], [], args.out)
    print("\n".join(summary_lines([fit], [])))
    return 0 if fit.passed else 1


def cmd_verify(args) -> int:
    from .harness.report import emit_report
    from .harness.suites import SUITES, run_lemma_suite

    cfg = build_config(args)
    names = args.suites or list(SUITES)
    reports = []
    for name in names:
        rep = run_lemma_suite(name, seed=cfg.seed, threads=cfg.threads)
        print("\n".join(rep.lines()), flush=True)
        reports.append(rep)
    emit_report([], reports, args.out)
    return 0 if all(r.passed for r in reports) else 1


def cmd_transport(args) -> int:
    from .occupation import GridMeasure
    from .transport import wasserstein_entropic, wasserstein_exact

    cfg = build_config(args)
    with open(args.mu, encoding="utf-8") as fh:
        mu = GridMeasure.read(fh)
    if args.nu:
        with open(args.nu, encoding="utf-8") as fh:
            nu = GridMeasure.read(fh)
    else:
        nu = GridMeasure(mu.masses * 0 + mu.total_mass / mu.masses.size)
    os.makedirs(args.out, exist_ok=True)
    if cfg.metric == "wasserstein_entropic":
        w = wasserstein_entropic(mu, nu, cfg.p, cfg.reg, cfg.sinkhorn_max_iter, cfg.sinkhorn_tol)
    else:
        w, plan = wasserstein_exact(mu, nu, cfg.p)
        with open(os.path.join(args.out, "plan.csv"), "w", encoding="utf-8", newline="\n") as fh:
            plan.write_csv(fh)
    print(format(w, ".17g"))
    return 0


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbmw", description="Occupation measures of fractional Brownian motion on the torus")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", help="sample one torus path at the largest horizon, write path.csv")
    _common(sp)
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("rates", help="continuous-time rate sweep")
    _common(sp)
    sp.set_defaults(func=lambda a: _rates(a, False))
    sp = sub.add_parser("rates-discrete", help="sampled-path rate sweep (needs --alpha)")
    _common(sp)
    sp.set_defaults(func=lambda a: _rates(a, True))
    sp = sub.add_parser("verify", help="run verification suites")
    _common(sp)
    sp.add_argument("suites", nargs="*", help="suite names (default: all)")
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("transport", help="W_p between grid measure files (second defaults to uniform)")
    _common(sp)
    sp.add_argument("mu")
    sp.add_argument("nu", nargs="?")
    sp.set_defaults(func=cmd_transport)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as e:
        print(f"fbmw: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
