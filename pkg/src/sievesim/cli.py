"""Command-line interface for the simulation and verification experiments.

Every subcommand builds an ExperimentConfig from a flat key=value config
file (if given) overridden by flags, runs the experiment, writes CSV/JSON
outputs, and exits 0 exactly when all enabled checks pass.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .distributions import ModelParams, WLaw

_RUNNERS = {
    "limit-sample": harness.run_limit_sample,
    "occupancy": harness.run_occupancy_sim,
    "renewal": harness.run_renewal,
    "verify-bounds": harness.run_verify_bounds,
    "theorem-main": harness.run_theorem_main,
    "theorem-2": harness.run_theorem2,
    "theorem-3": harness.run_theorem3,
    "fixed-level": harness.run_fixed_level_link,
    "appendix": None,  # needs no config beyond the seed
}

def _read_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line (want key=value): {line!r}")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="sievesim",
        description="simulate and verify nested occupancy schemes with "
                    "heavy-tailed stick-breaking")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file; flags override")
        p.add_argument("--alpha", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--kappa", type=float)
        p.add_argument("--case", choices=["a", "b", "pareto"])
        p.add_argument("--log-n", type=float, action="append",
                       help="repeatable; doubles as the horizon t for walk-time runs")
        p.add_argument("--j", type=int, action="append",
                       help="repeatable, one per --log-n (single value applies to all)")
        p.add_argument("--u", type=float, action="append")
        p.add_argument("--replicas", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threshold-rule")
        p.add_argument("--step", type=float,
                       help="grid step as a fraction of the horizon")
        p.add_argument("--horizon", type=float,
                       help="override the grid horizon (defaults to max log-n)")
        p.add_argument("--workers", type=int)
        p.add_argument("--out", default=".")
        p.add_argument("--format", choices=["csv", "json", "both"])
    return parser.parse_args(argv)


def _merged_settings(args) -> dict:
    settings = {}
    if args.config:
        settings.update(_read_config_file(args.config))
    flag_map = {
        "alpha": args.alpha, "c": args.c, "kappa": args.kappa, "case": args.case,
        "log_n": args.log_n, "j": args.j, "u": args.u, "replicas": args.replicas,
        "seed": args.seed, "threshold_rule": args.threshold_rule,
        "step": args.step, "horizon": args.horizon, "workers": args.workers,
        "format": args.format,
    }
    for key, val in flag_map.items():
        if val is not None:
            settings[key] = val
    return settings


def _as_floats(val):
    if isinstance(val, str):
        return tuple(float(x) for x in val.split(","))
    return tuple(float(x) for x in val)


def _build_config(settings: dict) -> harness.ExperimentConfig:
    law = WLaw(settings.get("case", "a"))
    kappa = settings.get("kappa")
    params = ModelParams(
        law=law,
        alpha=float(settings.get("alpha", 0.5)),
        c=float(settings.get("c", 1.0)),
        kappa=float(kappa) if kappa is not None else None,
    )
    kwargs = {"params": params}
    if "log_n" in settings:
        kwargs["log_n_list"] = _as_floats(settings["log_n"])
    if "j" in settings:
        js = tuple(int(x) for x in _as_floats(settings["j"]))
        default_logn = harness.ExperimentConfig.__dataclass_fields__["log_n_list"].default
        n_logn = len(kwargs.get("log_n_list", default_logn))
        kwargs["j_list"] = js * n_logn if len(js) == 1 and n_logn > 1 else js
    if "u" in settings:
        kwargs["u_list"] = _as_floats(settings["u"])
    if "replicas" in settings:
        kwargs["replicas"] = int(settings["replicas"])
    if "seed" in settings:
        kwargs["seed"] = int(settings["seed"])
    if "threshold_rule" in settings:
        kwargs["threshold_rule"] = str(settings["threshold_rule"])
    if "step" in settings:
        kwargs["grid_step_frac"] = float(settings["step"])
    if "workers" in settings:
        kwargs["workers"] = int(settings["workers"])
    if "format" in settings:
        kwargs["fmt"] = str(settings["format"])
    if "horizon" in settings:
        horizon = float(settings["horizon"])
        lst = list(kwargs.get("log_n_list", harness.ExperimentConfig().log_n_list))
        if horizon > max(lst):
            lst.append(horizon)
        kwargs["log_n_list"] = tuple(sorted(lst))
        if "j_list" in kwargs and len(kwargs["j_list"]) != len(kwargs["log_n_list"]):
            kwargs.pop("j_list")
    return harness.ExperimentConfig(**kwargs)


def main(argv=None) -> int:
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    settings = _merged_settings(args)
    if args.command == "appendix":
        report = harness.run_appendix_checks(int(settings.get("seed",
                                                              harness.DEFAULT_SEED)))
        fmt = str(settings.get("format", "both"))
    else:
        config = _build_config(settings)
        report = _RUNNERS[args.command](config)
        fmt = config.fmt
    paths = harness.emit(report, fmt, args.out)
    for check in report.checks:
        state = "PASS" if check["passed"] else "FAIL"
        print(f"[{state}] {check['name']}: {check['value']} (threshold {check['threshold']})")
    for path in paths:
        print(f"wrote {path}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
