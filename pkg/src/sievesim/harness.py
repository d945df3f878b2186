"""Experiment orchestration: configuration, runners, statistics, emission.

Every experiment fans replicas out over fixed-size chunks, each chunk owning
a counter-based substream keyed by (seed, experiment, index).  Results are
reduced in chunk order, so outputs are byte-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.special import gamma as gamma_fn

from . import occupancy, perturbed_walk, renewal_numerics, stable_paths
from .distributions import (
    ModelParams,
    WLaw,
    constants,
    gamma_ratio_bound_holds,
    neg_moment_via_laplace,
    sample_positive_stable,
)
from .renewal_numerics import GridFunction
from .stats import ks_two_sample, rank_correlation
from .streams import substream

__all__ = [
    "DEFAULT_SEED",
    "SampleSet",
    "ExperimentConfig",
    "Report",
    "ks_two_sample",
    "run_theorem_main",
    "run_theorem2",
    "run_theorem3",
    "run_fixed_level_link",
    "run_appendix_checks",
    "emit",
]

DEFAULT_SEED = 20250809
_CHUNK = 64

# substream tags, one per consumer of randomness
_TAG_LIMIT = 0
_TAG_MAIN = 1
_TAG_GRID = 2
_TAG_WALK = 3
_TAG_TREE3 = 4
_TAG_LINK = 5
_TAG_APPENDIX = 6


@dataclass
class SampleSet:
    """Labelled sample of replica values with provenance metadata."""

    label: str
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size == 0:
            raise ValueError(f"sample set {self.label!r} is empty")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"sample set {self.label!r} has non-finite values")


@dataclass
class ExperimentConfig:
    """Shared configuration for the verification experiments.

    log_n_list doubles as the time horizon list for the walk-time
    experiments (the model identifies t with log n).  j_list gives the
    explicit depth per entry; when omitted the default rule
    floor(log_n^0.3) applies.
    """

    params: ModelParams = field(default_factory=ModelParams)
    log_n_list: tuple = (50.0, 150.0, 400.0)
    j_list: tuple | None = None
    u_list: tuple = (0.6, 1.0)
    replicas: int = 2000
    seed: int = DEFAULT_SEED
    threshold_rule: str = "nlog2n"
    limit_draws: int = 10000
    grid_replicas: int = 100000
    grid_step_frac: float = 2.0 ** -12
    fixed_level_js: tuple = (4, 16, 64)
    workers: int = 1
    out_dir: str = "out"
    fmt: str = "both"

    def __post_init__(self):
        self.log_n_list = tuple(float(x) for x in self.log_n_list)
        self.u_list = tuple(float(u) for u in self.u_list)
        if self.j_list is None:
            self.j_list = tuple(max(1, math.floor(x ** 0.3)) for x in self.log_n_list)
        else:
            self.j_list = tuple(int(j) for j in self.j_list)
        if len(self.j_list) != len(self.log_n_list):
            raise ValueError("j_list must have one entry per log_n")
        if self.replicas < 100:
            raise ValueError("replicas must be at least 100")
        if self.fmt not in ("csv", "json", "both"):
            raise ValueError(f"unknown format {self.fmt!r}")
        consts = constants(self.params, i_max=8)
        beta = consts.residual_exp
        a = self.params.alpha
        cap_exp = min(1.0 / 3.0, (a - beta) / (a - beta + 1.0))
        for log_n, j in zip(self.log_n_list, self.j_list):
            if log_n <= 1.0:
                raise ValueError("log_n values must exceed 1")
            cap = log_n ** cap_exp
            if j > cap:
                raise ValueError(
                    f"j={j} exceeds the depth growth cap {cap:.3f} at log_n={log_n}")
            if j > 0.8 * cap:
                warnings.warn(
                    f"j={j} is within 20% of the depth growth cap {cap:.3f} "
                    f"at log_n={log_n}", RuntimeWarning, stacklevel=2)
            for u in self.u_list:
                if math.floor(j * u) < 1:
                    raise ValueError(f"floor(j*u) < 1 for j={j}, u={u}")

    def neglog_threshold(self, log_n: float) -> float:
        rule = self.threshold_rule
        if rule == "nlog2n":
            # threshold 1 / (n (log n)^2)
            return log_n + 2.0 * math.log(log_n)
        if rule.startswith("offset:"):
            return log_n + float(rule.split(":", 1)[1])
        raise ValueError(f"unknown threshold rule {rule!r}")

    def config_hash(self) -> str:
        payload = asdict(self)
        payload["params"]["law"] = self.params.law.value
        # execution and output details do not change the results
        for key in ("workers", "out_dir", "fmt"):
            payload.pop(key, None)
        blob = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Report:
    """Result of one experiment: CSV rows, JSON summary, pass/fail checks."""

    experiment: str
    config_hash: str
    seed: int
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    sample_sets: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def add_check(self, name: str, value, threshold, passed: bool) -> None:
        self.checks.append({"name": name, "value": value,
                            "threshold": threshold, "passed": bool(passed)})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def limit_mean_oracle(alpha: float, u: float) -> float:
    """Mean of the limit integral: (alpha u)^-alpha / Gamma(1-alpha)."""
    return (alpha * u) ** -alpha / gamma_fn(1.0 - alpha)


def _map_chunks(worker, args_list, workers: int):
    if workers <= 1:
        return [worker(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(worker, args_list))


def _chunk_args(static, n_replicas: int, seed: int, tag: int, sub: int):
    out = []
    idx = 0
    start = 0
    while start < n_replicas:
        size = min(_CHUNK, n_replicas - start)
        out.append((static, seed, tag, sub, idx, size))
        idx += 1
        start += size
    return out


# ----------------------------------------------------------------- theorem-main

def _theorem_main_chunk(args):
    (static, seed, tag, sub, idx, size) = args
    params, log_n, j, u_list, neglog_t = static
    consts = constants(params)
    rng = substream(seed, tag, sub, idx)
    max_level = max(math.floor(j * u) for u in u_list)
    norm = np.empty((size, len(u_list)))
    counts = np.empty((size, len(u_list)), dtype=np.int64)
    bias = np.empty((size, len(u_list)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for r in range(size):
            tree = occupancy.expand_tree(params, max_level,
                                         neglog_threshold=neglog_t, rng=rng)
            res = occupancy.occupancy_poissonized(tree, log_n, rng)
            for k, u in enumerate(u_list):
                level = math.floor(j * u)
                norm[r, k] = occupancy.normalize_counts(res, params, consts, j, u)
                counts[r, k] = res.counts[level - 1]
                bias[r, k] = res.pruned_bias_bound[level - 1]
    return norm, counts, bias


def run_theorem_main(config: ExperimentConfig) -> Report:
    """Distributional check of the depth-normalized occupancy counts against
    joint limit-law samples, across the configured log_n trajectory."""
    if config.params.law is WLaw.PARETO:
        raise ValueError("theorem experiments require the stable or gamma-mixture law")
    report = Report("theorem-main", config.config_hash(), config.seed)
    u_list = list(config.u_list)

    rng_limit = substream(config.seed, _TAG_LIMIT)
    lim_vals, lim_tails = stable_paths.sample_limit_integrals(
        config.params.alpha, u_list, config.limit_draws, rng_limit)
    for k, u in enumerate(u_list):
        ss = SampleSet(f"limit(u={u:g})", lim_vals[:, k],
                       {"config": report.config_hash, "replicas": config.limit_draws,
                        "mean_tail_bound": float(lim_tails[:, k].mean())})
        report.sample_sets[ss.label] = ss
        for r, val in enumerate(ss.values):
            report.rows.append({"experiment": "theorem-main/limit", "log_n_or_t": "",
                                "j": "", "u": u, "replica": r, "value": float(val)})

    ks_by_u = {u: [] for u in u_list}
    for i, (log_n, j) in enumerate(zip(config.log_n_list, config.j_list)):
        static = (config.params, log_n, j, u_list, config.neglog_threshold(log_n))
        results = _map_chunks(_theorem_main_chunk,
                              _chunk_args(static, config.replicas, config.seed,
                                          _TAG_MAIN, i),
                              config.workers)
        norm = np.concatenate([r[0] for r in results])
        counts = np.concatenate([r[1] for r in results])
        bias = np.concatenate([r[2] for r in results])
        for k, u in enumerate(u_list):
            label = f"normalized(log_n={log_n:g},u={u:g})"
            ss = SampleSet(label, norm[:, k],
                           {"config": report.config_hash, "replicas": config.replicas})
            report.sample_sets[label] = ss
            for r, val in enumerate(ss.values):
                report.rows.append({"experiment": "theorem-main/count",
                                    "log_n_or_t": log_n, "j": j, "u": u,
                                    "replica": r, "value": float(val)})
            mean_count = counts[:, k].mean()
            bias_frac = bias[:, k].max() / max(mean_count, 1e-12)
            if bias_frac > 0.01:
                raise RuntimeError(
                    f"pruned bias bound is {100 * bias_frac:.2f}% of the mean count "
                    f"at log_n={log_n}, u={u}; tighten the threshold rule")
            ks = ks_two_sample(ss.values, lim_vals[:, k])
            ks_by_u[u].append(ks)
            report.summary[f"mean(log_n={log_n:g},u={u:g})"] = float(norm[:, k].mean())
            report.summary[f"ks(log_n={log_n:g},u={u:g})"] = float(ks)
            report.summary[f"bias_frac(log_n={log_n:g},u={u:g})"] = float(bias_frac)
        if len(u_list) >= 2:
            report.summary[f"rank_corr(log_n={log_n:g})"] = rank_correlation(
                norm[:, 0], norm[:, -1])

    largest = config.log_n_list[-1]
    for u in u_list:
        target = limit_mean_oracle(config.params.alpha, u)
        mean = report.summary[f"mean(log_n={largest:g},u={u:g})"]
        report.add_check(f"mean_within_15pct(u={u:g})", mean,
                         f"{target:.6g}+-15%", abs(mean / target - 1.0) <= 0.15)
        ks_seq = ks_by_u[u]
        report.add_check(f"ks_final<=0.15(u={u:g})", ks_seq[-1], 0.15,
                         ks_seq[-1] <= 0.15)
        decreasing = all(a > b for a, b in zip(ks_seq, ks_seq[1:]))
        report.add_check(f"ks_strictly_decreasing(u={u:g})",
                         [round(v, 4) for v in ks_seq], "strictly decreasing",
                         decreasing)
    max_bias = max(v for k, v in report.summary.items() if k.startswith("bias_frac"))
    report.add_check("bias_fraction<=0.01", max_bias, 0.01, max_bias <= 0.01)
    return report


# -------------------------------------------------------------------- theorem-2

def _theorem2_chunk(args):
    (static, seed, tag, sub, idx, size) = args
    params, t, j, u_list, step, grids = static
    consts = constants(params)
    rng = substream(seed, tag, sub, idx)
    a = params.alpha
    norm = np.empty((size, len(u_list)))
    for r in range(size):
        walk = perturbed_walk.generate_walk(params, t, rng)
        for k, u in enumerate(u_list):
            level = math.floor(j * u)
            grid = grids[level - 1]
            if grid is None:  # level 1 weighs every point by 1
                stat = float(np.count_nonzero(walk.t_values <= t))
            else:
                gf = GridFunction(step=step, values=grid)
                stat = perturbed_walk.weighted_sum_statistic(walk, gf, t)
            log_norm = (math.log(params.c) + a * math.log(j)
                        - consts.log_power_coefs[level - 1] - a * level * math.log(t))
            norm[r, k] = stat * math.exp(log_norm)
    return norm


def run_theorem2(config: ExperimentConfig) -> Report:
    """Check the weighted-sum statistic of the walk against the limit law."""
    if config.params.law is WLaw.PARETO:
        raise ValueError("theorem experiments require the stable or gamma-mixture law")
    report = Report("theorem-2", config.config_hash(), config.seed)
    u_list = list(config.u_list)
    horizon = max(config.log_n_list)
    step = horizon * config.grid_step_frac
    v = renewal_numerics.estimate_V(config.params, horizon, step,
                                    config.grid_replicas,
                                    substream(config.seed, _TAG_GRID, 0))
    max_level = max(math.floor(j * u) for j in config.j_list for u in u_list)
    powers = renewal_numerics.convolution_powers(v, max(max_level - 1, 1))

    rng_limit = substream(config.seed, _TAG_LIMIT, 1)
    lim_vals, _ = stable_paths.sample_limit_integrals(
        config.params.alpha, u_list, config.limit_draws, rng_limit)
    for k, u in enumerate(u_list):
        for r, val in enumerate(lim_vals[:, k]):
            report.rows.append({"experiment": "theorem-2/limit", "log_n_or_t": "",
                                "j": "", "u": u, "replica": r, "value": float(val)})

    ks_by_u = {u: [] for u in u_list}
    for i, (t, j) in enumerate(zip(config.log_n_list, config.j_list)):
        # grids[level-1]: values of the (level-1)-fold power; None means the
        # all-ones depth-0 convention
        grids = [None] + [p.values for p in powers]
        static = (config.params, t, j, u_list, step, grids)
        results = _map_chunks(_theorem2_chunk,
                              _chunk_args(static, config.replicas, config.seed,
                                          _TAG_WALK, i),
                              config.workers)
        norm = np.concatenate(results)
        for k, u in enumerate(u_list):
            label = f"weighted-sum(t={t:g},u={u:g})"
            ss = SampleSet(label, norm[:, k],
                           {"config": report.config_hash, "replicas": config.replicas})
            report.sample_sets[label] = ss
            for r, val in enumerate(ss.values):
                report.rows.append({"experiment": "theorem-2/statistic",
                                    "log_n_or_t": t, "j": j, "u": u,
                                    "replica": r, "value": float(val)})
            ks = ks_two_sample(ss.values, lim_vals[:, k])
            ks_by_u[u].append(ks)
            report.summary[f"mean(t={t:g},u={u:g})"] = float(norm[:, k].mean())
            report.summary[f"ks(t={t:g},u={u:g})"] = float(ks)

    for u in u_list:
        ks_seq = ks_by_u[u]
        report.summary[f"ks_trend(u={u:g})"] = [round(x, 4) for x in ks_seq]
        report.add_check(f"ks_final<=0.15(u={u:g})", ks_seq[-1], 0.15,
                         ks_seq[-1] <= 0.15)
    return report


# -------------------------------------------------------------------- theorem-3

def _theorem3_chunk(args):
    (static, seed, tag, sub, idx, size) = args
    params, t, j, step, grid_vals = static
    consts = constants(params)
    rng = substream(seed, tag, sub, idx)
    a = params.alpha
    diffs = np.empty(size)
    counts = np.empty(size)
    grid = None if grid_vals is None else GridFunction(step=step, values=grid_vals)
    for r in range(size):
        tree = occupancy.expand_tree(params, j, neglog_threshold=t, rng=rng)
        n_j = occupancy.count_N_j(tree, t)[j - 1]
        t_r = tree.neglogs[0]
        if grid is None:
            weighted = float(t_r.size)
        else:
            weighted = float(np.sum(grid(t - t_r)))
        log_norm = a * math.log(j) - consts.log_power_coefs[j - 1] - a * j * math.log(t)
        scale = math.exp(log_norm)
        diffs[r] = (n_j - weighted) * scale
        counts[r] = n_j * scale
    return diffs, counts


def run_theorem3(config: ExperimentConfig) -> Report:
    """Check that depth-j birth counts track their walk-predicted means:
    the normalized difference should shrink as the horizon grows."""
    if config.params.law is WLaw.PARETO:
        raise ValueError("theorem experiments require the stable or gamma-mixture law")
    report = Report("theorem-3", config.config_hash(), config.seed)
    horizon = max(config.log_n_list)
    step = horizon * config.grid_step_frac
    v = renewal_numerics.estimate_V(config.params, horizon, step,
                                    config.grid_replicas,
                                    substream(config.seed, _TAG_GRID, 1))
    max_j = max(config.j_list)
    powers = renewal_numerics.convolution_powers(v, max(max_j - 1, 1))

    medians = []
    for i, (t, j) in enumerate(zip(config.log_n_list, config.j_list)):
        grid_vals = None if j == 1 else powers[j - 2].values
        static = (config.params, t, j, step, grid_vals)
        results = _map_chunks(_theorem3_chunk,
                              _chunk_args(static, config.replicas, config.seed,
                                          _TAG_TREE3, i),
                              config.workers)
        diffs = np.concatenate([r[0] for r in results])
        counts = np.concatenate([r[1] for r in results])
        med_diff = float(np.median(np.abs(diffs)))
        med_count = float(np.median(counts))
        p90 = float(np.quantile(np.abs(diffs), 0.9))
        medians.append(med_diff)
        report.summary[f"median_absdiff(t={t:g},j={j})"] = med_diff
        report.summary[f"p90_absdiff(t={t:g},j={j})"] = p90
        report.summary[f"median_count(t={t:g},j={j})"] = med_count
        for r, val in enumerate(diffs):
            report.rows.append({"experiment": "theorem-3/normdiff", "log_n_or_t": t,
                                "j": j, "u": "", "replica": r, "value": float(val)})

    t_last, j_last = config.log_n_list[-1], config.j_list[-1]
    med_ratio = (report.summary[f"median_absdiff(t={t_last:g},j={j_last})"]
                 / max(report.summary[f"median_count(t={t_last:g},j={j_last})"], 1e-12))
    report.add_check("median_ratio<=0.2", med_ratio, 0.2, med_ratio <= 0.2)
    decreasing = all(a > b for a, b in zip(medians, medians[1:]))
    report.add_check("medians_decreasing", [round(m, 4) for m in medians],
                     "strictly decreasing", decreasing)
    return report


# ----------------------------------------------------------------- fixed level

def run_fixed_level_link(config: ExperimentConfig) -> Report:
    """Link between fixed-depth limits and the intermediate-depth limit:
    depth^alpha times the fixed-depth integral should approach the
    exponential integral as the depth grows."""
    report = Report("fixed-level", config.config_hash(), config.seed)
    a = config.params.alpha
    n = config.replicas
    rng = substream(config.seed, _TAG_LINK)
    ref, _ = stable_paths.sample_limit_integrals(a, [1.0], n, rng)
    ref = ref[:, 0]
    ks_seq = []
    means = []
    for j in config.fixed_level_js:
        draws = j ** a * stable_paths.sample_fixed_level_limits(a, j, n, rng)
        ks = ks_two_sample(draws, ref)
        ks_seq.append(ks)
        means.append(float(draws.mean()))
        report.summary[f"ks(j={j})"] = float(ks)
        report.summary[f"mean(j={j})"] = float(draws.mean())
        for r, val in enumerate(draws):
            report.rows.append({"experiment": "fixed-level", "log_n_or_t": "",
                                "j": j, "u": "", "replica": r, "value": float(val)})
    decreasing = all(x > y for x, y in zip(ks_seq, ks_seq[1:]))
    report.add_check("ks_decreasing", [round(x, 4) for x in ks_seq],
                     "strictly decreasing", decreasing)
    target = limit_mean_oracle(a, 1.0)
    report.add_check("mean_within_5pct", means[-1], f"{target:.6g}+-5%",
                     abs(means[-1] / target - 1.0) <= 0.05)
    return report


# ------------------------------------------------------------- renewal / bounds

def run_renewal(config: ExperimentConfig) -> Report:
    """Estimate the renewal and intensity grids and verify their
    Laplace-Stieltjes transforms against the defining identities."""
    from .distributions import laplace_xi, sample_w_pair

    report = Report("renewal", config.config_hash(), config.seed)
    horizon = max(config.log_n_list)
    step = horizon * config.grid_step_frac
    grid_u = renewal_numerics.estimate_U(config.params, horizon, step,
                                         config.grid_replicas,
                                         substream(config.seed, _TAG_GRID, 2))
    grid_v = renewal_numerics.estimate_V(config.params, horizon, step,
                                         config.grid_replicas,
                                         substream(config.seed, _TAG_GRID, 3))
    pair = sample_w_pair(config.params, substream(config.seed, _TAG_GRID, 4), 10 ** 6)
    for s in (0.5, 1.0, 2.0):
        phi = float(laplace_xi(config.params, s))
        target_u = 1.0 / (1.0 - phi)
        target_v = float(np.mean(np.exp(-s * pair.neglog_1mw))) / (1.0 - phi)
        got_u = grid_u.laplace_stieltjes(s)
        got_v = grid_v.laplace_stieltjes(s)
        report.summary[f"transform_u(s={s:g})"] = got_u
        report.summary[f"transform_v(s={s:g})"] = got_v
        report.add_check(f"transform_u_within_2pct(s={s:g})", got_u,
                         f"{target_u:.6g}+-2%", abs(got_u / target_u - 1.0) <= 0.02)
        report.add_check(f"transform_v_within_2pct(s={s:g})", got_v,
                         f"{target_v:.6g}+-2%", abs(got_v / target_v - 1.0) <= 0.02)
    for gf, name in ((grid_u, "renewal/U"), (grid_v, "renewal/V")):
        for t, val in zip(gf.grid(), gf.values):
            report.rows.append({"experiment": name, "log_n_or_t": float(t), "j": "",
                                "u": "", "replica": "", "value": float(val)})
    report.extras["grids"] = {"U": grid_u, "V": grid_v}
    return report


def run_verify_bounds(config: ExperimentConfig, j_max: int = 6,
                      grid_v: GridFunction | None = None) -> Report:
    """Fit the two-term residual and verify every convolution-power bound."""
    report = Report("verify-bounds", config.config_hash(), config.seed)
    horizon = max(config.log_n_list)
    step = horizon * config.grid_step_frac
    if grid_v is None:
        grid_v = renewal_numerics.estimate_V(config.params, horizon, step,
                                             config.grid_replicas,
                                             substream(config.seed, _TAG_GRID, 3))
    consts = constants(config.params)
    consts.residual_coef = renewal_numerics.fit_two_term(
        grid_v, consts.renewal_coef, consts.alpha, consts.residual_exp)
    powers = renewal_numerics.convolution_powers(grid_v, j_max)
    chain = renewal_numerics.check_vj_bound_chain(powers, consts, j_max)
    report.summary["fitted_residual_coef"] = consts.residual_coef
    report.summary["n_checked"] = chain.n_checked
    report.summary["n_violations"] = len(chain.violations)
    report.summary["violations"] = chain.violations[:20]
    report.summary["uniform_sups"] = {str(j): v for j, v in chain.uniform_sups.items()}
    report.add_check("bound_chain_zero_violations", len(chain.violations), 0,
                     chain.passed)
    if horizon >= 100.0 + step and j_max >= 4:
        sup4 = renewal_numerics.uniform_ratio_sup(powers, consts, 4, 100.0)
        report.summary["uniform_sup_j4_from_100"] = sup4
        report.add_check("uniform_sup_j4(y>=100)<=0.2", sup4, 0.2, sup4 <= 0.2)
    return report


def _occupancy_chunk(args):
    (static, seed, tag, sub, idx, size) = args
    params, log_n, max_level, neglog_t = static
    rng = substream(seed, tag, sub, idx)
    counts = np.empty((size, max_level), dtype=np.int64)
    bias = np.empty((size, max_level))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for r in range(size):
            tree = occupancy.expand_tree(params, max_level,
                                         neglog_threshold=neglog_t, rng=rng)
            res = occupancy.occupancy_poissonized(tree, log_n, rng)
            counts[r] = res.counts
            bias[r] = res.pruned_bias_bound
    return counts, bias


def run_occupancy_sim(config: ExperimentConfig) -> Report:
    """Raw Poissonized occupancy counts per level, with bias bounds."""
    report = Report("occupancy", config.config_hash(), config.seed)
    max_bias_frac = 0.0
    for i, (log_n, j) in enumerate(zip(config.log_n_list, config.j_list)):
        max_level = max(math.floor(j * u) for u in config.u_list)
        static = (config.params, log_n, max_level, config.neglog_threshold(log_n))
        results = _map_chunks(_occupancy_chunk,
                              _chunk_args(static, config.replicas, config.seed,
                                          _TAG_MAIN, i),
                              config.workers)
        counts = np.concatenate([r[0] for r in results])
        bias = np.concatenate([r[1] for r in results])
        for level in range(1, max_level + 1):
            mean_count = counts[:, level - 1].mean()
            frac = bias[:, level - 1].max() / max(mean_count, 1e-12)
            max_bias_frac = max(max_bias_frac, frac)
            report.summary[f"mean_count(log_n={log_n:g},level={level})"] = float(mean_count)
            report.summary[f"bias_frac(log_n={log_n:g},level={level})"] = float(frac)
        for r in range(counts.shape[0]):
            for level in range(1, max_level + 1):
                report.rows.append({"experiment": "occupancy/count",
                                    "log_n_or_t": log_n, "j": level, "u": "",
                                    "replica": r, "value": float(counts[r, level - 1])})
    report.add_check("bias_fraction<=0.01", max_bias_frac, 0.01,
                     max_bias_frac <= 0.01)
    return report


def run_limit_sample(config: ExperimentConfig) -> Report:
    """Emit joint limit-law samples at the configured u values."""
    report = Report("limit-sample", config.config_hash(), config.seed)
    rng = substream(config.seed, _TAG_LIMIT)
    vals, tails = stable_paths.sample_limit_integrals(
        config.params.alpha, list(config.u_list), config.replicas, rng)
    for k, u in enumerate(config.u_list):
        report.summary[f"mean(u={u:g})"] = float(vals[:, k].mean())
        report.summary[f"mean_tail_bound(u={u:g})"] = float(tails[:, k].mean())
        for r, val in enumerate(vals[:, k]):
            report.rows.append({"experiment": "limit-sample", "log_n_or_t": "",
                                "j": "", "u": u, "replica": r, "value": float(val)})
    report.add_check("tail_bounds_reported", float(tails.max()), "finite",
                     bool(np.all(np.isfinite(tails))))
    return report


# -------------------------------------------------------------------- appendix

def run_appendix_checks(seed: int = DEFAULT_SEED) -> Report:
    """Deterministic gamma-ratio sweep plus negative-moment quadrature and
    Monte Carlo cross-checks."""
    cfg_hash = hashlib.sha256(f"appendix:{seed}".encode()).hexdigest()[:16]
    report = Report("appendix", cfg_hash, seed)

    t0 = time.perf_counter()
    grid = np.arange(0.0, 50.0 + 1e-9, 0.1)
    xs, ys = np.meshgrid(grid, grid, indexing="ij")
    holds, _, _ = gamma_ratio_bound_holds(xs.ravel(), ys.ravel())
    sweep_ok = bool(np.all(holds))
    report.summary["gamma_sweep_seconds"] = round(time.perf_counter() - t0, 3)
    report.add_check("gamma_ratio_sweep", int(holds.sum()), int(holds.size), sweep_ok)

    # exponential eta: E eta^-g = Gamma(1-g)
    worst = 0.0
    for g in np.arange(0.1, 0.95, 0.1):
        est = neg_moment_via_laplace(lambda s: 1.0 / (1.0 + s), float(g))
        worst = max(worst, abs(est / gamma_fn(1.0 - g) - 1.0))
    report.summary["neg_moment_exponential_max_rel_err"] = worst
    report.add_check("neg_moment_exponential", worst, 1e-6, worst <= 1e-6)

    # deterministic eta = 1
    est_one = neg_moment_via_laplace(lambda s: math.exp(-s), 1.0)
    report.add_check("neg_moment_deterministic", est_one, 1.0,
                     abs(est_one - 1.0) <= 1e-9)

    # stable law: E Z^-alpha equals the renewal coefficient
    params = ModelParams()
    consts = constants(params)
    a = params.alpha
    lap = lambda s: math.exp(-params.c * gamma_fn(1.0 - a) * s ** a)
    est_c = neg_moment_via_laplace(lap, a)
    report.add_check("neg_moment_stable_quadrature", est_c, consts.renewal_coef,
                     abs(est_c / consts.renewal_coef - 1.0) <= 1e-6)

    rng = substream(seed, _TAG_APPENDIX)
    z = sample_positive_stable(a, params.c, rng, 10 ** 6)
    draws = z ** -a
    mc = float(draws.mean())
    se = float(draws.std() / math.sqrt(draws.size))
    report.summary["neg_moment_mc_mean"] = mc
    report.summary["neg_moment_mc_se"] = se
    report.add_check("neg_moment_stable_mc", mc, f"{consts.renewal_coef:.6g}+-4se",
                     abs(mc - consts.renewal_coef) <= 4.0 * se)
    return report


# ------------------------------------------------------------------------ emit

_CSV_HEADER = "experiment,log_n_or_t,j,u,replica,value"


def _csv_cell(x) -> str:
    if x == "" or x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return repr(x)


def emit(report: Report, fmt: str = "both", out_dir: str = ".") -> list[str]:
    """Write the report as CSV rows and/or a JSON summary.

    Output bytes depend only on the report content: identical configuration
    and seed give identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, f"{report.experiment}.csv")
        try:
            with open(path, "w") as fh:
                fh.write(_CSV_HEADER + "\n")
                for row in report.rows:
                    fh.write(",".join(_csv_cell(row[k]) for k in
                                      ("experiment", "log_n_or_t", "j", "u",
                                       "replica", "value")) + "\n")
        except OSError as exc:
            raise OSError(f"writing {path}: {exc}") from exc
        paths.append(path)
    if fmt in ("json", "both"):
        path = os.path.join(out_dir, f"{report.experiment}_summary.json")
        payload = {
            "experiment": report.experiment,
            "config_hash": report.config_hash,
            "seed": report.seed,
            "summary": report.summary,
            "checks": report.checks,
            "passed": report.passed,
        }
        try:
            with open(path, "w") as fh:
                json.dump(payload, fh, sort_keys=True, indent=2,
                          default=_json_default)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"writing {path}: {exc}") from exc
        paths.append(path)
    return paths
