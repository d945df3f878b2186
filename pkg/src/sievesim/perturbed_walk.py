"""The perturbed random walk behind the first tree level.

Walk points are T_k = S_(k-1) + eta_k where S is the random walk of
|log W| increments and eta_k = |log(1-W_k)|.  Since all increments are
strictly positive, generation can stop at the first k with S_k beyond the
horizon: every later point lies beyond it too, so truncation is exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import ModelParams, sample_w_pair

__all__ = ["WalkPath", "generate_walk", "count_N", "weighted_sum_statistic"]

_CHUNK = 32


@dataclass
class WalkPath:
    """One realization truncated at a horizon.

    s_values holds S_0 = 0 up to and including the first S_k that exceeds
    the horizon; t_values holds exactly the points T_k <= horizon in
    generation order.
    """

    horizon: float
    s_values: np.ndarray
    t_values: np.ndarray


def _assemble_walk(xis: np.ndarray, etas: np.ndarray, horizon: float) -> WalkPath | None:
    """Build a WalkPath from increment draws; None if the draws are too few
    to reach the stopping index."""
    s = np.concatenate([[0.0], np.cumsum(xis)])
    beyond = np.nonzero(s > horizon)[0]
    if beyond.size == 0:
        return None
    stop = beyond[0]  # first k with S_k > horizon
    t = s[:stop] + etas[:stop]
    return WalkPath(horizon=horizon, s_values=s[:stop + 1], t_values=t[t <= horizon])


def generate_walk(params: ModelParams, horizon: float, rng: np.random.Generator) -> WalkPath:
    """Generate all walk points up to the horizon."""
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    xis = np.empty(0)
    etas = np.empty(0)
    while True:
        pair = sample_w_pair(params, rng, _CHUNK)
        xis = np.concatenate([xis, pair.neglog_w])
        etas = np.concatenate([etas, pair.neglog_1mw])
        walk = _assemble_walk(xis, etas, horizon)
        if walk is not None:
            return walk


def count_N(path: WalkPath, t: float) -> int:
    """Number of walk points at or below t."""
    if t > path.horizon:
        raise ValueError(f"t={t} is beyond the walk horizon {path.horizon}")
    return int(np.count_nonzero(path.t_values <= t))


def weighted_sum_statistic(path: WalkPath, v_grid, t: float) -> float:
    """Sum of v_grid(t - T_r) over the walk points T_r <= t.

    v_grid is a GridFunction covering [0, t]; values between grid nodes are
    linearly interpolated.
    """
    if t > path.horizon:
        raise ValueError(f"t={t} is beyond the walk horizon {path.horizon}")
    if v_grid.horizon < t:
        raise ValueError(f"grid covers [0, {v_grid.horizon:.6g}] but t={t}")
    pts = path.t_values[path.t_values <= t]
    if pts.size == 0:
        return 0.0
    return float(np.sum(v_grid(t - pts)))
