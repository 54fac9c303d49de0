"""Monte-Carlo estimation over renewal trajectories of measurement times.

Given the measurement times ``t_1 < t_2 < ...`` of one trajectory, the
survival at time ``t`` with ``n`` measurements before it is

    p_hat(t) = p1(t - t_n) * prod_{j <= n} p1(t_j - t_{j-1}),

because every positive measurement collapses the state back onto the
measured one.  The product estimator averages ``p_hat``; the Bernoulli
estimator replaces every factor by a coin flip with that probability.

Trajectories are processed in fixed-size blocks.  Block ``b`` draws from
``renewal.stream(master_seed, b)``, so results depend only on the
configuration, never on the number of worker threads.  Block statistics are
merged in a fixed pairwise tree (Chan et al. update of mean and sum of
squared deviations).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .analytic import SurvivalCurve, _system_metadata
from .liouville import SpectralSurvival, SystemModel, generator
from .renewal import (
    CountDistribution,
    Equidistant,
    RenewalModel,
    count_renewals,
    describe,
    sample_intervals,
    stream,
)

ESTIMATORS = ("product", "bernoulli")
P1_MODES = ("interpolated", "direct")
# dense-grid step for the memoized p1: 1 / (POINTS_PER_UNIT * fastest rate)
POINTS_PER_UNIT = 20
MAX_CHUNK = 256


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo settings.

    Attributes
    ----------
    n_trajectories : int
    master_seed : int
        64-bit master seed; block ``b`` uses ``stream(master_seed, b)``.
    times : array_like
        Non-negative evaluation grid.
    estimator : {'product', 'bernoulli'}
    block_size : int
        Trajectories per random stream and per work unit.
    p1 : {'interpolated', 'direct'}
        Memoized cubic interpolation of the unmeasured survival, or direct
        spectral evaluation (validation).
    threads : int, optional
        Worker threads; defaults to ``ZENO_THREADS`` or 1.
    """

    n_trajectories: int = 100_000
    master_seed: int = 0
    times: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 10.0, 101))
    estimator: str = "product"
    block_size: int = 4096
    p1: str = "interpolated"
    threads: Optional[int] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("times must be a non-empty 1-d grid")
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise ValueError("times must be non-negative and strictly increasing")
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.p1 not in P1_MODES:
            raise ValueError(f"p1 must be one of {P1_MODES}")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    @property
    def n_blocks(self) -> int:
        return -(-self.n_trajectories // self.block_size)

    def block_length(self, b: int) -> int:
        return min(self.block_size, self.n_trajectories - b * self.block_size)

    def to_dict(self) -> dict:
        return {
            "n_trajectories": self.n_trajectories,
            "master_seed": int(self.master_seed),
            "estimator": self.estimator,
            "block_size": self.block_size,
            "p1": self.p1,
            "stream_split": "SeedSequence(master_seed, spawn_key=(block,)) -> PCG64",
        }


def worker_count(cfg_threads: Optional[int] = None) -> int:
    if cfg_threads is not None:
        return max(1, int(cfg_threads))
    env = os.environ.get("ZENO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ZENO_THREADS must be an integer, got {env!r}") from None
    return 1


class _P1:
    """Unmeasured survival, clipped to [0, 1], memoized on a dense grid."""

    def __init__(self, model: SystemModel, renewal: RenewalModel, t_max: float, mode: str):
        self._exact = SpectralSurvival(model)
        self.t_max = t_max
        self.mode = mode
        if mode == "interpolated":
            fastest = max(0.5 * float(np.max(np.abs(np.linalg.eigvals(generator(model))))), renewal.rate, 1e-300)
            h = 1.0 / (POINTS_PER_UNIT * fastest)
            n = max(8, int(math.ceil(t_max / h)) + 1)
            grid = np.linspace(0.0, max(t_max, 1e-300), n)
            self._spline = CubicSpline(grid, self._exact(grid))

    def __call__(self, t):
        t = np.minimum(t, self.t_max)  # factors past the horizon never enter an estimate
        v = self._spline(t) if self.mode == "interpolated" else self._exact(t)
        return np.clip(v, 0.0, 1.0)


def _chunk_size(renewal: RenewalModel, t_max: float) -> int:
    expected = renewal.rate * t_max
    return int(min(MAX_CHUNK, max(8, math.ceil(1.2 * expected) + 8)))


def simulate_block(model: SystemModel, renewal: RenewalModel, cfg: McConfig, b: int, p1=None) -> np.ndarray:
    """Per-trajectory estimates for block ``b``; shape ``(block length, len(times))``."""
    times = cfg.times
    t_max = float(times[-1])
    p1 = p1 if p1 is not None else _P1(model, renewal, t_max, cfg.p1)
    rng = stream(int(cfg.master_seed), b)
    n = cfg.block_length(b)
    G = times.size
    out = np.full((n, G), np.nan)
    last = np.zeros(n)  # time of the latest measurement
    prod = np.ones(n)  # product of factors up to it
    next_g = np.zeros(n, dtype=np.int64)  # first unresolved grid index per trajectory
    bern = cfg.estimator == "bernoulli"
    C = _chunk_size(renewal, t_max)
    active = np.arange(n)
    while active.size:
        m = active.size
        tau = sample_intervals(renewal, rng, (m, C))
        A = last[active, None] + np.cumsum(tau, axis=1)
        f = p1(tau)
        if bern:
            f = (rng.random((m, C)) < f).astype(float)
        CP = prod[active, None] * np.cumprod(f, axis=1)
        # k[i, g] = number of this chunk's measurements at or before times[g]
        merged = np.concatenate([A, np.broadcast_to(times, (m, G))], axis=1)
        order = np.argsort(merged, axis=1, kind="stable")
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(C + G)[None, :], axis=1)
        k = rank[:, C:] - np.arange(G)[None, :]
        resolved = k < C
        newly = resolved & (np.arange(G)[None, :] >= next_g[active, None])
        if np.any(newly):
            km1 = np.maximum(k - 1, 0)
            prev_t = np.where(k > 0, np.take_along_axis(A, km1, axis=1), last[active, None])
            prev_p = np.where(k > 0, np.take_along_axis(CP, km1, axis=1), prod[active, None])
            rows, cols = np.nonzero(newly)
            dt = times[cols] - prev_t[rows, cols]
            g = p1(dt)
            if bern:
                g = (rng.random(g.size) < g).astype(float)
            out[active[rows], cols] = prev_p[rows, cols] * g
            next_g[active] = np.maximum(next_g[active], resolved.sum(axis=1))
        last[active] = A[:, -1]
        prod[active] = CP[:, -1]
        active = active[A[:, -1] <= t_max]
    return out


def _block_stats(x: np.ndarray):
    n = x.shape[0]
    mean = x.mean(axis=0)
    m2 = ((x - mean) ** 2).sum(axis=0)
    return n, mean, m2


def _combine(a, b):
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * (nb / n), qa + qb + d * d * (na * nb / n)


def pairwise_reduce(stats: list):
    """Merge block statistics in a fixed pairwise tree over block order."""
    if not stats:
        raise ValueError("nothing to reduce")
    level = list(stats)
    while len(level) > 1:
        nxt = [_combine(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def _map_blocks(fn, n_blocks: int, threads: int):
    if threads <= 1 or n_blocks == 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=min(threads, n_blocks)) as ex:
        return list(ex.map(fn, range(n_blocks)))


def simulate_survival(model: SystemModel, renewal: RenewalModel, cfg: McConfig) -> SurvivalCurve:
    """Trajectory-averaged survival with standard errors.

    Equal configurations give bit-identical curves regardless of the worker
    count.
    """
    t_max = float(cfg.times[-1])
    p1 = _P1(model, renewal, t_max, cfg.p1)

    def work(b):
        return _block_stats(simulate_block(model, renewal, cfg, b, p1))

    n, mean, m2 = pairwise_reduce(_map_blocks(work, cfg.n_blocks, worker_count(cfg.threads)))
    stderr = np.sqrt(m2 / (n - 1) / n) if n > 1 else np.zeros_like(mean)
    meta = {
        "system": _system_metadata(model),
        "renewal": describe(renewal),
        "method": "monte-carlo",
        "mc": cfg.to_dict(),
    }
    if isinstance(renewal, Equidistant):
        meta["deterministic"] = True
    return SurvivalCurve(cfg.times.copy(), mean, stderr, "monte-carlo", meta)


def simulate_counts(renewal: RenewalModel, t: float, cfg: McConfig, n_max: int = 64) -> CountDistribution:
    """Histogram of renewals in ``(0, t)`` with multinomial standard errors."""
    if not t > 0:
        raise ValueError("horizon t must be positive")

    def work(b):
        c = count_renewals(renewal, t, stream(int(cfg.master_seed), b), cfg.block_length(b))
        return np.bincount(np.minimum(c, n_max + 1), minlength=n_max + 2)

    hist = np.sum(_map_blocks(work, cfg.n_blocks, worker_count(cfg.threads)), axis=0)
    N = cfg.n_trajectories
    probs = hist / N
    se = np.sqrt(probs * (1.0 - probs) / N)
    return CountDistribution(t, probs[: n_max + 1], float(probs[n_max + 1]), se[: n_max + 1])
