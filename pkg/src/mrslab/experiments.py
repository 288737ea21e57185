"""Seeded, parallel Monte Carlo engine and the canonical experiments.

Trials are partitioned into fixed-size blocks that never depend on the worker
count; every trial draws from its own counter-based substreams keyed by
(seed, trial index, stream label), and block partial sums are combined with
numpy's pairwise summation in a fixed tree order. Together these make every
result bit-identical for any number of workers.

Three experiments are provided: the sum-rate sweep over an SNR grid (exact
sum rate, stand-alone legacy baseline, re-scatter stream rates, the
estimated-CSI lower bound, and the large-nr limit), the achievable rate
region (vertices A-D plus the stand-alone reference), and the convergence of
the exact sum rate to the large-array limits along a geometric antenna grid.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import channel, estimation, rates, receiver
from .channel import SystemConfig

__all__ = [
    "BLOCK_TRIALS",
    "EXPERIMENTS",
    "LAR_GROW_DIMS",
    "LarPoint",
    "RateRegionPoint",
    "REGION_VERTICES",
    "Scenario",
    "SUM_RATE_METRICS",
    "SweepPoint",
    "run",
    "run_lar_convergence",
    "run_rate_region",
    "run_sum_rate_sweep",
]

EXPERIMENTS = ("sum_rate_sweep", "rate_region", "lar_convergence", "estimation_sweep")
SUM_RATE_METRICS = ("sum_rate", "legacy_alone", "mrs_wpc", "mrs_gauss_bound",
                    "est_lower_bound", "lar_nr")
_REGION_COLUMNS = ("legacy_sic", "mrs_wpc", "sum_rate", "joint_known_x1", "legacy_alone")
REGION_VERTICES = ("A", "B", "C", "D")
LAR_GROW_DIMS = ("nr", "nt")

# Trials per reduction block; fixed so block boundaries (and therefore the
# reduction tree) never depend on the worker count.
BLOCK_TRIALS = 512

_LAR_DIM_LIMIT = 1 << 13


@dataclass(frozen=True)
class Scenario:
    """One experiment specification: configuration, SNR grid, trial count,
    master seed, and worker count (None or 0 selects all available cores).

    `grow_dim` and `grow_grid` only matter for the convergence experiment.
    """

    cfg: SystemConfig
    snr_grid_db: tuple[float, ...] = (20.0,)
    trials: int = 20000
    seed: int = 0
    experiment: str = "sum_rate_sweep"
    workers: int | None = None
    grow_dim: str = "nr"
    grow_grid: tuple[int, ...] = (64, 256, 1024, 4096)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if len(self.snr_grid_db) < 1:
            raise ValueError("snr_grid_db must not be empty")
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose one of {EXPERIMENTS}")
        if self.grow_dim not in LAR_GROW_DIMS:
            raise ValueError(f"grow_dim must be one of {LAR_GROW_DIMS}, got {self.grow_dim!r}")


@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    metric: str
    mean_bits: float
    stderr_bits: float


@dataclass(frozen=True)
class RateRegionPoint:
    """One vertex of the achievable rate region at one SNR point.

    `vertex` is A (re-scatter stream alone), B (legacy under MMSE-SIC plus
    the re-scatter stream), C (exact sum rate, all on the x axis), D (legacy
    under MMSE-SIC alone), or `legacy_alone` for the stand-alone reference
    row.
    """

    snr_db: float
    vertex: str
    legacy_bits: float
    legacy_stderr: float
    mrs_bits: float
    mrs_stderr: float


@dataclass(frozen=True)
class LarPoint:
    grow_dim: str
    value: int
    exact_bits: float
    lar_bits: float
    rel_gap: float


def _resolve_workers(workers: int | None) -> int:
    if workers is None or workers == 0:
        return max(1, os.cpu_count() or 1)
    if workers < 0:
        raise ValueError(f"workers must be >= 1 (or 0/None for auto), got {workers}")
    return workers


def _block_ranges(trials: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + BLOCK_TRIALS, trials)) for lo in range(0, trials, BLOCK_TRIALS)]


def _run_blocks(worker, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(worker, tasks, chunksize=1))


def _reduce_moments(parts, trials: int):
    """Combine per-block (sum, sum of squares) into means and standard errors.

    Blocks are stacked and summed along the block axis, so the reduction tree
    is a fixed function of the block layout alone.
    """
    sums = np.sum(np.stack([p[0] for p in parts]), axis=0)
    sumsq = np.sum(np.stack([p[1] for p in parts]), axis=0)
    mean = sums / trials
    if trials > 1:
        var = np.maximum(sumsq - trials * mean ** 2, 0.0) / (trials - 1)
    else:
        var = np.zeros_like(mean)
    return mean, np.sqrt(var / trials)


# ---------------------------------------------------------------------------
# Sum-rate sweep
# ---------------------------------------------------------------------------

def _sum_rate_trial(cfgs, pilots, seed: int, trial: int) -> np.ndarray:
    """One trial of the sweep: a (n_snr, n_metrics) array of rates in bits.

    The channel, the unit-power symbol draw, and the pilot noise are drawn
    once per trial (streams "channel", "symbols", "pilot_noise") and reused
    across the SNR grid as common random numbers; only the analytic power
    scalings change along the grid.
    """
    base = cfgs[0]
    real = channel.sample_realization(base, channel.substream(seed, trial, "channel"))
    sym = channel.sample_symbols(base, channel.substream(seed, trial, "symbols"))
    rng_noise = channel.substream(seed, trial, "pilot_noise")
    z_p = np.sqrt(base.sigma2) * channel.crandn(rng_noise, (base.nr, base.pilot_len))

    g1 = real.keyholes[0].g_k
    g_t = [kh.g_t for kh in real.keyholes]
    out = np.empty((len(cfgs), len(SUM_RATE_METRICS)))
    for i, cfg in enumerate(cfgs):
        x0 = np.sqrt(cfg.data_power) * sym.u
        gamma1 = receiver.mrs_postsic_snr(g1, x0, cfg)
        y_p = np.sqrt(cfg.beta_k) * (real.g @ pilots[i].psi_p) + z_p
        est = estimation.ls_estimate(y_p, pilots[i], cfg)
        out[i, 0] = rates.sum_rate(real, cfg)
        out[i, 1] = rates.legacy_alone_rate(real.g0, cfg)
        out[i, 2] = receiver.mrs_rate_wpc(gamma1)
        out[i, 3] = receiver.mrs_rate_gaussian(gamma1)
        out[i, 4] = estimation.estimated_csi_rate_bound(est.g_hat, cfg)
        out[i, 5] = rates.lar_rx_limit(g_t, cfg)
    return out


def _sum_rate_block(task):
    cfg, grid, seed, lo, hi = task
    cfgs = [replace(cfg, gamma_db=g) for g in grid]
    pilots = [estimation.build_pilots(c) for c in cfgs]
    vals = np.empty((hi - lo, len(grid), len(SUM_RATE_METRICS)))
    for r, trial in enumerate(range(lo, hi)):
        vals[r] = _sum_rate_trial(cfgs, pilots, seed, trial)
    return vals.sum(axis=0), np.square(vals).sum(axis=0)


def run_sum_rate_sweep(scenario: Scenario) -> list[SweepPoint]:
    """Mean and standard error of every sweep metric on the SNR grid.

    Rows are ordered by ascending SNR, then by the SUM_RATE_METRICS order;
    stderr is the sample standard deviation over trials divided by
    sqrt(trials).
    """
    cfg = scenario.cfg
    if cfg.k != 1:
        raise ValueError(f"the sum-rate sweep is defined for K = 1, got K={cfg.k}")
    grid = tuple(sorted(scenario.snr_grid_db))
    workers = _resolve_workers(scenario.workers)
    tasks = [(cfg, grid, scenario.seed, lo, hi) for lo, hi in _block_ranges(scenario.trials)]
    parts = _run_blocks(_sum_rate_block, tasks, workers)
    mean, stderr = _reduce_moments(parts, scenario.trials)
    return [SweepPoint(snr_db=s, metric=m, mean_bits=float(mean[i, j]),
                       stderr_bits=float(stderr[i, j]))
            for i, s in enumerate(grid) for j, m in enumerate(SUM_RATE_METRICS)]


# ---------------------------------------------------------------------------
# Rate region
# ---------------------------------------------------------------------------

def _region_trial(cfgs, seed: int, trial: int) -> np.ndarray:
    """One trial of the region experiment: (n_snr, 5) raw rate columns."""
    base = cfgs[0]
    real = channel.sample_realization(base, channel.substream(seed, trial, "channel"))
    sym = channel.sample_symbols(base, channel.substream(seed, trial, "symbols"))
    g1 = real.keyholes[0].g_k
    out = np.empty((len(cfgs), len(_REGION_COLUMNS)))
    for i, cfg in enumerate(cfgs):
        x0 = np.sqrt(cfg.data_power) * sym.u
        gamma1 = receiver.mrs_postsic_snr(g1, x0, cfg)
        out[i, 0] = receiver.legacy_sic_rate(real.g0, g1, cfg).legacy_rate_bits
        out[i, 1] = receiver.mrs_rate_wpc(gamma1)
        out[i, 2] = rates.sum_rate(real, cfg)
        out[i, 3] = receiver.joint_known_x1_rate(real.g0, g1, sym.x1[0], cfg)
        out[i, 4] = rates.legacy_alone_rate(real.g0, cfg)
    return out


def _region_block(task):
    cfg, grid, seed, lo, hi = task
    cfgs = [replace(cfg, gamma_db=g) for g in grid]
    vals = np.empty((hi - lo, len(grid), len(_REGION_COLUMNS)))
    for r, trial in enumerate(range(lo, hi)):
        vals[r] = _region_trial(cfgs, seed, trial)
    return vals.sum(axis=0), np.square(vals).sum(axis=0)


def run_rate_region(scenario: Scenario) -> tuple[list[RateRegionPoint], dict]:
    """Rate-region vertices per SNR point plus a segment description.

    Per SNR: A = (0, E[R_wpc]) is the re-scatter stream alone, B =
    (E[R_sic], E[R_wpc]) adds the legacy MMSE-SIC rate with the re-scatter
    columns as interference, C = (E[R_sum], 0) places the exact sum rate on
    the legacy axis (the rate the legacy system attains when the re-scatter
    symbol is a known pseudo-random sequence), and D = (E[R_sic], 0) is the
    legacy rate with the re-scatter symbol treated as noise. The boundary is
    the polyline A-B-C; segment B-C is attained by time sharing. A
    `legacy_alone` row carries the stand-alone (K = 0, beta_0 = 1/nr)
    reference.

    The returned metadata records the mean known-x1 joint rate per SNR for
    comparison with vertex C.
    """
    cfg = scenario.cfg
    if cfg.k != 1:
        raise ValueError(f"the rate region is defined for K = 1, got K={cfg.k}")
    grid = tuple(sorted(scenario.snr_grid_db))
    workers = _resolve_workers(scenario.workers)
    tasks = [(cfg, grid, scenario.seed, lo, hi) for lo, hi in _block_ranges(scenario.trials)]
    parts = _run_blocks(_region_block, tasks, workers)
    mean, stderr = _reduce_moments(parts, scenario.trials)

    points: list[RateRegionPoint] = []
    joint_means = {}
    for i, s in enumerate(grid):
        r0, wpc, rsum, joint, alone = (float(v) for v in mean[i])
        r0_se, wpc_se, rsum_se, joint_se, alone_se = (float(v) for v in stderr[i])
        points.append(RateRegionPoint(s, "A", 0.0, 0.0, wpc, wpc_se))
        points.append(RateRegionPoint(s, "B", r0, r0_se, wpc, wpc_se))
        points.append(RateRegionPoint(s, "C", rsum, rsum_se, 0.0, 0.0))
        points.append(RateRegionPoint(s, "D", r0, r0_se, 0.0, 0.0))
        points.append(RateRegionPoint(s, "legacy_alone", alone, alone_se, 0.0, 0.0))
        joint_means[s] = {"mean_bits": joint, "stderr_bits": joint_se}
    info = {
        "segments": "boundary polyline A-B-C; segment B-C attained by time sharing",
        "vertex_d": "legacy rate with the re-scatter symbol treated as noise, "
                    "rendered at (E[R_sic], 0)",
        "joint_known_x1": joint_means,
    }
    return points, info


# ---------------------------------------------------------------------------
# Large-array convergence
# ---------------------------------------------------------------------------

def _grown_config(cfg: SystemConfig, grow: str, dim: int) -> SystemConfig:
    """Rescale one antenna dimension, keeping the pilot fields feasible.

    The convergence experiment never builds pilots, but the configuration
    invariants (m0 >= nt as a power of two, N > m0 m1) must keep holding for
    the grown dimension.
    """
    if grow == "nr":
        return replace(cfg, nr=dim)
    m0 = max(cfg.m0, channel.next_pow2(dim))
    m1 = cfg.mrs_pilot_len
    n_coh = max(cfg.n_coherence, 2 * m0 * m1)
    return replace(cfg, nt=dim, m0=m0, n_coherence=n_coh)


def _lar_block(task):
    cfg, grow, fixed, seed, lo, hi = task
    vals = np.empty((hi - lo, 1))
    for r, trial in enumerate(range(lo, hi)):
        rng = channel.substream(seed, trial, "channel")
        g0 = channel.sample_direct(cfg, rng)
        keyholes = []
        for k in range(cfg.k):
            if grow == "nr":
                g_t, g_r = fixed[k], channel.crandn(rng, (cfg.nr,))
            else:
                g_t, g_r = channel.crandn(rng, (cfg.nt,)), fixed[k]
            keyholes.append(channel.keyhole_from_vectors(cfg, g_t, g_r))
        real = channel.assemble_composite(g0, keyholes)
        vals[r, 0] = rates.sum_rate(real, cfg)
    return vals.sum(axis=0), np.square(vals).sum(axis=0)


def run_lar_convergence(scenario: Scenario) -> list[LarPoint]:
    """Exact sum rate along a growing antenna grid against the matching limit.

    The keyhole-side vectors of the limit (g_tk when nr grows, g_rk when nt
    grows) are drawn once from the dedicated stream (seed, 0, "lar_fixed")
    and held fixed for the whole experiment, so the finite-size means
    converge to a single limit value; the direct channel and the free hop are
    redrawn every trial.
    """
    cfg, grow = scenario.cfg, scenario.grow_dim
    for dim in scenario.grow_grid:
        if dim < 1 or dim > _LAR_DIM_LIMIT:
            raise ValueError(f"grown dimension {dim} outside [1, {_LAR_DIM_LIMIT}]")
    if grow == "nt" and cfg.nr < cfg.k:
        raise ValueError(f"the nt limit requires nr >= K, got nr={cfg.nr}, K={cfg.k}")
    workers = _resolve_workers(scenario.workers)

    rng_fixed = channel.substream(scenario.seed, 0, "lar_fixed")
    fixed_len = cfg.nt if grow == "nr" else cfg.nr
    fixed = tuple(channel.crandn(rng_fixed, (fixed_len,)) for _ in range(cfg.k))

    points: list[LarPoint] = []
    for dim in sorted(scenario.grow_grid):
        cfg_d = _grown_config(cfg, grow, dim)
        if grow == "nr":
            lar = rates.lar_rx_limit(fixed, cfg_d)
        else:
            lar = rates.lar_tx_limit(fixed, cfg_d).exact_bits
        tasks = [(cfg_d, grow, fixed, scenario.seed, lo, hi)
                 for lo, hi in _block_ranges(scenario.trials)]
        parts = _run_blocks(_lar_block, tasks, workers)
        mean, _ = _reduce_moments(parts, scenario.trials)
        exact = float(mean[0])
        points.append(LarPoint(grow_dim=grow, value=dim, exact_bits=exact,
                               lar_bits=float(lar),
                               rel_gap=abs(exact - lar) / lar))
    return points


def run(scenario: Scenario):
    """Dispatch a scenario to its experiment runner.

    `estimation_sweep` shares the sum-rate sweep engine (the sweep already
    reports the estimated-CSI bound alongside the perfect-CSI curves).
    """
    if scenario.experiment in ("sum_rate_sweep", "estimation_sweep"):
        return run_sum_rate_sweep(scenario)
    if scenario.experiment == "rate_region":
        return run_rate_region(scenario)
    return run_lar_convergence(scenario)
