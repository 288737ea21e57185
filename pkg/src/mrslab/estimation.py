"""Hadamard pilot design, least-squares channel estimation, and the
achievable-rate lower bound under estimation error.

The legacy transmitter and the re-scatter node send jointly orthogonal
pilots: the legacy pilots are the first nt rows of a Hadamard matrix of
order m0 (scaled by sqrt(rho_p)), the re-scatter node applies the first
K + 1 Hadamard rows of order m1 (first row all ones, standing in for the
uncontrollable direct paths), and the composite pilot is their Kronecker
product. The re-scatter symbol is held constant over each m0-symbol legacy
repetition and changes across the m1 repetitions, which is exactly the
Kronecker column order. Orthogonality is exact in integer arithmetic, so the
LS estimate reduces to one scaled correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import ChannelRealization, SystemConfig, crandn
from .numerics import as_matrix, gram_logdet_rate, kronecker

__all__ = [
    "EstimationResult",
    "PilotBlock",
    "build_pilots",
    "error_covariance_scale",
    "estimated_csi_rate_bound",
    "hadamard",
    "ls_estimate",
    "observe_pilots",
]

_MAX_HADAMARD = 1 << 14


@dataclass(frozen=True)
class PilotBlock:
    """Composite pilot construction for one configuration.

    x0p: nt x m0 legacy pilots carrying power rho_p per symbol.
    x1p: (K+1) x m1 re-scatter pilot rows, +-1 entries, first row all ones.
    psi_p: nt(K+1) x (m0 m1) composite pilot X1p kron X0p with
        psi_p psi_p† = m0 m1 rho_p I.
    n_pilot: training length Np = m0 m1 in samples.
    """

    x0p: np.ndarray
    x1p: np.ndarray
    psi_p: np.ndarray
    n_pilot: int
    rho_p: float


@dataclass(frozen=True)
class EstimationResult:
    """LS channel estimate and the scalar statistics attached to it.

    g_hat_scaled is the estimator output sqrt(beta_K) G_hat; g_hat divides
    the normalization back out. error_cov_scale is the scalar s of the
    (diagonal) covariance s I of the estimation-error-times-symbol term;
    rate_lower_bound_bits is filled by callers that also evaluate the bound.
    """

    g_hat: np.ndarray
    g_hat_scaled: np.ndarray
    error_cov_scale: float
    rate_lower_bound_bits: float | None = None


def hadamard(n: int) -> np.ndarray:
    """Hadamard matrix of power-of-two order n as an exact integer array.

    Follows the Sylvester recursion H_n = H_1 kron H_(n-1) from
    H_1 = [[1, 1], [1, -1]]; H Hᵀ = n I holds exactly in integer arithmetic
    and the first row and column are all ones.
    """
    n = int(n)
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"Hadamard order must be a power of two, got {n}")
    if n > _MAX_HADAMARD:
        raise ValueError(f"Hadamard order {n} above the supported maximum {_MAX_HADAMARD}")
    return scipy.linalg.hadamard(n, dtype=np.int64)


def build_pilots(cfg: SystemConfig) -> PilotBlock:
    """Construct the composite pilot block for `cfg`.

    Requires m0 to be a power of two >= nt (so the legacy pilots are exact
    Hadamard rows) and m1 a power of two >= K + 1; both are enforced by the
    configuration. The pilot power must be positive.
    """
    if cfg.pilot_power <= 0.0:
        raise ValueError("pilot construction requires a positive pilot power")
    m0, m1 = cfg.m0, cfg.mrs_pilot_len
    x1p = hadamard(m1)[:cfg.k + 1, :].astype(float)
    x0p = np.sqrt(cfg.pilot_power) * hadamard(m0)[:cfg.nt, :].astype(complex)
    psi_p = kronecker(x1p.astype(complex), x0p)
    return PilotBlock(x0p=x0p, x1p=x1p, psi_p=psi_p,
                      n_pilot=m0 * m1, rho_p=cfg.pilot_power)


def observe_pilots(realization: ChannelRealization, pilots: PilotBlock,
                   cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Received pilot matrix sqrt(beta_K) G Psi_p + Z_p.

    The noise entries are i.i.d. circularly symmetric complex Gaussian with
    variance sigma2, drawn from the supplied (per-trial) stream.
    """
    g = realization.g
    if g.shape[1] != pilots.psi_p.shape[0]:
        raise ValueError(f"channel has {g.shape[1]} columns but the composite pilot "
                         f"has {pilots.psi_p.shape[0]} rows")
    y = np.sqrt(cfg.beta_k) * (g @ pilots.psi_p)
    if cfg.sigma2 > 0.0:
        y = y + np.sqrt(cfg.sigma2) * crandn(rng, y.shape)
    return y


def ls_estimate(y_p, pilots: PilotBlock, cfg: SystemConfig) -> EstimationResult:
    """Least-squares channel estimate from the received pilots.

    With orthogonal composite pilots the LS solution is
    sqrt(beta_K) G_hat = Y_p Psi_p† / (m0 m1 rho_p); the unnormalized G_hat
    divides sqrt(beta_K) back out. The estimator is unbiased and its error is
    Z_p Psi_p† / (m0 m1 rho_p), white across receive antennas.
    """
    y_p = as_matrix(y_p, "y_p")
    if y_p.shape[1] != pilots.n_pilot:
        raise ValueError(f"y_p must have {pilots.n_pilot} columns, got {y_p.shape[1]}")
    g_hat_scaled = y_p @ pilots.psi_p.conj().T / (pilots.n_pilot * pilots.rho_p)
    g_hat = g_hat_scaled / np.sqrt(cfg.beta_k)
    return EstimationResult(g_hat=g_hat, g_hat_scaled=g_hat_scaled,
                            error_cov_scale=error_covariance_scale(cfg))


def error_covariance_scale(cfg: SystemConfig) -> float:
    """Scalar s of the error covariance s I_nr of the estimation-error-times-
    symbol term: s = nt (K+1) rho_d sigma2 / (rho_p m0 m1)."""
    if cfg.pilot_power <= 0.0:
        raise ValueError("error_covariance_scale requires a positive pilot power")
    return (cfg.nt * (cfg.k + 1) * cfg.data_power * cfg.sigma2
            / (cfg.pilot_power * cfg.pilot_len))


def estimated_csi_rate_bound(g_hat, cfg: SystemConfig, include_nt_factor: bool = True,
                             err_scale: float | None = None,
                             n_pilot: int | None = None) -> float:
    """Achievable-rate lower bound when the receiver only holds the LS
    estimate g_hat.

    Treating the estimation-error-times-symbol term (covariance s I) as
    additional Gaussian noise gives
    (N - Np)/N * log2 det(I + (gamma beta_K sigma2 / (nt (sigma2 + s)))
    G_hat G_hat†); the scalar noise-plus-error matrix means no inversion is
    needed. The 1/nt (per-antenna power split) keeps the bound consistent
    with the exact sum rate in the perfect-training limit (s -> 0, Np -> 0);
    `include_nt_factor=False` drops it, for comparison only.

    `err_scale` and `n_pilot` override the configuration-derived s and Np,
    which is how the perfect-CSI consistency limit is exercised.
    """
    g_hat = as_matrix(g_hat, "g_hat")
    s = error_covariance_scale(cfg) if err_scale is None else float(err_scale)
    if s < 0.0:
        raise ValueError(f"error scale must be >= 0, got {s}")
    n_pilot = cfg.pilot_len if n_pilot is None else int(n_pilot)
    if n_pilot >= cfg.n_coherence:
        raise ValueError(f"pilot length {n_pilot} must be below the coherence "
                         f"length {cfg.n_coherence}")
    if cfg.sigma2 <= 0.0:
        raise ValueError("the estimated-CSI bound requires sigma2 > 0")
    c = cfg.gamma * cfg.beta_k * cfg.sigma2 / (cfg.sigma2 + s)
    if include_nt_factor:
        c /= cfg.nt
    frac = (cfg.n_coherence - n_pilot) / cfg.n_coherence
    return frac * gram_logdet_rate(g_hat, c)
