"""Joint decoding chain for the single-antenna re-scatter case (K = 1).

The receiver first decodes the legacy streams with a linear MMSE filter and
successive interference cancellation while the re-scatter symbol is still
unknown (its nt channel columns stay in the interference set), then removes
the decoded legacy signal and matched-filters the remaining scalar stream.
The re-scatter stream uses constant-envelope (unit-modulus) modulation, whose
scalar-channel rate is the envelope-pdf integral evaluated here in nats and
reported in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0e as _i0e

from .channel import SystemConfig
from .numerics import (
    LN2,
    as_matrix,
    as_vector,
    bessel_i0_scaled,
    gram_logdet_rate,
    integrate_semi_infinite,
    mmse_residual_sinr,
)

__all__ = [
    "SicResult",
    "decoding_order",
    "joint_decode",
    "joint_known_x1_rate",
    "legacy_sic_rate",
    "mrs_postsic_snr",
    "mrs_rate_gaussian",
    "mrs_rate_wpc",
    "wyner_envelope_pdf",
]

# Below this SNR the envelope-integral rate is replaced by its small-SNR
# expansion gamma1 nats (error O(gamma1^2) < the quadrature tolerance),
# avoiding the cancellation between the integral and log(2 gamma1 / e).
WPC_SMALL_SNR = 1e-4


@dataclass(frozen=True)
class SicResult:
    """Outcome of the MMSE-SIC decoding chain.

    `order` is the legacy stream decoding order (0-based indices),
    `per_stream_sinr` the residual SINR of each stage in that order, and
    `legacy_rate_bits` their sum-log rate. The re-scatter fields are None
    until the post-SIC stage has been evaluated (see `joint_decode`).
    """

    order: tuple[int, ...]
    per_stream_sinr: tuple[float, ...]
    legacy_rate_bits: float
    gamma1: float | None = None
    mrs_rate_wpc_bits: float | None = None
    mrs_rate_gaussian_bits: float | None = None


def decoding_order(g0) -> tuple[int, ...]:
    """Legacy stream order: descending column norm, ties by ascending index."""
    g0 = as_matrix(g0, "g0")
    norms = np.sum(np.abs(g0) ** 2, axis=0)
    return tuple(int(j) for j in np.argsort(-norms, kind="stable"))


def legacy_sic_rate(g0, g1, cfg: SystemConfig, order=None, greedy: bool = False) -> SicResult:
    """Legacy-system rate under MMSE-SIC with the re-scatter columns as noise.

    At stage i the effective matrix stacks the currently decoded column
    first, then the still-undecoded legacy columns, then all nt columns of
    g1 (the re-scatter symbol is unknown, so its columns never leave the
    interference set); the stage SINR is the residual MMSE SINR of that first
    column at c = beta_1 gamma / nt.

    `order` overrides the default norm-sorted decoding order; `greedy`
    instead picks the highest-SINR undecoded stream at every stage.
    """
    g0 = as_matrix(g0, "g0")
    g1 = as_matrix(g1, "g1")
    if cfg.k != 1:
        raise ValueError(f"legacy_sic_rate is defined for K = 1, got K={cfg.k}")
    if g1.shape != g0.shape:
        raise ValueError(f"g0 and g1 must share a shape, got {g0.shape} and {g1.shape}")
    nt = g0.shape[1]
    c = cfg.gamma * cfg.beta_k / cfg.nt

    if order is not None and greedy:
        raise ValueError("pass either an explicit order or greedy=True, not both")
    if order is None and not greedy:
        order = decoding_order(g0)
    if order is not None:
        order = tuple(int(j) for j in order)
        if sorted(order) != list(range(nt)):
            raise ValueError(f"order must be a permutation of 0..{nt - 1}, got {order}")

    chosen: list[int] = []
    sinrs: list[float] = []
    remaining = list(range(nt))
    for stage in range(nt):
        if greedy:
            best_j, best_s = None, -1.0
            for j in remaining:
                rest = [r for r in remaining if r != j]
                h = np.hstack([g0[:, [j]], g0[:, rest], g1])
                s = mmse_residual_sinr(h, c)
                if s > best_s:
                    best_j, best_s = j, s
            j, s = best_j, best_s
        else:
            j = order[stage]
            rest = list(order[stage + 1:])
            h = np.hstack([g0[:, [j]], g0[:, rest], g1])
            s = mmse_residual_sinr(h, c)
        chosen.append(j)
        sinrs.append(s)
        remaining.remove(j)

    rate = float(sum(np.log2(1.0 + s) for s in sinrs))
    return SicResult(order=tuple(chosen), per_stream_sinr=tuple(sinrs),
                     legacy_rate_bits=rate)


def mrs_postsic_snr(g1, x0, cfg: SystemConfig, include_nt_factor: bool = True) -> float:
    """Post-SIC matched-filter SNR of the re-scatter stream,
    beta_1 x0† g1† g1 x0 / (nt sigma2).

    With `include_nt_factor=False` the 1/nt is dropped, giving the SNR
    beta_1 ||g1 x0||^2 / sigma2 of the literal observation
    y1 = sqrt(beta_1) (g1 x0) x1 + z; the 1/nt form is the default.
    """
    g1 = as_matrix(g1, "g1")
    x0 = as_vector(x0, "x0")
    if x0.shape[0] != g1.shape[1]:
        raise ValueError(f"x0 must have length {g1.shape[1]}, got {x0.shape[0]}")
    if cfg.sigma2 <= 0.0:
        raise ValueError("the post-SIC SNR requires sigma2 > 0")
    energy = float(np.vdot(g1 @ x0, g1 @ x0).real)
    snr = cfg.beta_k * energy / cfg.sigma2
    if include_nt_factor:
        snr /= cfg.nt
    return snr


def mrs_rate_gaussian(gamma1: float) -> float:
    """Upper bound log2(1 + gamma1) on the re-scatter stream rate with a
    Gaussian codebook."""
    gamma1 = float(gamma1)
    if gamma1 < 0.0:
        raise ValueError(f"gamma1 must be >= 0, got {gamma1}")
    return float(np.log2(1.0 + gamma1))


def wyner_envelope_pdf(u, gamma1: float):
    """Received-envelope pdf 2 u gamma1 e^(-gamma1 (1 + u^2)) I0(2 u gamma1).

    This is the Rician envelope density of a unit-modulus signal in complex
    Gaussian noise of variance 1/gamma1; it integrates to one. Evaluated as
    2 u gamma1 e^(-gamma1 (1 - u)^2) [e^(-2 u gamma1) I0(2 u gamma1)] so it
    stays finite for gamma1 up to 1e6 and beyond.
    """
    u = np.asarray(u, dtype=float)
    return 2.0 * u * gamma1 * np.exp(-gamma1 * (1.0 - u) ** 2) * bessel_i0_scaled(2.0 * u * gamma1)


def _wpc_u_max(gamma1: float) -> float:
    # The envelope concentrates at u ~ 1 with standard deviation
    # ~ 1/sqrt(2 gamma1); 1 + 12/sqrt(gamma1) + 12/gamma1 covers 12 standard
    # deviations even at small gamma1, so the neglected tail mass is below
    # exp(-72) ~ 5e-32.
    return 1.0 + 12.0 / math.sqrt(gamma1) + 12.0 / gamma1


def mrs_rate_wpc(gamma1: float, tol: float = 1e-9) -> float:
    """Rate of the unit-modulus (constant-envelope polyphase) re-scatter
    stream on the scalar post-SIC channel, in bits.

    Evaluates -Int f(u) ln(f(u)/u) du + ln(2 gamma1 / e) in nats, where f is
    the received-envelope pdf, then converts to bits. ln(f/u) is expanded as
    ln(2 gamma1) - gamma1 (1 - u)^2 + ln(e^(-2 u gamma1) I0(2 u gamma1)) so
    no term overflows. Below gamma1 = 1e-4 the small-SNR value gamma1 nats is
    returned directly. The result is nonnegative and below log2(1 + gamma1).
    """
    gamma1 = float(gamma1)
    if not np.isfinite(gamma1) or gamma1 < 0.0:
        raise ValueError(f"gamma1 must be finite and >= 0, got {gamma1}")
    if gamma1 == 0.0:
        return 0.0
    if gamma1 < WPC_SMALL_SNR:
        return gamma1 / LN2
    log_2g = math.log(2.0 * gamma1)

    def entropy_integrand(u):
        # shares one scaled-Bessel evaluation between f and ln(f/u)
        scaled = _i0e(2.0 * u * gamma1)
        gauss = gamma1 * (1.0 - u) ** 2
        f = 2.0 * u * gamma1 * np.exp(-gauss) * scaled
        return f * (log_2g - gauss + np.log(scaled))

    value = integrate_semi_infinite(entropy_integrand, tol, u_max=_wpc_u_max(gamma1))
    nats = -value + log_2g - 1.0
    return max(0.0, nats / LN2)


def joint_known_x1_rate(g0, g1, x1: complex, cfg: SystemConfig) -> float:
    """Rate of the legacy system on the composite matrix g0 + x1 g1 when the
    re-scatter symbol x1 is known at the receiver.

    Equals the stagewise MMSE-SIC sum of stream rates on that matrix (the
    SIC chain rule), at the same constant c = beta_1 gamma / nt.
    """
    g0 = as_matrix(g0, "g0")
    g1 = as_matrix(g1, "g1")
    x1 = complex(x1)
    if abs(abs(x1) - 1.0) > 1e-9:
        raise ValueError(f"x1 must be unit modulus, got |x1|={abs(x1)}")
    return gram_logdet_rate(g0 + x1 * g1, cfg.gamma * cfg.beta_k / cfg.nt)


def joint_decode(realization, symbols, cfg: SystemConfig) -> SicResult:
    """Run the full K = 1 chain on one realization: legacy MMSE-SIC rate,
    then the post-SIC re-scatter SNR and its two stream rates."""
    if cfg.k != 1:
        raise ValueError(f"joint_decode is defined for K = 1, got K={cfg.k}")
    g1 = realization.keyholes[0].g_k
    legacy = legacy_sic_rate(realization.g0, g1, cfg)
    gamma1 = mrs_postsic_snr(g1, symbols.x0, cfg)
    return SicResult(
        order=legacy.order,
        per_stream_sinr=legacy.per_stream_sinr,
        legacy_rate_bits=legacy.legacy_rate_bits,
        gamma1=gamma1,
        mrs_rate_wpc_bits=mrs_rate_wpc(gamma1),
        mrs_rate_gaussian_bits=mrs_rate_gaussian(gamma1),
    )
