"""Composite direct + keyhole channel model and its random symbols.

The channel between an nt-antenna transmitter and an nr-antenna receiver with
a K-antenna modulated re-scatter (MRS) node is the column-block concatenation
G = [G0 | G1 | ... | GK], where G0 holds the direct links and each keyhole
block Gk = alpha * g_rk g_tk† is the rank-one product of the two hops through
MRS antenna k. All channel vectors are unit-variance circularly symmetric
complex Gaussian, so E||G||^2 / nt = nr (K |alpha|^2 + 1) and the power
normalization beta_K = 1 / (nr (K |alpha|^2 + 1)) keeps the total received
SNR equal to gamma.

Sampling functions are pure given an explicit generator; `substream` derives
counter-based per-trial generators from (master seed, trial index, stream
label), so Monte Carlo results never depend on worker count or execution
order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .numerics import as_matrix, as_vector

__all__ = [
    "ChannelRealization",
    "Keyhole",
    "SymbolDraw",
    "SystemConfig",
    "alpha_from_db",
    "assemble_composite",
    "crandn",
    "keyhole_from_vectors",
    "sample_direct",
    "sample_keyhole",
    "sample_realization",
    "sample_symbols",
    "substream",
]


def alpha_from_db(magnitude_db: float) -> complex:
    """MRS scale factor with the given amplitude in dB and zero phase.

    `-inf` maps to alpha = 0 (no re-scattered path). The phase of alpha never
    affects any computed rate because it can be absorbed into g_rk.
    """
    if magnitude_db == -np.inf:
        return 0.0 + 0.0j
    return complex(10.0 ** (magnitude_db / 20.0))


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    """Smallest power of two >= n."""
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class SystemConfig:
    """Scalar model parameters of one simulated system.

    SNR and alpha are stored linear-scale (dB conversion happens at the CLI
    boundary). `rho_d` left as None derives the per-antenna data power
    gamma * sigma2 / nt, i.e. total transmit power P_t = nt * rho_d with
    gamma = P_t / sigma2; `rho_p` left as None follows rho_d (the experiment
    setting rho_p = rho_d). `m1` left as None resolves to the smallest power
    of two >= K + 1.

    The degenerate edges gamma = 0 (via gamma_db = -inf) and sigma2 = 0 are
    accepted so that zero-SNR and noiseless contracts can be exercised; pilot
    construction separately requires a positive pilot power.
    """

    nt: int
    nr: int
    k: int = 1
    alpha: complex = 10.0 ** (-3.0 / 20.0)  # -3 dB amplitude
    gamma_db: float = 20.0
    sigma2: float = 1.0
    rho_d: float | None = None
    rho_p: float | None = None
    m0: int = 64
    m1: int | None = None
    n_coherence: int = 1000
    mrs_phases: int | None = None  # None: continuous uniform phase; M: M-ary polyphase

    def __post_init__(self):
        if self.nt < 1 or self.nr < 1:
            raise ValueError(f"nt and nr must be >= 1, got nt={self.nt}, nr={self.nr}")
        if self.k < 0:
            raise ValueError(f"K must be >= 0, got {self.k}")
        if self.sigma2 < 0.0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.rho_d is not None and self.rho_d <= 0.0:
            raise ValueError(f"rho_d must be positive when given, got {self.rho_d}")
        if self.rho_p is not None and self.rho_p <= 0.0:
            raise ValueError(f"rho_p must be positive when given, got {self.rho_p}")
        if self.gamma < 0.0 or not np.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite and >= 0, got gamma_db={self.gamma_db}")
        if not _is_pow2(self.m0) or self.m0 < self.nt:
            raise ValueError(f"m0 must be a power of two >= nt, got m0={self.m0}, nt={self.nt}")
        m1 = self.mrs_pilot_len
        if not _is_pow2(m1) or m1 < self.k + 1:
            raise ValueError(f"m1 must be a power of two >= K + 1, got m1={m1}, K={self.k}")
        if self.n_coherence <= self.pilot_len:
            raise ValueError(f"coherence length N={self.n_coherence} must exceed the "
                             f"pilot length m0*m1={self.pilot_len}")
        if self.mrs_phases is not None and self.mrs_phases < 2:
            raise ValueError(f"mrs_phases must be >= 2 when given, got {self.mrs_phases}")
        if self.beta_k <= 0.0:
            raise ValueError("beta_K must be positive")

    @property
    def gamma(self) -> float:
        """Total average received SNR, linear scale."""
        if self.gamma_db == -np.inf:
            return 0.0
        return 10.0 ** (self.gamma_db / 10.0)

    @property
    def beta_k(self) -> float:
        """Power normalization beta_K = 1 / (nr (K |alpha|^2 + 1))."""
        return 1.0 / (self.nr * (self.k * abs(self.alpha) ** 2 + 1.0))

    @property
    def data_power(self) -> float:
        """Per-antenna data symbol power rho_d."""
        if self.rho_d is not None:
            return self.rho_d
        return self.gamma * self.sigma2 / self.nt

    @property
    def pilot_power(self) -> float:
        """Per-symbol pilot power rho_p (defaults to rho_d)."""
        if self.rho_p is not None:
            return self.rho_p
        return self.data_power

    @property
    def mrs_pilot_len(self) -> int:
        """MRS pilot length m1 (defaults to the smallest power of two >= K + 1)."""
        if self.m1 is not None:
            return self.m1
        return next_pow2(self.k + 1)

    @property
    def pilot_len(self) -> int:
        """Training phase length Np = m0 * m1 in samples."""
        return self.m0 * self.mrs_pilot_len


@dataclass(frozen=True)
class Keyhole:
    """One MRS antenna's two-hop channel: g_t into the antenna, g_r out of it,
    and the assembled rank-one block g_k = alpha * g_r g_t†."""

    g_t: np.ndarray
    g_r: np.ndarray
    g_k: np.ndarray


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the composite channel G = [G0 | G1 | ... | GK]."""

    g0: np.ndarray
    keyholes: tuple[Keyhole, ...]
    g: np.ndarray


@dataclass(frozen=True)
class SymbolDraw:
    """One legacy input vector and MRS reflection vector.

    x0 = sqrt(rho_d) * u with u unit-variance CSCG; every x1 entry has unit
    modulus.
    """

    x0: np.ndarray
    x1: np.ndarray
    u: np.ndarray


def substream(seed: int, trial: int, label: str) -> np.random.Generator:
    """Counter-based RNG stream for one (trial, label) pair.

    Built on Philox keyed through a SeedSequence spawn key, so the stream is a
    pure function of (seed, trial, label): trial i's draws never depend on how
    trials are scheduled across workers.
    """
    key = zlib.crc32(label.encode("utf-8")) & 0xFFFFFFFF
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), key))
    return np.random.Generator(np.random.Philox(ss))


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples.

    Real and imaginary parts are independent N(0, 1/2), drawn in that order.
    """
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


def sample_direct(cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw the nr x nt direct channel with i.i.d. unit-variance CSCG entries."""
    return crandn(rng, (cfg.nr, cfg.nt))


def keyhole_from_vectors(cfg: SystemConfig, g_t, g_r) -> Keyhole:
    """Assemble the rank-one keyhole block alpha * g_r g_t† from its hops."""
    g_t = as_vector(g_t, "g_t")
    g_r = as_vector(g_r, "g_r")
    if g_t.shape[0] != cfg.nt or g_r.shape[0] != cfg.nr:
        raise ValueError(f"keyhole vectors must have lengths nt={cfg.nt} and nr={cfg.nr}, "
                         f"got {g_t.shape[0]} and {g_r.shape[0]}")
    return Keyhole(g_t=g_t, g_r=g_r, g_k=cfg.alpha * np.outer(g_r, g_t.conj()))


def sample_keyhole(cfg: SystemConfig, rng: np.random.Generator) -> Keyhole:
    """Draw one keyhole: unit-variance CSCG hop vectors (g_t first, then g_r)."""
    if cfg.k < 1:
        raise ValueError("sample_keyhole requires a configuration with K >= 1")
    g_t = crandn(rng, (cfg.nt,))
    g_r = crandn(rng, (cfg.nr,))
    return keyhole_from_vectors(cfg, g_t, g_r)


def assemble_composite(g0, keyholes) -> ChannelRealization:
    """Concatenate [G0 | G1 | ... | GK] into one realization.

    Dimension consistency is enforced; the normalization property
    E||G||^2 / nt = nr (K |alpha|^2 + 1) then holds in expectation by
    construction of the unit-variance hops.
    """
    g0 = as_matrix(g0, "g0")
    keyholes = tuple(keyholes)
    nr, nt = g0.shape
    for i, kh in enumerate(keyholes):
        if kh.g_k.shape != (nr, nt):
            raise ValueError(f"keyhole {i + 1} block has shape {kh.g_k.shape}, "
                             f"expected {(nr, nt)}")
    if keyholes:
        g = np.hstack([g0] + [kh.g_k for kh in keyholes])
    else:
        g = g0
    return ChannelRealization(g0=g0, keyholes=keyholes, g=g)


def sample_realization(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    """Draw a full composite realization: G0 first, then keyholes 1..K."""
    g0 = sample_direct(cfg, rng)
    keyholes = tuple(sample_keyhole(cfg, rng) for _ in range(cfg.k))
    return assemble_composite(g0, keyholes)


def sample_symbols(cfg: SystemConfig, rng: np.random.Generator) -> SymbolDraw:
    """Draw one legacy symbol vector and MRS reflection vector.

    u is drawn first (unit-variance CSCG, x0 = sqrt(rho_d) u), then the K
    reflection coefficients: continuous uniform phase on the unit circle by
    default, or M-ary polyphase when cfg.mrs_phases is set. Either alphabet
    satisfies |x1_k| = 1, E{x1_k} = 0 and E{x1 x1†} = I.
    """
    u = crandn(rng, (cfg.nt,))
    if cfg.mrs_phases is None:
        phase = rng.random(cfg.k)
    else:
        phase = rng.integers(0, cfg.mrs_phases, cfg.k) / cfg.mrs_phases
    x1 = np.exp(2j * np.pi * phase)
    return SymbolDraw(x0=np.sqrt(cfg.data_power) * u, x1=x1, u=u)
