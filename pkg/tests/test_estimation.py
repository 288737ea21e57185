import numpy as np
import pytest

from mrslab.channel import (
    SystemConfig,
    alpha_from_db,
    sample_realization,
    sample_symbols,
    substream,
)
from mrslab.estimation import (
    build_pilots,
    error_covariance_scale,
    estimated_csi_rate_bound,
    hadamard,
    ls_estimate,
    observe_pilots,
)
from mrslab.numerics import kronecker
from mrslab.rates import sum_rate


def make_cfg(**kw):
    base = dict(nt=2, nr=4, k=1, alpha=alpha_from_db(-3.0), gamma_db=20.0,
                m0=64, m1=2, n_coherence=1000)
    base.update(kw)
    return SystemConfig(**base)


# ---------------------------------------------------------------------------
# hadamard
# ---------------------------------------------------------------------------

def test_hadamard_order_two():
    assert np.array_equal(hadamard(2), np.array([[1, 1], [1, -1]]))


def test_hadamard_order_four_is_kron_recursion():
    h1 = hadamard(2)
    expected = kronecker(h1.astype(complex), h1.astype(complex)).real.astype(np.int64)
    assert np.array_equal(hadamard(4), expected)


def test_hadamard_exact_orthogonality():
    for n in (1, 2, 4, 8, 64, 1024):
        h = hadamard(n)
        assert h.dtype == np.int64
        assert np.array_equal(h @ h.T, n * np.eye(n, dtype=np.int64))
        assert np.all(h[0, :] == 1) and np.all(h[:, 0] == 1)
        assert np.all(np.abs(h) == 1)


def test_hadamard_rejects_bad_orders():
    for n in (0, 3, 6, 100):
        with pytest.raises(ValueError):
            hadamard(n)
    with pytest.raises(ValueError):
        hadamard(1 << 15)


# ---------------------------------------------------------------------------
# pilot construction
# ---------------------------------------------------------------------------

def test_build_pilots_fig3_dimensions():
    cfg = make_cfg()
    pb = build_pilots(cfg)
    assert pb.psi_p.shape == (4, 128)
    assert pb.n_pilot == 128
    gram = pb.psi_p @ pb.psi_p.conj().T
    target = 128.0 * cfg.pilot_power * np.eye(4)
    resid = np.abs(gram - target).max() / (128.0 * cfg.pilot_power)
    assert resid <= 1e-12


def test_build_pilots_first_mrs_row_all_ones():
    pb = build_pilots(make_cfg())
    assert np.all(pb.x1p[0, :] == 1.0)
    assert pb.x1p.shape == (2, 2)
    assert np.array_equal(pb.x1p @ pb.x1p.T, 2.0 * np.eye(2))


def test_build_pilots_legacy_orthogonality():
    cfg = make_cfg()
    pb = build_pilots(cfg)
    gram = pb.x0p @ pb.x0p.conj().T
    assert np.allclose(gram, cfg.m0 * cfg.pilot_power * np.eye(cfg.nt), rtol=1e-12)


def test_build_pilots_no_mrs():
    cfg = make_cfg(k=0, m1=1)
    pb = build_pilots(cfg)
    assert pb.x1p.shape == (1, 1)
    assert np.all(pb.x1p == 1.0)
    assert np.array_equal(pb.psi_p, pb.x0p)


def test_build_pilots_requires_positive_power():
    cfg = make_cfg(gamma_db=-np.inf)  # derived pilot power is zero
    with pytest.raises(ValueError, match="positive pilot power"):
        build_pilots(cfg)


def test_pilot_kron_matches_schedule():
    # the MRS symbol is constant over each m0-symbol legacy repetition and
    # flips sign in the second repetition (row 2 of the order-2 Hadamard)
    cfg = make_cfg()
    pb = build_pilots(cfg)
    first, second = pb.psi_p[:, :64], pb.psi_p[:, 64:]
    assert np.array_equal(first[:2], second[:2])       # legacy pilot repeats
    assert np.array_equal(first[2:], -second[2:])      # MRS symbol flips


# ---------------------------------------------------------------------------
# observation and LS estimation
# ---------------------------------------------------------------------------

def test_observe_pilots_noiseless():
    cfg = make_cfg(sigma2=0.0, rho_d=50.0)
    real = sample_realization(cfg, substream(50, 0, "channel"))
    pb = build_pilots(cfg)
    yp = observe_pilots(real, pb, cfg, substream(50, 0, "pilot_noise"))
    assert np.allclose(yp, np.sqrt(cfg.beta_k) * real.g @ pb.psi_p, rtol=0, atol=1e-14)


def test_observe_pilots_dimensions_and_noise_level():
    cfg = make_cfg()
    real = sample_realization(cfg, substream(51, 0, "channel"))
    pb = build_pilots(cfg)
    rng = substream(51, 0, "pilot_noise")
    total = 0.0
    draws = 300
    for _ in range(draws):
        yp = observe_pilots(real, pb, cfg, rng)
        assert yp.shape == (4, 128)
        noise = yp - np.sqrt(cfg.beta_k) * real.g @ pb.psi_p
        total += float(np.mean(np.abs(noise) ** 2))
    assert total / draws == pytest.approx(cfg.sigma2, rel=0.01)


def test_ls_noiseless_recovery():
    cfg = make_cfg(sigma2=0.0, rho_d=50.0)
    real = sample_realization(cfg, substream(52, 0, "channel"))
    pb = build_pilots(cfg)
    yp = observe_pilots(real, pb, cfg, substream(52, 0, "pilot_noise"))
    est = ls_estimate(yp, pb, cfg)
    err = np.linalg.norm(est.g_hat - real.g) / np.linalg.norm(real.g)
    assert err <= 1e-10


def test_ls_error_matches_projected_noise():
    # sqrt(beta) G_tilde = Z_p Psi_p† / (m0 m1 rho_p), reproduced by
    # subtracting the truth from the estimate
    cfg = make_cfg()
    real = sample_realization(cfg, substream(53, 0, "channel"))
    pb = build_pilots(cfg)
    clean = np.sqrt(cfg.beta_k) * real.g @ pb.psi_p
    zp = observe_pilots(real, pb, cfg, substream(53, 0, "pilot_noise")) - clean
    est = ls_estimate(clean + zp, pb, cfg)
    err_scaled = est.g_hat_scaled - np.sqrt(cfg.beta_k) * real.g
    expected = zp @ pb.psi_p.conj().T / (pb.n_pilot * pb.rho_p)
    assert np.allclose(err_scaled, expected, rtol=0, atol=1e-12)


def test_ls_error_variance():
    # per-entry variance of sqrt(beta) G_tilde is sigma2 / (m0 m1 rho_p)
    cfg = make_cfg()
    real = sample_realization(cfg, substream(54, 0, "channel"))
    pb = build_pilots(cfg)
    rng = substream(54, 0, "pilot_noise")
    clean = np.sqrt(cfg.beta_k) * real.g @ pb.psi_p
    draws = 3000
    total = 0.0
    for _ in range(draws):
        yp = observe_pilots(real, pb, cfg, rng)
        err = ls_estimate(yp, pb, cfg).g_hat_scaled - np.sqrt(cfg.beta_k) * real.g
        total += float(np.mean(np.abs(err) ** 2))
    expected = cfg.sigma2 / (pb.n_pilot * pb.rho_p)
    assert total / draws == pytest.approx(expected, rel=0.03)


def test_ls_unbiasedness():
    cfg = make_cfg()
    real = sample_realization(cfg, substream(55, 0, "channel"))
    pb = build_pilots(cfg)
    rng = substream(55, 0, "pilot_noise")
    draws = 10000
    acc = np.zeros_like(real.g)
    for _ in range(draws):
        yp = observe_pilots(real, pb, cfg, rng)
        acc += ls_estimate(yp, pb, cfg).g_hat - real.g
    acc /= draws
    entry_std = np.sqrt(cfg.sigma2 / (pb.n_pilot * pb.rho_p * cfg.beta_k))
    se = entry_std / np.sqrt(draws)
    assert np.abs(acc).max() <= 3.5 * se


# ---------------------------------------------------------------------------
# error covariance scale
# ---------------------------------------------------------------------------

def test_error_scale_fig3_value():
    # nt=2, K=1, rho_d = rho_p, m0 m1 = 128, sigma2 = 1 -> 4/128
    cfg = make_cfg()
    assert error_covariance_scale(cfg) == pytest.approx(0.03125, abs=1e-15)


def test_error_scale_perfect_training_limit():
    cfg = make_cfg(rho_p=1e12)
    assert error_covariance_scale(cfg) <= 1e-10


def test_error_scale_empirical_covariance():
    # covariance of sqrt(beta) G_tilde psi over noise and data draws is s I
    cfg = make_cfg()
    pb = build_pilots(cfg)
    s = error_covariance_scale(cfg)
    rng_noise = substream(56, 0, "pilot_noise")
    rng_sym = substream(56, 0, "symbols")
    draws = 20000
    acc = np.zeros((4, 4), dtype=complex)
    for _ in range(draws):
        zp = np.sqrt(cfg.sigma2) * (
            rng_noise.standard_normal((4, 128)) + 1j * rng_noise.standard_normal((4, 128))
        ) * np.sqrt(0.5)
        err_scaled = zp @ pb.psi_p.conj().T / (pb.n_pilot * pb.rho_p)
        sym = sample_symbols(cfg, rng_sym)
        psi = np.concatenate([sym.x0, sym.x1[0] * sym.x0])
        v = err_scaled @ psi
        acc += np.outer(v, v.conj())
    acc /= draws
    resid = np.linalg.norm(acc - s * np.eye(4)) / np.linalg.norm(s * np.eye(4))
    assert resid <= 0.03


# ---------------------------------------------------------------------------
# estimated-CSI rate bound
# ---------------------------------------------------------------------------

def test_bound_perfect_csi_limit():
    cfg = make_cfg()
    real = sample_realization(cfg, substream(57, 0, "channel"))
    bound = estimated_csi_rate_bound(real.g, cfg, err_scale=0.0, n_pilot=0)
    assert bound == pytest.approx(sum_rate(real, cfg), rel=1e-12)


def test_bound_time_fraction():
    cfg = make_cfg()  # N = 1000, Np = 128 -> prefactor 0.872
    real = sample_realization(cfg, substream(58, 0, "channel"))
    pb = build_pilots(cfg)
    yp = observe_pilots(real, pb, cfg, substream(58, 0, "pilot_noise"))
    est = ls_estimate(yp, pb, cfg)
    bound = estimated_csi_rate_bound(est.g_hat, cfg)
    perfect_on_same = sum_rate(
        type(real)(g0=est.g_hat[:, :2], keyholes=(), g=est.g_hat), cfg)
    assert bound <= 0.872 * perfect_on_same + 1e-12
    # the prefactor itself
    assert (cfg.n_coherence - cfg.pilot_len) / cfg.n_coherence == pytest.approx(0.872)


def test_bound_strict_paper_variant():
    cfg = make_cfg()
    real = sample_realization(cfg, substream(59, 0, "channel"))
    default = estimated_csi_rate_bound(real.g, cfg)
    strict = estimated_csi_rate_bound(real.g, cfg, strict_paper=True)
    assert strict > default  # the literal form omits the 1/nt shrinkage


def test_bound_monotonicity_components():
    # for a fixed estimate: nondecreasing in rho_p (through s), the
    # determinant factor nondecreasing in m0 m1 (through s), and the time
    # fraction nonincreasing in Np
    cfg = make_cfg()
    real = sample_realization(cfg, substream(60, 0, "channel"))
    g_hat = real.g

    bounds_rho = [estimated_csi_rate_bound(g_hat, make_cfg(rho_p=rp))
                  for rp in (1.0, 10.0, 100.0, 1e4)]
    assert all(b2 >= b1 for b1, b2 in zip(bounds_rho, bounds_rho[1:]))

    det_factors = [estimated_csi_rate_bound(
        g_hat, make_cfg(m0=m0, n_coherence=100000), n_pilot=0)
        for m0 in (64, 128, 256)]
    assert all(b2 >= b1 for b1, b2 in zip(det_factors, det_factors[1:]))

    fracs = [estimated_csi_rate_bound(g_hat, cfg, n_pilot=np_)
             for np_ in (0, 128, 512, 999)]
    assert all(b2 <= b1 for b1, b2 in zip(fracs, fracs[1:]))


def test_bound_rejects_pilot_overrun():
    cfg = make_cfg()
    real = sample_realization(cfg, substream(61, 0, "channel"))
    with pytest.raises(ValueError):
        estimated_csi_rate_bound(real.g, cfg, n_pilot=1000)
