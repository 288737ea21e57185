import numpy as np
import pytest

from mrslab.channel import (
    SystemConfig,
    alpha_from_db,
    sample_realization,
    sample_symbols,
    substream,
)
from mrslab.estimation import build_pilots, estimated_csi_rate_bound, ls_estimate
from mrslab.experiments import (
    SUM_RATE_METRICS,
    Scenario,
    run,
    run_lar_convergence,
    run_rate_region,
    run_sum_rate_sweep,
)
from mrslab.rates import legacy_alone_rate, lar_rx_limit, sum_rate
from mrslab.receiver import (
    joint_known_x1_rate,
    legacy_sic_rate,
    mrs_postsic_snr,
    mrs_rate_gaussian,
    mrs_rate_wpc,
)


def make_cfg(**kw):
    base = dict(nt=2, nr=4, k=1, alpha=alpha_from_db(-3.0), gamma_db=20.0,
                m0=64, m1=2, n_coherence=1000)
    base.update(kw)
    return SystemConfig(**base)


def by_metric(points, snr, metric):
    for p in points:
        if p.snr_db == snr and p.metric == metric:
            return p
    raise KeyError((snr, metric))


def vertex(points, snr, name):
    for p in points:
        if p.snr_db == snr and p.vertex == name:
            return p
    raise KeyError((snr, name))


# ---------------------------------------------------------------------------
# scenario validation
# ---------------------------------------------------------------------------

def test_scenario_validation():
    cfg = make_cfg()
    with pytest.raises(ValueError):
        Scenario(cfg=cfg, trials=0)
    with pytest.raises(ValueError):
        Scenario(cfg=cfg, snr_grid_db=())
    with pytest.raises(ValueError):
        Scenario(cfg=cfg, experiment="bogus")
    with pytest.raises(ValueError):
        Scenario(cfg=cfg, grow_dim="k")


def test_sweep_requires_single_mrs_antenna():
    with pytest.raises(ValueError):
        run_sum_rate_sweep(Scenario(cfg=make_cfg(k=0, m1=1), trials=1))


# ---------------------------------------------------------------------------
# engine is a pure fold over module operations
# ---------------------------------------------------------------------------

def test_single_trial_sweep_equals_direct_composition():
    cfg = make_cfg()
    grid = (0.0, 12.0, 24.0)
    seed = 77
    points = run_sum_rate_sweep(Scenario(cfg=cfg, snr_grid_db=grid, trials=1,
                                         seed=seed, workers=1))

    from dataclasses import replace
    real = sample_realization(cfg, substream(seed, 0, "channel"))
    sym = sample_symbols(cfg, substream(seed, 0, "symbols"))
    rng_noise = substream(seed, 0, "pilot_noise")
    z_p = np.sqrt(cfg.sigma2) * (
        rng_noise.standard_normal((4, 128)) + 1j * rng_noise.standard_normal((4, 128))
    ) * np.sqrt(0.5)
    g1 = real.keyholes[0].g_k
    for snr in grid:
        c = replace(cfg, gamma_db=snr)
        pb = build_pilots(c)
        x0 = np.sqrt(c.data_power) * sym.u
        gamma1 = mrs_postsic_snr(g1, x0, c)
        yp = np.sqrt(c.beta_k) * (real.g @ pb.psi_p) + z_p
        est = ls_estimate(yp, pb, c)
        expected = {
            "sum_rate": sum_rate(real, c),
            "legacy_alone": legacy_alone_rate(real.g0, c),
            "mrs_wpc": mrs_rate_wpc(gamma1),
            "mrs_gauss_bound": mrs_rate_gaussian(gamma1),
            "est_lower_bound": estimated_csi_rate_bound(est.g_hat, c),
            "lar_nr": lar_rx_limit([real.keyholes[0].g_t], c),
        }
        for metric, value in expected.items():
            p = by_metric(points, snr, metric)
            assert p.mean_bits == pytest.approx(value, abs=1e-12)
            assert p.stderr_bits == 0.0


def test_single_trial_region_equals_direct_composition():
    cfg = make_cfg()
    seed = 78
    points, info = run_rate_region(Scenario(cfg=cfg, snr_grid_db=(20.0,), trials=1,
                                            seed=seed, workers=1,
                                            experiment="rate_region"))
    real = sample_realization(cfg, substream(seed, 0, "channel"))
    sym = sample_symbols(cfg, substream(seed, 0, "symbols"))
    g1 = real.keyholes[0].g_k
    x0 = sym.x0
    r0 = legacy_sic_rate(real.g0, g1, cfg).legacy_rate_bits
    wpc = mrs_rate_wpc(mrs_postsic_snr(g1, x0, cfg))
    assert vertex(points, 20.0, "B").legacy_bits == pytest.approx(r0, abs=1e-12)
    assert vertex(points, 20.0, "A").mrs_bits == pytest.approx(wpc, abs=1e-12)
    assert vertex(points, 20.0, "C").legacy_bits == pytest.approx(
        sum_rate(real, cfg), abs=1e-12)
    assert info["joint_known_x1"][20.0]["mean_bits"] == pytest.approx(
        joint_known_x1_rate(real.g0, g1, sym.x1[0], cfg), abs=1e-12)


# ---------------------------------------------------------------------------
# determinism across worker counts
# ---------------------------------------------------------------------------

def test_sweep_bitwise_identical_across_workers():
    cfg = make_cfg()
    base = dict(cfg=cfg, snr_grid_db=(0.0, 20.0), trials=700, seed=5)
    p1 = run_sum_rate_sweep(Scenario(workers=1, **base))
    p2 = run_sum_rate_sweep(Scenario(workers=2, **base))
    p3 = run_sum_rate_sweep(Scenario(workers=5, **base))
    assert p1 == p2 == p3


def test_region_bitwise_identical_across_workers():
    cfg = make_cfg()
    base = dict(cfg=cfg, snr_grid_db=(10.0,), trials=600, seed=6,
                experiment="rate_region")
    r1 = run_rate_region(Scenario(workers=1, **base))
    r2 = run_rate_region(Scenario(workers=2, **base))
    assert r1 == r2


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

def test_stderr_clt_scaling():
    cfg = make_cfg()
    small = run_sum_rate_sweep(Scenario(cfg=cfg, snr_grid_db=(10.0,), trials=1000,
                                        seed=9, workers=2))
    large = run_sum_rate_sweep(Scenario(cfg=cfg, snr_grid_db=(10.0,), trials=4000,
                                        seed=9, workers=2))
    se_small = by_metric(small, 10.0, "sum_rate").stderr_bits
    se_large = by_metric(large, 10.0, "sum_rate").stderr_bits
    assert se_small / se_large == pytest.approx(2.0, rel=0.2)


def test_sweep_row_order_and_metrics():
    cfg = make_cfg()
    points = run_sum_rate_sweep(Scenario(cfg=cfg, snr_grid_db=(20.0, 0.0), trials=8,
                                         seed=1, workers=1))
    assert [p.snr_db for p in points[:6]] == [0.0] * 6  # sorted by SNR
    assert [p.metric for p in points[:6]] == list(SUM_RATE_METRICS)
    assert len(points) == 12


# ---------------------------------------------------------------------------
# rate region geometry
# ---------------------------------------------------------------------------

def test_region_geometry_invariants():
    cfg = make_cfg()
    points, info = run_rate_region(Scenario(cfg=cfg, snr_grid_db=(10.0, 20.0),
                                            trials=400, seed=10, workers=2,
                                            experiment="rate_region"))
    for snr in (10.0, 20.0):
        a, b = vertex(points, snr, "A"), vertex(points, snr, "B")
        c, d = vertex(points, snr, "C"), vertex(points, snr, "D")
        assert a.legacy_bits == 0.0
        assert c.mrs_bits == 0.0
        assert b.mrs_bits == a.mrs_bits
        assert c.legacy_bits >= b.legacy_bits
        assert d.legacy_bits == b.legacy_bits and d.mrs_bits == 0.0
        alone = vertex(points, snr, "legacy_alone")
        assert alone.mrs_bits == 0.0 and alone.legacy_bits > 0.0
    assert "time sharing" in info["segments"]


def test_region_collapses_without_rescatter():
    cfg = make_cfg(alpha=0.0)
    points, _ = run_rate_region(Scenario(cfg=cfg, snr_grid_db=(20.0,), trials=300,
                                         seed=11, workers=1,
                                         experiment="rate_region"))
    a, b, c = (vertex(points, 20.0, v) for v in "ABC")
    assert a.mrs_bits == 0.0
    # with alpha = 0 the interference vanishes and beta_1 = beta_0, so the
    # legacy MMSE-SIC rate equals the exact sum rate
    assert c.legacy_bits == pytest.approx(b.legacy_bits, abs=1e-8)


def test_region_vertex_c_matches_sum_rate_mean():
    cfg = make_cfg()
    seed, trials = 12, 500
    points, _ = run_rate_region(Scenario(cfg=cfg, snr_grid_db=(20.0,), trials=trials,
                                         seed=seed, workers=2,
                                         experiment="rate_region"))
    acc = 0.0
    for t in range(trials):
        real = sample_realization(cfg, substream(seed, t, "channel"))
        acc += sum_rate(real, cfg)
    assert vertex(points, 20.0, "C").legacy_bits == pytest.approx(
        acc / trials, rel=1e-12)


# ---------------------------------------------------------------------------
# large-array convergence
# ---------------------------------------------------------------------------

def test_lar_convergence_nr():
    cfg = make_cfg()
    pts = run_lar_convergence(Scenario(cfg=cfg, trials=60, seed=13, workers=2,
                                       experiment="lar_convergence",
                                       grow_dim="nr", grow_grid=(64, 512)))
    assert [p.value for p in pts] == [64, 512]
    assert pts[1].rel_gap < pts[0].rel_gap
    assert pts[0].lar_bits == pytest.approx(pts[1].lar_bits, rel=1e-12)


def test_lar_convergence_nt():
    cfg = make_cfg()
    pts = run_lar_convergence(Scenario(cfg=cfg, trials=60, seed=14, workers=2,
                                       experiment="lar_convergence",
                                       grow_dim="nt", grow_grid=(64, 512)))
    assert pts[1].rel_gap < pts[0].rel_gap
    assert pts[1].rel_gap <= 0.05


def test_lar_no_mrs_direct_limit():
    cfg = make_cfg(k=0, m1=1)
    pts = run_lar_convergence(Scenario(cfg=cfg, trials=50, seed=15, workers=1,
                                       experiment="lar_convergence",
                                       grow_dim="nr", grow_grid=(1024,)))
    expected = cfg.nt * np.log2(1.0 + cfg.gamma / cfg.nt)
    assert pts[0].lar_bits == pytest.approx(expected, rel=1e-12)
    assert pts[0].rel_gap <= 0.01


def test_lar_dimension_guard():
    cfg = make_cfg()
    with pytest.raises(ValueError, match="outside"):
        run_lar_convergence(Scenario(cfg=cfg, trials=1, experiment="lar_convergence",
                                     grow_grid=(1 << 14,)))


# ---------------------------------------------------------------------------
# dispatcher
# ---------------------------------------------------------------------------

def test_run_dispatch():
    cfg = make_cfg()
    sweep = run(Scenario(cfg=cfg, snr_grid_db=(10.0,), trials=4, seed=2, workers=1))
    assert sweep[0].metric == "sum_rate"
    est = run(Scenario(cfg=cfg, snr_grid_db=(10.0,), trials=4, seed=2, workers=1,
                       experiment="estimation_sweep"))
    assert est == sweep  # shared engine
    region = run(Scenario(cfg=cfg, snr_grid_db=(10.0,), trials=4, seed=2, workers=1,
                          experiment="rate_region"))
    assert region[0][0].vertex == "A"
    lar = run(Scenario(cfg=cfg, trials=4, seed=2, workers=1,
                       experiment="lar_convergence", grow_grid=(64,)))
    assert lar[0].grow_dim == "nr"
