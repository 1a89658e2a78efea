import numpy as np
import pytest
from scipy import stats

from srflab.totalmass import (
    ABSORBING,
    HITS_CONTINUABLE,
    NEVER_HITS,
    MassSdeConfig,
    TotalMassParams,
    classify_boundary,
    delta_index,
    hitting_cdf,
    laplace_transform,
    seiberg_check,
    simulate_mass,
    simulate_paths,
)


def test_params_validation():
    with pytest.raises(ValueError):
        TotalMassParams(sigma=0.0)
    p = TotalMassParams(sigma=0.5, lam=0.2, c0=0.1)
    assert p.delta == pytest.approx(0.1 / 0.25)


def test_from_charges():
    p = TotalMassParams.from_charges(sigma=np.sqrt(np.pi), lam=0.0,
                                     alpha_bar=3.0, chi=0.0)
    # gamma = 1, c0 = 2 pi gamma alpha_bar
    assert p.c0 == pytest.approx(6.0 * np.pi)


def test_classify_boundary():
    assert classify_boundary(3.0) == NEVER_HITS
    assert classify_boundary(2.0) == NEVER_HITS
    assert classify_boundary(1.0) == HITS_CONTINUABLE
    assert classify_boundary(0.0) == ABSORBING
    assert classify_boundary(-1.0) == ABSORBING
    assert classify_boundary(TotalMassParams(sigma=1.0, c0=3.0)) == NEVER_HITS


def test_delta_index_matches_charges():
    gamma, abar, chi = 0.8, 1.5, 0.3
    q = 2.0 / gamma + gamma / 2.0
    assert delta_index(gamma, abar, chi) == pytest.approx(
        (2.0 / gamma) * (abar - q * chi))


def test_seiberg_check():
    cfg = MassSdeConfig(convention="log", coupling=1.0, damping=0.5,
                        alpha_bar=3.0, chi=0.0)
    rep = seiberg_check(cfg, weights=(1.0, 2.0))
    assert rep.local_ok and rep.global_ok
    bad = seiberg_check(cfg, weights=(5.0,))
    assert not bad.local_ok
    assert any("alpha_0" in v for v in bad.violations)
    neg = seiberg_check(MassSdeConfig(convention="log", coupling=1.0,
                                      alpha_bar=-1.0, chi=0.0))
    assert not neg.global_ok


def test_convention_map():
    # log convention (gamma, mu) and geometric (sigma, lam) describe the
    # same diffusion after sigma = sqrt(pi) gamma, lam = pi mu gamma^2 and
    # the 2 pi time change
    gamma, mu = 0.9, 0.4
    log_cfg = MassSdeConfig(convention="log", coupling=gamma, damping=mu)
    geo_cfg = MassSdeConfig(convention="geometric",
                            coupling=np.sqrt(np.pi) * gamma,
                            damping=np.pi * mu * gamma**2)
    pl, pg = log_cfg.params(), geo_cfg.params()
    # rates on their own clocks differ by exactly the factor 2 pi
    assert pg.sigma**2 == pytest.approx(2.0 * np.pi * pl.sigma**2)
    assert pg.lam == pytest.approx(2.0 * np.pi * pl.lam)
    assert pl.delta == pytest.approx(pg.delta)


def test_laplace_transform_limits():
    p = TotalMassParams(sigma=0.7, lam=0.0)
    assert laplace_transform(0.0, 1.0, 2.0, p) == pytest.approx(1.0)
    # t -> 0 returns the initial condition transform
    assert laplace_transform(1.5, 1e-12, 2.0, p) == pytest.approx(np.exp(-3.0), rel=1e-6)
    # lam -> 0 continuity of the closed forms
    p_eps = TotalMassParams(sigma=0.7, lam=1e-10)
    a = laplace_transform(1.0, 0.8, 1.0, p)
    b = laplace_transform(1.0, 0.8, 1.0, p_eps)
    assert a == pytest.approx(b, rel=1e-6)


def test_laplace_transform_monotone_in_u():
    p = TotalMassParams(sigma=0.5, lam=0.3)
    us = np.linspace(0.1, 5.0, 20)
    vals = [laplace_transform(u, 1.0, 1.0, p) for u in us]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_hitting_cdf_closed_form():
    p = TotalMassParams(sigma=1.0, lam=0.0)
    t = np.array([0.5, 1.0, 4.0])
    np.testing.assert_allclose(hitting_cdf(t, 1.0, p), np.exp(-1.0 / (2.0 * t)))
    # the u -> inf limit of the Laplace transform is the mass at zero
    big = laplace_transform(1e8, 1.0, 1.0, p)
    assert big == pytest.approx(hitting_cdf(1.0, 1.0, p), rel=1e-6)


def test_laplace_oracle_vs_fine_step_mc():
    p = TotalMassParams(sigma=0.5, lam=0.4)
    ens = simulate_paths(1.0, p, t_max=1.0, h=2e-4, n_paths=1500, seed=12,
                         record_every=5000)
    for u in (1.0, 3.0):
        emp = np.exp(-u * ens.paths[:, -1])
        se = emp.std(ddof=1) / np.sqrt(len(emp))
        oracle = laplace_transform(u, 1.0, 1.0, p)
        assert abs(emp.mean() - oracle) <= 3.0 * se


def test_paths_stay_nonnegative_and_frozen():
    p = TotalMassParams(sigma=1.0, lam=0.5)
    ens = simulate_paths(0.3, p, t_max=3.0, h=1e-3, n_paths=300, seed=13,
                         record_every=500)
    assert (ens.paths >= 0).all()
    hit = np.isfinite(ens.hit_times)
    assert hit.any()
    # once a path hits zero it stays there in every later record
    for i in np.flatnonzero(hit)[:50]:
        after = ens.times >= ens.hit_times[i]
        assert (ens.paths[i, after] == 0.0).all()


def test_mean_decay_rate():
    # E A_t = A_0 e^{-2 lam t} + c0-correction; with c0 = 0 the mean is exact
    p = TotalMassParams(sigma=0.4, lam=0.6)
    ens = simulate_paths(1.0, p, t_max=0.5, h=1e-3, n_paths=4000, seed=14,
                         record_every=500)
    m = ens.paths[:, -1].mean()
    se = ens.paths[:, -1].std(ddof=1) / np.sqrt(4000)
    assert abs(m - np.exp(-0.6)) <= 4.0 * se + 2e-3


def test_fixed_step_noise_coupling():
    # adaptive=False draws one normal per path per step, so equal seeds give
    # monotone-coupled ensembles: bigger start, stochastically bigger end
    p = TotalMassParams(sigma=0.3, lam=0.2)
    lo = simulate_paths(0.8, p, t_max=0.2, h=1e-3, n_paths=500, seed=15,
                        record_every=200, adaptive=False)
    hi = simulate_paths(1.2, p, t_max=0.2, h=1e-3, n_paths=500, seed=15,
                        record_every=200, adaptive=False)
    assert (hi.paths[:, -1] >= lo.paths[:, -1] - 1e-9).mean() > 0.99


def test_simulate_mass_wrapper():
    cfg = MassSdeConfig(convention="geometric", coupling=0.5, damping=0.3, a0=2.0)
    ens = simulate_mass(cfg, t_max=0.1, h=1e-3, n_paths=50, seed=16,
                        record_every=100)
    assert ens.paths.shape[0] == 50
    assert ens.paths[:, 0] == pytest.approx(2.0)


def test_hitting_times_distribution_small():
    # quick distributional check feeding the full-size acceptance run
    p = TotalMassParams(sigma=1.0, lam=0.0)
    ens = simulate_paths(1.0, p, t_max=10.0, h=5e-3, n_paths=1500, seed=17,
                         record_every=2000)
    ht = ens.hit_times[np.isfinite(ens.hit_times)]
    cdf = lambda t: hitting_cdf(t, 1.0, p)
    ks = stats.kstest(ht, lambda t: cdf(t) / cdf(10.0))
    assert ks.statistic < 0.05
