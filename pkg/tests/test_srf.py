import numpy as np
import pytest

from srflab.gff import GffSampler
from srflab.lattice import ScalarField, TorusGeometry
from srflab.srf import (
    BlowUpError,
    Insertion,
    SrfConfig,
    imex_heat_step,
    insertion_decompose,
    run_srf,
)


@pytest.fixture(scope="module")
def geom():
    return TorusGeometry(tau=1j, n=16)


@pytest.fixture(scope="module")
def sampler(geom):
    return GffSampler(geom, sigma=0.3, seed=9)


def small_config(**kw):
    base = dict(sigma=0.3, lam=0.5, eps=0.25, dt=2e-4, n_steps=20)
    base.update(kw)
    return SrfConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        SrfConfig(sigma=0.3, lam=0.5, eps=0.25, dt=-1.0, n_steps=10)
    with pytest.raises(ValueError):
        SrfConfig(sigma=-0.3, lam=0.5, eps=0.25, dt=1e-4, n_steps=10)
    # insertion weight at or above the background charge is rejected
    q = 2.0 / (0.3 / np.sqrt(np.pi)) + (0.3 / np.sqrt(np.pi)) / 2.0
    with pytest.raises(ValueError):
        SrfConfig(sigma=0.3, lam=0.5, eps=0.25, dt=1e-4, n_steps=10,
                  insertions=(Insertion(0.5, 0.5, q + 1.0),))


def test_run_reproducible(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(0, 1)[0])
    cfg = small_config()
    a = run_srf(phi0, cfg, sampler, seed=1)
    b = run_srf(phi0, cfg, sampler, seed=1)
    assert np.array_equal(a.observables["total"], b.observables["total"])
    assert np.array_equal(a.final_field.grid, b.final_field.grid)
    c = run_srf(phi0, cfg, sampler, seed=2)
    assert not np.allclose(a.observables["total"], c.observables["total"])


def test_record_shapes(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(1, 1)[0])
    f = ScalarField.mode(geom, 1, 0, amplitude=0.2) + ScalarField.constant(geom, 1.0)
    rec = run_srf(phi0, small_config(), sampler, observables={"f": f}, seed=3)
    assert len(rec.times) == 21
    assert rec.observables["f"].shape == (21,)
    assert rec.drift_integrands["f"].shape == (21,)
    assert rec.times[1] - rec.times[0] == pytest.approx(2e-4)
    assert not rec.blew_up
    assert rec.absorbed_at is None


def test_record_every(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(1, 1)[0])
    rec = run_srf(phi0, small_config(record_every=5), sampler, seed=3)
    assert len(rec.times) == 5
    assert rec.times[1] == pytest.approx(5 * 2e-4)


def test_observable_positive_mass(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(2, 1)[0])
    rec = run_srf(phi0, small_config(), sampler, seed=4)
    assert (rec.observables["total"] > 0).all()


def test_drift_integrand_of_constant_is_zero(geom, sampler):
    # omega0(1 * Lap phi) = 0: the Laplacian integrates to zero
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(3, 1)[0])
    rec = run_srf(phi0, small_config(), sampler, seed=5)
    assert np.allclose(rec.drift_integrands["total"], 0.0, atol=1e-10)


def test_blow_up_raises_with_partial_record(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(4, 1)[0])
    cfg = small_config(blow_up_bound=1e-3)
    with pytest.raises(BlowUpError) as exc:
        run_srf(phi0, cfg, sampler, seed=6)
    rec = exc.value.record
    assert rec.blew_up
    assert rec.final_field is None


def test_absorption_stops_run(geom, sampler):
    # a deeply negative mean puts the total mass below the threshold at once
    phi0 = ScalarField.constant(geom, -20.0)
    cfg = small_config(absorption_threshold=1e-3)
    rec = run_srf(phi0, cfg, sampler, seed=7)
    assert rec.absorbed_at is not None
    assert len(rec.times) < 21


def test_flat_coefficients_mode(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(5, 1)[0])
    rec = run_srf(phi0, small_config(flat_coefficients=True), sampler, seed=8)
    assert np.isfinite(rec.observables["total"]).all()


def test_noise_hook_sees_every_draw(geom, sampler):
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(6, 1)[0])
    seen = []
    run_srf(phi0, small_config(), sampler, seed=9,
            noise_hook=lambda step, eta: seen.append((step, eta.shape)))
    assert len(seen) == 20
    assert all(shape == (16, 16) for _, shape in seen)


def test_imex_step_deterministic_decay(geom):
    # sigma = 0, lam = 0, constant unit coefficient: one backward-Euler heat
    # step, mode k damped by 1/(1 + dt lam_k)
    f = ScalarField.mode(geom, 1, 0, amplitude=1.0)
    dt = 1e-2
    c = np.ones((16, 16))
    grid, mean = imex_heat_step(f.values.copy(), 0.0, c, 1.0, 0.0, dt, geom)
    lam = geom.eigenvalues[1, 0]
    assert np.allclose(grid, f.values / (1.0 + dt * lam), atol=1e-10)
    assert mean == pytest.approx(0.0)


def test_imex_step_mean_damping(geom):
    # lam > 0 lowers the mean at rate lam
    dt = 1e-3
    c = np.ones((16, 16))
    _, mean = imex_heat_step(np.zeros((16, 16)), 1.0, c, 1.0, 0.7, dt, geom)
    assert mean == pytest.approx(1.0 - 0.7 * dt)


def test_insertion_decompose(geom):
    cfg = small_config(insertions=(Insertion(0.25, 0.5, 0.4),))
    h_sing, drift = insertion_decompose(cfg, geom)
    assert abs(h_sing.values.mean()) < 1e-12
    # the profile peaks at the insertion point
    i, j = int(0.25 * 16), int(0.5 * 16)
    assert h_sing.values[i, j] == h_sing.values.max()
    # drift rate of A(f) is 2 pi gamma sum_i alpha_i f(x_i)
    f = ScalarField.constant(geom, 2.0)
    gamma = cfg.sigma / np.sqrt(np.pi)
    assert drift.rate(f) == pytest.approx(2.0 * np.pi * gamma * 0.4 * 2.0)


def test_insertion_run_grows_local_mass(geom, sampler):
    # a positive insertion pumps mass at its site relative to the no-insertion run
    phi0 = ScalarField.from_grid(geom, sampler.sample_grids(7, 1)[0])
    bump = np.zeros((16, 16))
    bump[4, 8] = 1.0
    site = ScalarField.from_grid(geom, bump * 16**2)
    cfg_plain = small_config(n_steps=100)
    cfg_ins = small_config(n_steps=100, insertions=(Insertion(0.25, 0.5, 0.4),))
    base = run_srf(phi0, cfg_plain, sampler, observables={"site": site}, seed=10)
    ins = run_srf(phi0, cfg_ins, sampler, observables={"site": site}, seed=10)
    assert ins.observables["site"][-1] > base.observables["site"][-1]
