import numpy as np
import pytest

from srflab.expansion import (
    ExpansionConfig,
    _coefficient,
    decay_horizon,
    dirichlet_energy,
    solve_full,
    solve_phi0,
    solve_phi1,
)
from srflab.gff import Mollifier
from srflab.lattice import ScalarField, TorusGeometry
from srflab.rng import stream


@pytest.fixture(scope="module")
def geom():
    return TorusGeometry(tau=1j, n=16)


def test_config_validation():
    with pytest.raises(ValueError):
        ExpansionConfig(lam=-1.0)
    with pytest.raises(ValueError):
        ExpansionConfig(dt=0.0)


def test_phi0_energy_decreasing(geom):
    cfg = ExpansionConfig(lam=0.0, dt=2e-4, n_steps=100, eps=0.25)
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.3)
    traj = solve_phi0(phi, cfg)
    e = dirichlet_energy(traj)
    assert (np.diff(e) < 0).all()


def test_phi0_constant_initial_data(geom):
    # constant data: the flow reduces to d m / dt = -lam
    cfg = ExpansionConfig(lam=0.4, dt=1e-3, n_steps=50, eps=0.25)
    traj = solve_phi0(ScalarField.constant(geom, 0.2), cfg)
    final = traj.fields[-1]
    assert np.allclose(final.values, 0.0, atol=1e-12)
    assert final.mean == pytest.approx(0.2 - 0.4 * 0.05, rel=1e-10)


def test_decay_horizon(geom):
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.1)
    t1 = decay_horizon(phi, 0.01)
    t2 = decay_horizon(phi, 0.001)
    assert 0 < t1 < t2


def test_decay_horizon_is_sufficient(geom):
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.1)
    target = 1e-2
    T = decay_horizon(phi, target**2)   # energy ratio = norm ratio squared
    cfg = ExpansionConfig(lam=0.0, dt=2e-4, n_steps=int(np.ceil(T / 2e-4)),
                          eps=0.25)
    e = dirichlet_energy(solve_phi0(phi, cfg))
    assert np.sqrt(e[-1] / e[0]) <= target


def test_solve_full_sigma_zero_equals_phi0(geom):
    cfg = ExpansionConfig(lam=0.3, dt=2e-4, n_steps=50, eps=0.25)
    phi = ScalarField.mode(geom, 1, 1, amplitude=0.2)
    t0 = solve_phi0(phi, cfg)
    tf = solve_full(phi, cfg, sigma=0.0, seed=1)
    assert np.allclose(tf.fields[-1].grid, t0.fields[-1].grid, atol=1e-12)


def test_phi1_reproducible_and_zero_without_forcing(geom):
    cfg = ExpansionConfig(lam=0.0, dt=2e-4, n_steps=30, eps=0.25)
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.2)
    traj0 = solve_phi0(phi, cfg)
    a = solve_phi1(traj0, cfg, seed=3)
    b = solve_phi1(traj0, cfg, seed=3)
    assert np.array_equal(a.fields[-1].grid, b.fields[-1].grid)
    zero = solve_phi1(traj0, cfg, noise=lambda s: np.zeros((16, 16)))
    assert np.allclose(zero.fields[-1].grid, 0.0, atol=1e-12)


def test_phi1_length_check(geom):
    cfg = ExpansionConfig(lam=0.0, dt=2e-4, n_steps=30, eps=0.25)
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.2)
    traj0 = solve_phi0(phi, cfg)
    bad = ExpansionConfig(lam=0.0, dt=2e-4, n_steps=31, eps=0.25)
    with pytest.raises(ValueError):
        solve_phi1(traj0, bad)


def test_coupled_remainder_is_second_order(geom):
    # phi_sigma - phi0 - sigma phi1 shrinks like sigma^2 in L2 under shared
    # noise, so halving sigma quarters the norm (up to MC fluctuation)
    cfg = ExpansionConfig(lam=0.2, dt=2e-4, n_steps=60, eps=0.25)
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.2)
    traj0 = solve_phi0(phi, cfg)
    moll = Mollifier(cfg.scheme, cfg.eps)
    cbars = [float(_coefficient(f, moll).max()) for f in traj0.fields[:-1]]
    rng = stream(99, 0)
    draws = [rng.standard_normal((16, 16)) for _ in range(cfg.n_steps)]
    noise = lambda s: draws[s]
    t1 = solve_phi1(traj0, cfg, noise=noise)

    def remainder(sig):
        tf = solve_full(phi, cfg, sig, noise=noise, cbar_schedule=cbars)
        d = tf.fields[-1].grid - traj0.fields[-1].grid - sig * t1.fields[-1].grid
        return float(np.sqrt((d**2).sum() * geom.cell_area))

    r1, r2 = remainder(0.2), remainder(0.1)
    assert r2 < 0.35 * r1
