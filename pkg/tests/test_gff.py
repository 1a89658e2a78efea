import numpy as np
import pytest

from srflab.gff import (
    SIGMA_L1,
    SIGMA_L2,
    GffSampler,
    Mollifier,
    cm_log_weight,
    cm_shift,
    mollify,
)
from srflab.lattice import ScalarField, TorusGeometry, grad_inner


@pytest.fixture(scope="module")
def geom():
    return TorusGeometry(tau=1j, n=32)


@pytest.fixture(scope="module")
def sampler(geom):
    return GffSampler(geom, sigma=1.0, seed=42)


def test_coupling_bounds():
    assert SIGMA_L1 == pytest.approx(2.0 * np.sqrt(np.pi))
    assert SIGMA_L2 == pytest.approx(np.sqrt(2.0 * np.pi))


def test_samples_are_zero_mean(sampler):
    grids = sampler.sample_grids(0, 8)
    assert grids.shape == (8, 32, 32)
    assert np.allclose(grids.mean(axis=(1, 2)), 0.0, atol=1e-12)


def test_reproducible_and_independent(sampler, geom):
    a = sampler.sample_grids(5, 2)
    b = sampler.sample_grids(5, 2)
    assert np.array_equal(a, b)
    c = sampler.sample_grids(6, 2)
    assert not np.allclose(a, c)
    other = GffSampler(geom, sigma=1.0, seed=42)
    assert np.array_equal(other.sample_grids(5, 2), a)


def test_mode_variance(sampler, geom):
    # coefficient variance sigma^2 / (2 lam_k), estimated from 600 samples
    grids = sampler.sample_grids(0, 600)
    hat = np.fft.fft2(grids, axes=(1, 2)) / geom.n**2 * np.sqrt(geom.total_area)
    for m, n in ((1, 0), (0, 1), (1, 1), (2, 0)):
        var = np.var(hat[:, m, n].real) + np.var(hat[:, m, n].imag)
        target = 1.0 / (2.0 * geom.eigenvalues[m, n])
        assert var == pytest.approx(target, rel=0.2)


def test_mode_variance_scales_with_sigma(geom):
    s2 = GffSampler(geom, sigma=2.0, seed=7)
    grids = s2.sample_grids(0, 400)
    hat = np.fft.fft2(grids, axes=(1, 2)) / geom.n**2 * np.sqrt(geom.total_area)
    var = np.var(hat[:, 1, 0].real) + np.var(hat[:, 1, 0].imag)
    target = 4.0 / (2.0 * geom.eigenvalues[1, 0])
    assert var == pytest.approx(target, rel=0.2)


def test_mollifier_resolvability(geom):
    with pytest.raises(ValueError):
        Mollifier("heat", 1.0 / geom.n).check_resolvable(geom)
    Mollifier("heat", 2.0 / geom.n).check_resolvable(geom)


def test_mollifier_schemes(geom):
    for scheme in ("heat", "circle-average"):
        mult = Mollifier(scheme, 0.1).multipliers(geom)
        assert mult[0, 0] == pytest.approx(1.0)
        assert np.all(np.abs(mult) <= 1.0 + 1e-12)
    with pytest.raises(ValueError):
        Mollifier("box", 0.1)


def test_heat_multiplier_value(geom):
    mult = Mollifier("heat", 0.1).multipliers(geom)
    lam = geom.eigenvalues[1, 0]
    assert mult[1, 0] == pytest.approx(np.exp(-0.01 * lam / 2.0))


def test_mollify_preserves_mean_and_smooths(geom):
    rng = np.random.default_rng(3)
    f = ScalarField.from_grid(geom, rng.standard_normal((32, 32)) + 2.0)
    out = mollify(f, Mollifier("heat", 0.2))
    assert out.mean == pytest.approx(f.mean)
    assert np.abs(out.values).max() < np.abs(f.values).max()


def test_mollified_variance_matches_sum(sampler, geom):
    moll = Mollifier("heat", 0.1)
    mult = moll.multipliers(geom)
    lam = geom.eigenvalues
    mask = lam > 0
    expected = float((mult[mask] ** 2 / (2.0 * lam[mask])).sum() / geom.total_area)
    assert sampler.mollified_variance(moll) == pytest.approx(expected, rel=1e-12)


def test_mollified_variance_empirical(sampler, geom):
    moll = Mollifier("heat", 0.15)
    grids = sampler.sample_grids(100, 500)
    sm = np.stack([
        mollify(ScalarField.from_grid(geom, g), moll).values for g in grids
    ])
    emp = float(sm.var())
    assert emp == pytest.approx(sampler.mollified_variance(moll), rel=0.15)


def test_cm_shift_and_weight(geom):
    phi = ScalarField.mode(geom, 1, 0, amplitude=0.3)
    h = ScalarField.mode(geom, 1, 0, amplitude=1.0)
    shifted = cm_shift(phi, h, 0.5)
    assert np.allclose(shifted.grid, phi.grid + 0.5 * h.grid)
    # log weight is the explicit Gaussian density ratio in the H^1 pairing
    sigma = 1.2
    w = cm_log_weight(phi, h, 0.5, sigma)
    expected = (2.0 * 0.5 / sigma**2) * grad_inner(phi, h) \
        - (0.25 / sigma**2) * grad_inner(h, h)
    assert w == pytest.approx(expected, rel=1e-12)


def test_cm_weight_constant_direction_is_zero(geom):
    phi = ScalarField.mode(geom, 1, 1, amplitude=0.4)
    h = ScalarField.constant(geom, 2.0)
    assert cm_log_weight(phi, h, 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)


def test_cm_weight_importance_sampling(geom):
    # E[e^W F(phi)] under the base law equals E[F(phi + t h)]: check on the
    # linear statistic F = <grad phi, grad h>
    sigma, t = 1.0, 0.4
    h = ScalarField.mode(geom, 1, 0, amplitude=0.5)
    s = GffSampler(geom, sigma, seed=11)
    grids = s.sample_grids(0, 4000)
    vals_w, vals_s = [], []
    for g in grids:
        phi = ScalarField.from_grid(geom, g)
        vals_w.append(np.exp(cm_log_weight(phi, h, t, sigma)) * grad_inner(phi, h))
        vals_s.append(grad_inner(cm_shift(phi, h, t), h))
    se = np.std(vals_w) / np.sqrt(len(vals_w))
    assert np.mean(vals_w) == pytest.approx(np.mean(vals_s), abs=4.0 * se + 1e-12)
