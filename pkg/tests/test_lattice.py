import numpy as np
import pytest

from srflab.lattice import (
    ScalarField,
    TorusGeometry,
    apply_multiplier,
    grad_inner,
    laplacian,
)


@pytest.fixture(scope="module")
def geom():
    return TorusGeometry(tau=1j, n=32)


def test_cell_area(geom):
    assert geom.total_area == pytest.approx(1.0)
    assert geom.cell_area == pytest.approx(1.0 / 32**2)


def test_skew_torus_area():
    g = TorusGeometry(tau=0.3 + 1.7j, n=16)
    assert g.total_area == pytest.approx(1.7)


def test_geometry_validation():
    with pytest.raises(ValueError):
        TorusGeometry(tau=1.0 - 0.5j, n=16)
    with pytest.raises(ValueError):
        TorusGeometry(tau=1j, n=15)


def test_eigenvalue_formula(geom):
    # lam_{m,n} = 4 pi^2 [m^2 + (n - m tau1)^2 / tau2^2] on the square torus
    lam = geom.eigenvalues
    assert lam[0, 0] == 0.0
    assert lam[1, 0] == pytest.approx(4.0 * np.pi**2)
    assert lam[0, 1] == pytest.approx(4.0 * np.pi**2)
    assert lam[1, 1] == pytest.approx(8.0 * np.pi**2)
    assert (lam[lam > 0] > 0).all()


def test_eigenvalue_skew():
    tau = 0.5 + 2.0j
    g = TorusGeometry(tau=tau, n=16)
    m, n = 2, 3
    expected = 4.0 * np.pi**2 * (m**2 + (n - m * tau.real) ** 2 / tau.imag**2)
    assert g.eigenvalues[m, n] == pytest.approx(expected)


def test_laplacian_on_plane_wave(geom):
    # the discrete operator is the exact Fourier multiplier, so plane waves
    # are exact eigenfunctions
    f = ScalarField.mode(geom, 2, 1)
    lap = laplacian(f)
    lam = geom.eigenvalues[2, 1]
    assert np.allclose(lap.grid, -lam * f.grid, atol=1e-9 * lam)


def test_laplacian_kills_constants(geom):
    f = ScalarField.constant(geom, 3.2)
    assert np.allclose(laplacian(f).grid, 0.0, atol=1e-12)


def test_mean_split(geom):
    rng = np.random.default_rng(0)
    grid = rng.standard_normal((32, 32)) + 1.4
    f = ScalarField.from_grid(geom, grid)
    assert f.mean == pytest.approx(grid.mean())
    assert abs(f.values.mean()) < 1e-12
    assert np.allclose(f.grid, grid)


def test_field_algebra(geom):
    a = ScalarField.mode(geom, 1, 0, amplitude=2.0)
    b = ScalarField.constant(geom, 1.0)
    s = a + b
    assert s.mean == pytest.approx(1.0)
    assert np.allclose((s - b).grid, a.grid)
    assert np.allclose((a * 0.5).grid, 0.5 * a.grid)


def test_grad_inner_is_dirichlet_pairing(geom):
    # <grad h, grad phi> = -integral of h * Lap phi
    rng = np.random.default_rng(1)
    h = ScalarField.from_grid(geom, rng.standard_normal((32, 32)))
    phi = ScalarField.from_grid(geom, rng.standard_normal((32, 32)))
    direct = grad_inner(h, phi)
    byparts = -float((h.grid * laplacian(phi).grid).sum() * geom.cell_area)
    assert direct == pytest.approx(byparts, rel=1e-10)


def test_grad_inner_mode_normalization(geom):
    f = ScalarField.mode(geom, 1, 0)
    lam = geom.eigenvalues[1, 0]
    # integral of cos^2 over the unit-area torus is 1/2
    assert grad_inner(f, f) == pytest.approx(lam * 0.5, rel=1e-10)


def test_apply_multiplier_identity(geom):
    rng = np.random.default_rng(2)
    f = ScalarField.from_grid(geom, rng.standard_normal((32, 32)))
    out = apply_multiplier(f, np.ones((32, 32)))
    assert np.allclose(out.grid, f.grid, atol=1e-12)


def test_torus_distance(geom):
    # wrap-around: points at fractional coordinates 0.1 and 0.9 are 0.2 apart
    assert geom.torus_distance(np.array(0.8 + 0.0j)) == pytest.approx(0.2)
    assert geom.torus_distance(np.array(0.0 + 0.0j)) == pytest.approx(0.0)
    d = geom.torus_distance(np.array(0.5 + 0.5j))
    assert d == pytest.approx(np.sqrt(0.5))
