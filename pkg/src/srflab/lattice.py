"""Discretized flat torus C/(Z + tau Z): geometry, spectral transforms, integration.

The torus is parametrized by lattice coordinates (u, v) in [0,1)^2 with the
embedding z = u + tau*v.  Fields are stored on an N x N grid of cell centers,
u = j1/N, v = j2/N.  The Fourier basis e^{2*pi*i(m*u + n*v)} diagonalizes the
flat Laplacian with eigenvalues

    lambda_{m,n} = 4*pi^2 * (m^2 + (n - m*Re(tau))^2 / Im(tau)^2),

the squared lengths of the dual-lattice vectors of Z + tau Z (times 2*pi).
All differential operators here are exact Fourier multipliers on the retained
modes; finite differences are never used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: relative tolerance for the zero-mean bookkeeping of ScalarField
TOL_MEAN = 1e-10


class GeometryMismatch(ValueError):
    """Raised when two fields/measures live on different geometries."""


@dataclass(frozen=True)
class TorusGeometry:
    """Immutable spectral data for the flat torus C/(Z + tau Z).

    Attributes:
        tau: modulus of the torus, Im(tau) > 0.  Default is the square torus i.
        n: grid cells per side (power of two).
        cell_area: Im(tau) / n^2.
        eigenvalues: (n, n) array of Laplacian eigenvalues in FFT mode order;
            eigenvalues[0, 0] == 0, all others positive.
    """

    tau: complex = 1j
    n: int = 64
    cell_area: float = field(init=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.tau.imag <= 0:
            raise ValueError("tau must have positive imaginary part")
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError("grid side must be a power of two >= 2")
        m = np.fft.fftfreq(self.n, d=1.0 / self.n)  # integer mode numbers
        mm, nn = np.meshgrid(m, m, indexing="ij")
        t1, t2 = self.tau.real, self.tau.imag
        lam = 4.0 * np.pi**2 * (mm**2 + (nn - mm * t1) ** 2 / t2**2)
        lam[0, 0] = 0.0
        lam.setflags(write=False)
        object.__setattr__(self, "cell_area", t2 / self.n**2)
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def total_area(self) -> float:
        return self.tau.imag

    def grid_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Lattice coordinates (u, v) of the cell centers, each (n, n)."""
        j = np.arange(self.n) / self.n
        return np.meshgrid(j, j, indexing="ij")

    def embed(self) -> np.ndarray:
        """Complex coordinates z = u + tau*v of the cell centers."""
        u, v = self.grid_coordinates()
        return u + self.tau * v

    def torus_distance(self, dz: np.ndarray) -> np.ndarray:
        """Flat distance on the torus for complex displacements dz."""
        best = np.full(np.shape(dz), np.inf)
        for p in (-1, 0, 1):
            for q in (-1, 0, 1):
                best = np.minimum(best, np.abs(dz + p + self.tau * q))
        return best


@dataclass
class ScalarField:
    """Real field phi = m + phi0 on the grid, with the mean split off.

    ``values`` holds the zero-mean part phi0; ``mean`` the constant m.
    The decomposition phi = m + phi0 is unique and every operation below
    preserves it explicitly.
    """

    geometry: TorusGeometry
    mean: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.geometry.n, self.geometry.n):
            raise ValueError("field shape does not match geometry")
        s = abs(float(self.values.sum()))
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        if s > TOL_MEAN * self.geometry.n**2 * scale:
            raise ValueError("zero-mean part has nonzero sum")

    @classmethod
    def from_grid(cls, geometry: TorusGeometry, grid: np.ndarray) -> "ScalarField":
        """Split an arbitrary grid function into mean + zero-mean parts."""
        grid = np.asarray(grid, dtype=float)
        m = float(grid.mean())
        return cls(geometry, m, grid - m)

    @classmethod
    def constant(cls, geometry: TorusGeometry, c: float) -> "ScalarField":
        return cls(geometry, float(c), np.zeros((geometry.n, geometry.n)))

    @classmethod
    def mode(cls, geometry: TorusGeometry, m: int, n: int, amplitude: float = 1.0,
             phase: float = 0.0) -> "ScalarField":
        """Real part of the (m, n) torus exponential, amplitude*cos(2pi(mu+nv)+phase)."""
        if m == 0 and n == 0:
            return cls.constant(geometry, amplitude * np.cos(phase))
        u, v = geometry.grid_coordinates()
        vals = amplitude * np.cos(2 * np.pi * (m * u + n * v) + phase)
        return cls(geometry, 0.0, vals - vals.mean())

    @property
    def grid(self) -> np.ndarray:
        """Full field values m + phi0 on the grid."""
        return self.mean + self.values

    def spectrum(self) -> np.ndarray:
        """FFT coefficients of the zero-mean part (numpy fft2 convention)."""
        return np.fft.fft2(self.values)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        require_same_geometry(self, other)
        return ScalarField(self.geometry, self.mean + other.mean,
                           self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        require_same_geometry(self, other)
        return ScalarField(self.geometry, self.mean - other.mean,
                           self.values - other.values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.geometry, c * self.mean, c * self.values)

    __rmul__ = __mul__


def require_same_geometry(a, b):
    ga, gb = a.geometry, b.geometry
    if ga.n != gb.n or ga.tau != gb.tau:
        raise GeometryMismatch(
            f"geometry mismatch: (tau={ga.tau}, n={ga.n}) vs (tau={gb.tau}, n={gb.n})")


def apply_multiplier(f: ScalarField, multiplier: np.ndarray) -> ScalarField:
    """Apply a real Fourier multiplier to the zero-mean part; mean untouched."""
    out = np.fft.ifft2(f.spectrum() * multiplier).real
    return ScalarField(f.geometry, f.mean, out - out.mean())


def laplacian(f: ScalarField) -> ScalarField:
    """Flat Laplacian, computed spectrally.  The output has mean part 0."""
    out = np.fft.ifft2(f.spectrum() * (-f.geometry.eigenvalues)).real
    return ScalarField(f.geometry, 0.0, out - out.mean())


def grad_inner(h: ScalarField, phi: ScalarField) -> float:
    """Dirichlet pairing: integral of grad h . grad phi against the flat area.

    Spectral form sum_k lambda_k hhat_k conj(phihat_k); by construction it
    ignores both mean parts, so it is exactly invariant under adding
    constants to either argument.
    """
    require_same_geometry(h, phi)
    g = h.geometry
    acc = np.vdot(h.spectrum() * g.eigenvalues, phi.spectrum()).real
    return float(acc * g.cell_area / g.n**2)


def integrate(f, measure) -> float:
    """Integrate a field (or raw grid) against the flat area form or a measure.

    ``measure`` is either a TorusGeometry (meaning omega_0, each cell weighing
    cell_area) or any object with ``geometry`` and per-cell ``masses``.
    """
    if isinstance(f, ScalarField):
        geom, grid = f.geometry, f.grid
    else:
        grid = np.asarray(f, dtype=float)
        geom = None

    if isinstance(measure, TorusGeometry):
        if geom is not None and (geom.n != measure.n or geom.tau != measure.tau):
            raise GeometryMismatch("field and geometry disagree")
        return float(grid.sum() * measure.cell_area)

    if geom is not None:
        require_same_geometry(f, measure)
    return float((grid * measure.masses).sum())
