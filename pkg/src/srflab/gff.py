"""Gaussian free field sampling, mollification, and Cameron-Martin shifts.

The zero-mean GFF with covariance operator (sigma^2/2) (-Laplacian)^{-1} is
sampled exactly in law on the retained Fourier modes: the coefficient of the
orthonormal mode e_k has variance sigma^2 / (2 lambda_k), mode 0 is excluded.

Mollification is a Fourier multiplier: exp(-eps^2 lambda_k / 2) for the heat
kernel, J0(eps sqrt(lambda_k)) for the circle average.  Both have unit mass
(multiplier 1 at k = 0), so the mean part of a field is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .lattice import ScalarField, TorusGeometry, apply_multiplier, grad_inner
from .rng import stream

SIGMA_L1 = 2.0 * np.sqrt(np.pi)   # L^1 threshold for the chaos (gamma = 2)
SIGMA_L2 = np.sqrt(2.0 * np.pi)   # L^2 threshold (gamma = sqrt(2))

HEAT = "heat"
CIRCLE = "circle-average"


@dataclass(frozen=True)
class Mollifier:
    """Regularization scheme at scale eps (in units of the fundamental domain)."""

    scheme: str = HEAT
    eps: float = 0.0

    def __post_init__(self):
        if self.scheme not in (HEAT, CIRCLE):
            raise ValueError(f"unknown mollifier scheme {self.scheme!r}")
        if self.eps <= 0:
            raise ValueError("mollification scale must be positive")

    def check_resolvable(self, geometry: TorusGeometry):
        if self.eps < 2.0 / geometry.n:
            raise ValueError(
                f"eps={self.eps} below grid resolution 2/N={2.0 / geometry.n}")

    def multipliers(self, geometry: TorusGeometry) -> np.ndarray:
        lam = geometry.eigenvalues
        if self.scheme == HEAT:
            return np.exp(-0.5 * self.eps**2 * lam)
        return j0(self.eps * np.sqrt(lam))


def mollify(phi: ScalarField, m: Mollifier) -> ScalarField:
    """Smooth a field at scale eps; the mean part is unchanged."""
    m.check_resolvable(phi.geometry)
    return apply_multiplier(phi, m.multipliers(phi.geometry))


class GffSampler:
    """Sampler for the zero-mean GFF with covariance (sigma^2/2)(-Lap)^{-1}.

    Draws are indexed: ``sample_zero_mean(i)`` is a pure function of
    (seed, i), so ensembles are reproducible under any execution order.
    """

    def __init__(self, geometry: TorusGeometry, sigma: float, seed: int = 0):
        if not 0.0 <= sigma < SIGMA_L1:
            raise ValueError(f"sigma must satisfy 0 <= sigma < 2*sqrt(pi)={SIGMA_L1:.4f}")
        self.geometry = geometry
        self.sigma = sigma
        self.seed = int(seed)
        lam = geometry.eigenvalues
        with np.errstate(divide="ignore", invalid="ignore"):
            sk = sigma / np.sqrt(2.0 * lam)
        sk[0, 0] = 0.0
        # spectral amplitude such that ifft2 of (amp * fft2(white noise))
        # has mode-coefficient variance sigma^2/(2 lambda_k)
        self._amplitude = sk * geometry.n / np.sqrt(geometry.tau.imag)

    def mode_variance(self) -> np.ndarray:
        """Target variance sigma^2/(2 lambda_k) per mode (inf-free; 0 at k=0)."""
        out = self._amplitude**2 * self.geometry.tau.imag / self.geometry.n**2
        return out

    def sample_zero_mean(self, index: int = 0, batch: int | None = None):
        """One field, or a list of ``batch`` independent fields, at draw ``index``."""
        rng = stream(self.seed, 0x6FF, index)
        b = 1 if batch is None else batch
        white = rng.standard_normal((b, self.geometry.n, self.geometry.n))
        spec = np.fft.fft2(white, axes=(-2, -1)) * self._amplitude
        grids = np.fft.ifft2(spec, axes=(-2, -1)).real
        fields = [ScalarField(self.geometry, 0.0, g - g.mean()) for g in grids]
        return fields[0] if batch is None else fields

    def sample_grids(self, index: int, batch: int) -> np.ndarray:
        """Batched zero-mean sample grids, shape (batch, n, n).  Fast path."""
        rng = stream(self.seed, 0x6FF, index)
        white = rng.standard_normal((batch, self.geometry.n, self.geometry.n))
        spec = np.fft.fft2(white, axes=(-2, -1)) * self._amplitude
        grids = np.fft.ifft2(spec, axes=(-2, -1)).real
        return grids - grids.mean(axis=(-2, -1), keepdims=True)

    def mollified_variance(self, m: Mollifier) -> float:
        """Pointwise variance of the eps-mollified field, by exact mode sum.

        On the torus this is x-independent:
        sum_{k != 0} multiplier_k^2 sigma^2/(2 lambda_k) / Im(tau).
        """
        mult = m.multipliers(self.geometry)
        return float((mult**2 * self.mode_variance()).sum() / self.geometry.tau.imag)

    def spectral_inverse_pairing(self, f: ScalarField, g: ScalarField) -> float:
        """<f, (-Lap)^{-1} g> against omega_0, by spectral division."""
        geom = self.geometry
        lam = geom.eigenvalues.copy()
        lam[0, 0] = np.inf
        acc = np.vdot(f.spectrum() / lam, g.spectrum()).real
        return float(acc * geom.cell_area / geom.n**2)


def cm_shift(phi: ScalarField, h: ScalarField, t: float) -> ScalarField:
    """Cameron-Martin translate phi + t*h."""
    return phi + t * h


def cm_log_weight(phi: ScalarField, h: ScalarField, t: float, sigma: float) -> float:
    """Log Radon-Nikodym weight of the shifted GFF law against the original.

    (2t/sigma^2) <grad phi, grad h> - (t^2/sigma^2) <grad h, grad h>; only the
    gradient pairing enters, so constant directions carry zero weight.
    """
    return (2.0 * t / sigma**2) * grad_inner(phi, h) \
        - (t**2 / sigma**2) * grad_inner(h, h)
