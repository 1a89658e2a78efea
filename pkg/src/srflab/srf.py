"""Stochastic Ricci flow on the torus: frozen-coefficient IMEX integrator.

The field h (geometer's normalization, metric e^{2h} |dz|^2) evolves by

    dh = (c(x) Lap h - lam) dt + sigma d(x) dW,

where at each refresh time the coefficients are rebuilt from the current
field's exact-variance chaos density rho = e^{2 h_eps + 2 m - 2 Var_eps}:

    c = rho^{-1} * eps^alpha,   d = rho^{-1/2} * eps^beta.

With these coefficients the observables A_t(f) = integral of f against the
chaos measure satisfy, at refresh times,

    drift of A(f) = 2 * omega0(f Lap h) - 2 lam A(f),
    d<A(f)>       = 4 sigma^2 A(f^2) dt.

Time stepping is implicit in cbar * Lap with cbar = max_x c(x), explicit in
the remainder; the mixed scheme is unconditionally stable since c >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gff import GffSampler, Mollifier
from .gmc import background_charge, gamma_of_sigma, wick_density_log
from .lattice import ScalarField, TorusGeometry, laplacian
from .rng import stream


class BlowUpError(RuntimeError):
    """Field left the resolvable range; carries the partial trajectory."""

    def __init__(self, message: str, record: "TrajectoryRecord"):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class Insertion:
    """Log-singularity of weight alpha at a grid point (u, v) in [0,1)^2."""

    u: float
    v: float
    alpha: float


@dataclass
class SrfConfig:
    sigma: float
    lam: float
    eps: float
    scheme: str = "heat"
    dt: float = 2e-4
    n_steps: int = 500
    refresh_every: int = 1
    alpha_exponent: float = 0.0   # eps^alpha damping on the drift coefficient
    beta_exponent: float = 0.0    # eps^beta damping on the noise coefficient
    flat_coefficients: bool = False   # c = d = 1 override (linear heat SPDE)
    insertions: tuple[Insertion, ...] = ()
    blow_up_bound: float = 50.0
    record_every: int = 1
    absorption_threshold: float | None = None   # default 1e-6 * total area

    def __post_init__(self):
        if self.dt <= 0 or self.n_steps <= 0:
            raise ValueError("dt and n_steps must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.sigma > 0:
            q = background_charge(gamma_of_sigma(self.sigma))
            for ins in self.insertions:
                if ins.alpha >= q:
                    raise ValueError(
                        f"insertion weight {ins.alpha} violates alpha < Q = {q:.4f}")


@dataclass
class TrajectoryRecord:
    """Recorded observables along one SRF path."""

    times: np.ndarray
    observables: dict[str, np.ndarray]
    drift_integrands: dict[str, np.ndarray]   # omega0(f Lap h) per observable
    final_field: ScalarField | None = None
    blew_up: bool = False
    absorbed_at: float | None = None   # first time total mass dipped below threshold
    meta: dict = field(default_factory=dict)


def imex_heat_step(grid: np.ndarray, mean: float, c: np.ndarray, cbar: float,
                   lam: float, dt: float, geometry: TorusGeometry,
                   forcing: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """One step of dh = (c Lap h - lam) dt + forcing, implicit in cbar Lap.

    ``grid`` is the zero-mean part; the spatial mean is advanced separately.
    Returns the new (zero-mean grid, mean).
    """
    lap = laplacian(ScalarField(geometry, 0.0, grid)).values
    rhs = grid + dt * (c - cbar) * lap
    if forcing is not None:
        rhs = rhs + forcing
    hat = np.fft.fft2(rhs)
    hat /= 1.0 + dt * cbar * geometry.eigenvalues
    new = np.fft.ifft2(hat).real
    new_mean = mean - lam * dt + new.mean()
    return new - new.mean(), new_mean


def _insertion_forcing(config: SrfConfig, geometry: TorusGeometry,
                       rho: np.ndarray) -> np.ndarray | None:
    """Pointwise drift so each insertion adds 2 pi gamma alpha_i f(x_i) dt
    to the drift of A(f)."""
    if not config.insertions or config.sigma == 0:
        return None
    gamma = gamma_of_sigma(config.sigma)
    out = np.zeros((geometry.n, geometry.n))
    for ins in config.insertions:
        i = int(round(ins.u * geometry.n)) % geometry.n
        j = int(round(ins.v * geometry.n)) % geometry.n
        out[i, j] += np.pi * gamma * ins.alpha / (geometry.cell_area * rho[i, j])
    return out


@dataclass(frozen=True)
class InsertionDrift:
    """Constant drift each insertion contributes to the observable SDEs."""

    gamma: float
    insertions: tuple[Insertion, ...]

    def rate(self, f: ScalarField) -> float:
        """dA_t(f) gains this constant: 2 pi gamma sum_i alpha_i f(x_i)."""
        n = f.geometry.n
        total = 0.0
        for ins in self.insertions:
            i = int(round(ins.u * n)) % n
            j = int(round(ins.v * n)) % n
            total += ins.alpha * f.grid[i, j]
        return 2.0 * np.pi * self.gamma * total


def insertion_decompose(config: SrfConfig,
                        geometry: TorusGeometry) -> tuple[ScalarField, InsertionDrift]:
    """Split off the static log singularities of the inserted field.

    Returns the zero-mean profile h_sing = sum_i alpha_i G(x_i, .) with G the
    torus Green function 2 pi (-Lap)^{-1} delta, plus the constant drift rates
    the insertions add to each recorded observable.
    """
    gamma = gamma_of_sigma(config.sigma) if config.sigma > 0 else 0.0
    if gamma > 0:
        q = background_charge(gamma)
        for ins in config.insertions:
            if ins.alpha >= q:
                raise ValueError(f"insertion weight {ins.alpha} >= Q = {q:.4f}")
    n = geometry.n
    point_mass = np.zeros((n, n))
    for ins in config.insertions:
        i = int(round(ins.u * n)) % n
        j = int(round(ins.v * n)) % n
        point_mass[i, j] += ins.alpha / geometry.cell_area
    hat = np.fft.fft2(point_mass)
    lam = geometry.eigenvalues.copy()
    lam[0, 0] = 1.0   # zero mode dropped: Green function is mean zero
    hat = 2.0 * np.pi * hat / lam
    hat[0, 0] = 0.0
    values = np.fft.ifft2(hat).real
    return (ScalarField(geometry, 0.0, values - values.mean()),
            InsertionDrift(gamma, config.insertions))


def run_srf(phi0: ScalarField, config: SrfConfig, sampler: GffSampler,
            observables: dict[str, ScalarField] | None = None, seed: int = 0,
            noise_hook=None) -> TrajectoryRecord:
    """Integrate the flow from phi0, recording chaos-measure observables.

    ``sampler`` fixes the reference GFF law used by the exact-variance
    density (its sigma must match config.sigma when sigma > 0).
    ``noise_hook(step, eta)`` receives each standard-normal grid; used to
    couple runs to a linearized solver driven by the same draws.
    """
    geom = phi0.geometry
    if observables is None:
        observables = {"total": ScalarField.constant(geom, 1.0)}
    moll = Mollifier(config.scheme, config.eps)
    moll.check_resolvable(geom)
    rng = stream(seed, 0x5AF)
    grid, mean = phi0.values.copy(), phi0.mean

    times, obs_rows, drift_rows = [], [], []
    names = list(observables)
    f_grids = {k: observables[k].grid for k in names}
    rho = None
    blew_up = False
    noise_scale = config.sigma * np.sqrt(config.dt / geom.cell_area)
    eps_a = config.eps ** config.alpha_exponent
    eps_b = config.eps ** config.beta_exponent

    def drift_row(field_now: ScalarField) -> list[float]:
        # omega0(f Lap h), the reference-measure part of the drift of A(f)
        lap = laplacian(field_now).values
        return [float((f_grids[k] * lap).sum() * geom.cell_area) for k in names]

    a_min = (config.absorption_threshold if config.absorption_threshold is not None
             else 1e-6 * geom.total_area)
    absorbed_at = None

    for step in range(config.n_steps + 1):
        field_now = ScalarField(geom, mean, grid)
        if not np.isfinite(grid).all() or np.abs(grid).max() + abs(mean) > config.blow_up_bound:
            blew_up = True
            break

        measure_rho = np.exp(wick_density_log(field_now, moll, sampler))
        masses = geom.cell_area * measure_rho
        if rho is None or (config.refresh_every and step % config.refresh_every == 0):
            rho = (np.ones((geom.n, geom.n)) if config.flat_coefficients
                   else measure_rho)

        if step % config.record_every == 0:
            times.append(step * config.dt)
            obs_rows.append([float((f_grids[k] * masses).sum()) for k in names])
            drift_rows.append(drift_row(field_now))

        if float(masses.sum()) < a_min:
            absorbed_at = step * config.dt
            break
        if step == config.n_steps:
            break

        c = eps_a / rho
        d = eps_b / np.sqrt(rho)
        cbar = float(c.max())
        eta = rng.standard_normal((geom.n, geom.n))
        if noise_hook is not None:
            noise_hook(step, eta)
        forcing = noise_scale * d * eta
        # Ito counterterm for the mean mode: the measure responds to the mean
        # exponentially, so the per-step variance of the noise's spatial mean
        # would pump e^{2m} at rate 2 Var; subtracting it keeps the total-mass
        # drift at its -2 lam A target.  Exact because the mean mode passes
        # through the mollifier untouched.
        forcing -= noise_scale**2 * (d**2).sum() / geom.n**4
        ins = _insertion_forcing(config, geom, rho)
        if ins is not None:
            forcing = forcing + config.dt * ins
        grid, mean = imex_heat_step(grid, mean, c, cbar, config.lam, config.dt,
                                    geom, forcing)

    final = None if blew_up else ScalarField(geom, mean, grid)
    rec = TrajectoryRecord(
        times=np.asarray(times),
        observables={k: np.asarray([r[i] for r in obs_rows]) for i, k in enumerate(names)},
        drift_integrands={k: np.asarray([r[i] for r in drift_rows]) for i, k in enumerate(names)},
        final_field=final, blew_up=blew_up, absorbed_at=absorbed_at,
        meta={"dt": config.dt, "sigma": config.sigma, "lam": config.lam,
              "eps": config.eps, "scheme": config.scheme, "seed": seed},
    )
    if blew_up:
        raise BlowUpError("field exceeded the resolvable range", rec)
    return rec
