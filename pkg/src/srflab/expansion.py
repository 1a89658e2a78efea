"""Small-noise expansion of the flow: phi = phi0 + sigma phi1 + O(sigma^2).

phi0 solves the deterministic quasilinear flow

    d phi0 / dt = e^{-2 phi0} Lap phi0 - lam,

and phi1 the linearization around it, driven by unit space-time white noise:

    d phi1 / dt = e^{-2 phi0} Lap phi1 - 2 e^{-2 phi0} phi1 Lap phi0 + e^{-phi0} xi.

Both use the same IMEX splitting and noise conventions as the full flow, so
a coupled run (same noise draws) isolates the O(sigma^2) remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gff import Mollifier, mollify
from .lattice import ScalarField, TorusGeometry, grad_inner, laplacian
from .rng import stream
from .srf import imex_heat_step


@dataclass(frozen=True)
class ExpansionConfig:
    lam: float = 0.0
    dt: float = 2e-4
    n_steps: int = 500
    eps: float = 0.05
    scheme: str = "heat"
    blow_up_bound: float = 50.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.dt <= 0 or self.n_steps <= 0:
            raise ValueError("dt and n_steps must be positive")


@dataclass
class FieldTrajectory:
    times: np.ndarray
    fields: list[ScalarField]

    def final(self) -> ScalarField:
        return self.fields[-1]


def decay_horizon(phi_init: ScalarField, target_ratio: float) -> float:
    """Horizon after which the energy of the lam = 0 flow has dropped by
    target_ratio, from the slowest-mode bound: the gradient decays at rate
    at least lam_1 e^{-2 max phi}, lam_1 = 4 pi^2 the lowest eigenvalue."""
    lam1 = float(np.sort(np.unique(phi_init.geometry.eigenvalues))[1])
    peak = float(np.abs(phi_init.grid).max())
    return float(np.log(1.0 / target_ratio) / (lam1 * np.exp(-2.0 * peak)))


def _coefficient(phi: ScalarField, moll: Mollifier) -> np.ndarray:
    """e^{-2 phi} with the field mollified at the configured scale."""
    return np.exp(-2.0 * (mollify(phi, moll).values + phi.mean))


def solve_full(phi_init: ScalarField, cfg: ExpansionConfig, sigma: float,
               seed: int = 0, noise=None,
               cbar_schedule: list[float] | None = None) -> FieldTrajectory:
    """The nonlinear flow at coupling sigma in this module's conventions:
    coefficient e^{-2 phi_eps}, noise sigma e^{-phi} sqrt(dt / cell_area).

    ``noise(step)`` may supply each standard-normal grid; ``cbar_schedule``
    pins the implicit splitting constant per step (shared with a coupled
    linearized run so the two discrete maps differ only through sigma).
    """
    geom = phi_init.geometry
    moll = Mollifier(cfg.scheme, cfg.eps)
    moll.check_resolvable(geom)
    rng = stream(seed, 0xF0)
    grid, mean = phi_init.values.copy(), phi_init.mean
    fields = [ScalarField(geom, mean, grid.copy())]
    scale = sigma * np.sqrt(cfg.dt / geom.cell_area)
    for step in range(cfg.n_steps):
        phi = ScalarField(geom, mean, grid)
        c = _coefficient(phi, moll)
        cbar = (cbar_schedule[step] if cbar_schedule is not None
                else float(c.max()))
        eta = noise(step) if noise is not None else rng.standard_normal((geom.n, geom.n))
        forcing = scale * np.exp(-(phi.values + phi.mean)) * eta
        grid, mean = imex_heat_step(grid, mean, c, cbar, cfg.lam, cfg.dt,
                                    geom, forcing)
        if not np.isfinite(grid).all() or np.abs(grid).max() > cfg.blow_up_bound:
            raise RuntimeError("flow left the resolvable range")
        fields.append(ScalarField(geom, mean, grid.copy()))
    times = cfg.dt * np.arange(cfg.n_steps + 1)
    return FieldTrajectory(times, fields)


def solve_phi0(phi_init: ScalarField, cfg: ExpansionConfig) -> FieldTrajectory:
    """Deterministic flow, implicit in cbar Lap, coefficients per step."""
    geom = phi_init.geometry
    moll = Mollifier(cfg.scheme, cfg.eps)
    moll.check_resolvable(geom)
    grid, mean = phi_init.values.copy(), phi_init.mean
    fields = [ScalarField(geom, mean, grid.copy())]
    for step in range(cfg.n_steps):
        c = _coefficient(ScalarField(geom, mean, grid), moll)
        grid, mean = imex_heat_step(grid, mean, c, float(c.max()), cfg.lam,
                                    cfg.dt, geom)
        if not np.isfinite(grid).all() or np.abs(grid).max() > cfg.blow_up_bound:
            raise RuntimeError("deterministic flow left the resolvable range")
        fields.append(ScalarField(geom, mean, grid.copy()))
    times = cfg.dt * np.arange(cfg.n_steps + 1)
    return FieldTrajectory(times, fields)


def solve_phi1(phi0_traj: FieldTrajectory, cfg: ExpansionConfig, seed: int = 0,
               phi1_init: ScalarField | None = None,
               noise=None) -> FieldTrajectory:
    """Linearized fluctuation field along a phi0 trajectory.

    ``noise(step)`` may supply the standard-normal grid for each step (the
    coupling hook); otherwise draws come from this module's own stream.
    Noise is scaled by e^{-phi0} sqrt(dt / cell_area), the unit-coupling
    version of the flow's convention.
    """
    if len(phi0_traj.fields) != cfg.n_steps + 1:
        raise ValueError("phi0 trajectory does not match the time grid")
    geom = phi0_traj.fields[0].geometry
    moll = Mollifier(cfg.scheme, cfg.eps)
    rng = stream(seed, 0xF1)
    if phi1_init is None:
        phi1_init = ScalarField.constant(geom, 0.0)
    grid, mean = phi1_init.values.copy(), phi1_init.mean
    fields = [ScalarField(geom, mean, grid.copy())]
    scale = np.sqrt(cfg.dt / geom.cell_area)
    for step in range(cfg.n_steps):
        p0 = phi0_traj.fields[step]
        c = _coefficient(p0, moll)
        lap0 = laplacian(p0).values
        # the coefficient e^{-2 phi_eps} responds to the *mollified*
        # fluctuation, so the exact linearization of the step does too
        phi1_eps = mollify(ScalarField(geom, mean, grid), moll)
        reaction = -2.0 * c * (phi1_eps.values + phi1_eps.mean) * lap0
        eta = noise(step) if noise is not None else rng.standard_normal((geom.n, geom.n))
        forcing = cfg.dt * reaction + scale * np.exp(-(p0.values + p0.mean)) * eta
        grid, mean = imex_heat_step(grid, mean, c, float(c.max()), 0.0, cfg.dt,
                                    geom, forcing)
        if not np.isfinite(grid).all() or np.abs(grid).max() > cfg.blow_up_bound:
            raise RuntimeError("fluctuation field left the resolvable range")
        fields.append(ScalarField(geom, mean, grid.copy()))
    return FieldTrajectory(phi0_traj.times.copy(), fields)


def dirichlet_energy(traj: FieldTrajectory) -> np.ndarray:
    """grad_inner(phi, phi) along the trajectory."""
    return np.asarray([grad_inner(f, f) for f in traj.fields])
