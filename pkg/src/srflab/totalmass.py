"""Total-mass diffusion: the one-dimensional projection of the flow.

In the geometer's normalization the total chaos mass A_t solves

    dA = 2 sigma sqrt(A) dbeta - 2 lam A dt + c0 dt,
    c0 = 2 pi gamma (alpha_bar - Q chi),

a square-root (CIR-type) diffusion.  Its effective dimension is

    delta = c0 / sigma^2 = (2 / gamma) (alpha_bar - Q chi):

delta >= 2 never reaches zero, delta in (0, 2) hits zero in finite time,
delta <= 0 hits zero and is absorbed there.  Paths here always stop at the
first hit.  The log-normalization form uses mu and the slow clock s = 2 pi t:

    dA = gamma sqrt(2 A) dbeta - mu gamma^2 A ds + gamma (alpha_bar - Q chi) ds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gmc import background_charge
from .rng import stream


@dataclass(frozen=True)
class TotalMassParams:
    """Coefficients of dA = 2 sigma sqrt(A) dbeta - 2 lam A dt + c0 dt."""

    sigma: float
    lam: float = 0.0
    c0: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def delta(self) -> float:
        return self.c0 / self.sigma**2

    @classmethod
    def from_charges(cls, sigma: float, lam: float, alpha_bar: float,
                     chi: float) -> "TotalMassParams":
        gamma = sigma / np.sqrt(np.pi)
        c0 = 2.0 * np.pi * gamma * (alpha_bar - background_charge(gamma) * chi)
        return cls(sigma, lam, c0)


@dataclass(frozen=True)
class MassSdeConfig:
    """Convention-tagged coefficients of the total-mass diffusion.

    "geometric" carries (sigma, lam) on the fast clock t; "log" carries
    (gamma, mu) on the slow clock s = 2 pi t, where sigma = sqrt(pi) gamma
    and lam = pi mu gamma^2.  Both reduce to the same TotalMassParams on
    their own clock.
    """

    convention: str               # "geometric" | "log"
    coupling: float               # sigma or gamma
    damping: float = 0.0          # lam or mu
    alpha_bar: float = 0.0
    chi: float = 0.0
    a0: float = 1.0

    def __post_init__(self):
        if self.convention not in ("geometric", "log"):
            raise ValueError("convention must be 'geometric' or 'log'")
        if self.coupling <= 0:
            raise ValueError("coupling constant must be positive")
        if self.a0 <= 0:
            raise ValueError("initial mass must be positive")

    @property
    def gamma(self) -> float:
        return (self.coupling / np.sqrt(np.pi) if self.convention == "geometric"
                else self.coupling)

    @property
    def delta(self) -> float:
        return delta_index(self.gamma, self.alpha_bar, self.chi)

    def params(self) -> TotalMassParams:
        """SDE coefficients dA = 2 s sqrt(A) db - 2 l A dt' + c0 dt' on this
        convention's own clock."""
        if self.convention == "geometric":
            sigma, lam = self.coupling, self.damping
            c0 = 2.0 * np.pi * self.gamma * (self.alpha_bar
                                             - background_charge(self.gamma) * self.chi)
        else:
            # dA = gamma sqrt(2A) db - mu gamma^2 A ds + gamma (abar - Q chi) ds
            sigma = self.coupling / np.sqrt(2.0)
            lam = self.damping * self.coupling**2 / 2.0
            c0 = self.coupling * (self.alpha_bar
                                  - background_charge(self.coupling) * self.chi)
        return TotalMassParams(sigma, lam, c0)


NEVER_HITS = "never-hits-zero"
HITS_CONTINUABLE = "hits-zero-continuable"
ABSORBING = "absorbing"


def classify_boundary(cfg: "MassSdeConfig | TotalMassParams | float") -> str:
    """Boundary class of the mass diffusion at 0 by its effective dimension.

    Accepts anything with a ``delta`` attribute, or the dimension itself.
    """
    d = getattr(cfg, "delta", cfg)
    if d >= 2:
        return NEVER_HITS
    if d > 0:
        return HITS_CONTINUABLE
    return ABSORBING


@dataclass(frozen=True)
class SeibergReport:
    local_ok: bool
    global_ok: bool
    delta: float
    violations: tuple[str, ...]


def seiberg_check(cfg: MassSdeConfig,
                  weights: tuple[float, ...] = ()) -> SeibergReport:
    """Local (each alpha_i < Q) and global (alpha_bar - Q chi > 0) bounds."""
    q = background_charge(cfg.gamma)
    violations = []
    local_ok = True
    for i, a in enumerate(weights):
        if a >= q:
            local_ok = False
            violations.append(f"alpha_{i} = {a} >= Q = {q:.4f}")
    excess = cfg.alpha_bar - q * cfg.chi
    global_ok = excess > 0
    if not global_ok:
        violations.append(f"alpha_bar - Q*chi = {excess:.4f} <= 0")
    return SeibergReport(local_ok, global_ok, cfg.delta, tuple(violations))


def delta_index(gamma: float, alpha_bar: float, chi: float) -> float:
    """Effective dimension (2/gamma)(alpha_bar - Q chi) of the mass diffusion."""
    return (2.0 / gamma) * (alpha_bar - background_charge(gamma) * chi)


def laplace_transform(u: float, t: float, a0: float,
                      params: TotalMassParams) -> float:
    """E[exp(-u A_t)] in closed form for c0 = 0 (no charges).

    Solved from the Laplace-exponent Riccati equation; the lam -> 0 limit is
    exp(-a0 u / (1 + 2 sigma^2 u t)).
    """
    if params.c0 != 0.0:
        raise NotImplementedError("closed form implemented for c0 = 0 only")
    s2, lam = params.sigma**2, params.lam
    if lam == 0.0:
        return float(np.exp(-a0 * u / (1.0 + 2.0 * s2 * u * t)))
    g = np.exp(-2.0 * lam * t)
    return float(np.exp(-a0 * lam * u * g / (lam + s2 * u * (1.0 - g))))


def hitting_cdf(t: np.ndarray | float, a0: float,
                params: TotalMassParams) -> np.ndarray | float:
    """P(T_0 <= t) for the c0 = 0 diffusion, the u -> infinity Laplace limit."""
    if params.c0 != 0.0:
        raise NotImplementedError("closed form implemented for c0 = 0 only")
    t = np.asarray(t, dtype=float)
    s2, lam = params.sigma**2, params.lam
    with np.errstate(divide="ignore", over="ignore"):
        if lam == 0.0:
            out = np.exp(-a0 / (2.0 * s2 * np.maximum(t, 0.0)))
        else:
            g = np.exp(-2.0 * lam * t)
            out = np.exp(-a0 * lam * g / (s2 * (1.0 - g)))
    out = np.where(t <= 0, 0.0, out)
    return out if out.ndim else float(out)


@dataclass
class PathEnsemble:
    times: np.ndarray            # (n_times,), the recorded grid
    paths: np.ndarray            # (n_paths, n_times); frozen at 0 after a hit
    hit_times: np.ndarray        # (n_paths,), nan if zero was never reached

    @property
    def hit_fraction(self) -> float:
        return float(np.isfinite(self.hit_times).mean())


def simulate_paths(a0: np.ndarray | float, params: TotalMassParams, t_max: float,
                   h: float, n_paths: int | None = None, seed: int = 0,
                   record_every: int = 1, substep_theta: float = 0.2,
                   adaptive: bool = True) -> PathEnsemble:
    """Euler-Maruyama with full truncation and adaptive substepping near zero.

    Within each global step of size h, a path at level x advances by local
    steps of at most theta^2 x / (4 sigma^2), keeping the one-substep
    diffusive displacement below theta * x.  This makes spurious zero
    crossings (which a fixed step commits at rate ~ sqrt(h) / x) negligible,
    so recorded hits reflect the diffusion itself.  Paths stop at the first
    hit and stay at zero.

    ``adaptive=False`` selects the plain fixed-step scheme that draws one
    normal per path per step regardless of path state; two ensembles with
    the same seed then share their driving noise exactly, which is what the
    monotone-coupling comparison needs.
    """
    a0 = np.atleast_1d(np.asarray(a0, dtype=float))
    if n_paths is None:
        n_paths = len(a0)
    x = np.broadcast_to(a0, (n_paths,)).copy()
    if (x < 0).any():
        raise ValueError("initial mass must be nonnegative")
    rng = stream(seed, 0x70_7A)
    n_steps = int(round(t_max / h))
    h_floor = h * 1e-8
    sigma, lam, c0 = params.sigma, params.lam, params.c0

    rec_times = [0.0]
    rec_paths = [x.copy()]
    hit_times = np.full(n_paths, np.nan)

    if not adaptive:
        for step in range(n_steps):
            xi = rng.standard_normal(n_paths)
            alive = np.isnan(hit_times)
            xn = x + (c0 - 2.0 * lam * x) * h \
                + 2.0 * sigma * np.sqrt(np.maximum(x, 0.0)) * np.sqrt(h) * xi
            hit = alive & (xn <= 0.0)
            hit_times[hit] = (step + 1) * h
            x = np.where(alive, np.maximum(xn, 0.0), x)
            x[hit] = 0.0
            if (step + 1) % record_every == 0:
                rec_times.append((step + 1) * h)
                rec_paths.append(x.copy())
        return PathEnsemble(np.asarray(rec_times), np.stack(rec_paths, axis=1),
                            hit_times)

    for step in range(n_steps):
        t_now = step * h
        alive = np.isnan(hit_times) & (x > 0)
        t_rem = np.where(alive, h, 0.0)
        while True:
            act = np.flatnonzero(t_rem > 0)
            if act.size == 0:
                break
            xa = x[act]
            h_loc = np.minimum(t_rem[act],
                               np.maximum(substep_theta**2 * xa / (4.0 * sigma**2),
                                          h_floor))
            xi = rng.standard_normal(act.size)
            xn = xa + (c0 - 2.0 * lam * xa) * h_loc \
                + 2.0 * sigma * np.sqrt(xa) * np.sqrt(h_loc) * xi
            hit = xn <= 0.0
            xn = np.maximum(xn, 0.0)
            x[act] = xn
            t_rem[act] -= h_loc
            if hit.any():
                hit_idx = act[hit]
                hit_times[hit_idx] = t_now + (h - t_rem[hit_idx])
                t_rem[hit_idx] = 0.0
        if (step + 1) % record_every == 0:
            rec_times.append((step + 1) * h)
            rec_paths.append(x.copy())

    return PathEnsemble(np.asarray(rec_times), np.stack(rec_paths, axis=1),
                        hit_times)


def simulate_mass(cfg: MassSdeConfig, t_max: float, h: float, n_paths: int,
                  seed: int = 0, **kwargs) -> PathEnsemble:
    """Path ensemble for a convention-tagged config, on its own clock."""
    return simulate_paths(cfg.a0, cfg.params(), t_max, h, n_paths=n_paths,
                          seed=seed, **kwargs)
