"""Experiment runner: config parsing, subcommand dispatch, CSV/JSON artifacts.

Every subcommand writes its tabular results as CSV files whose first line is a
``# schema:`` comment naming the table and schema version, accompanied by a
JSON sidecar (full resolved configuration, seed, package version) and a
MANIFEST file listing the SHA-256 hash of every artifact.

Exit codes: 0 success, 2 invalid configuration, 3 runtime blow-up or
absorption with partial outputs retained, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .gff import SIGMA_L1, GffSampler, Mollifier
from .gmc import build_gmc, eps_cauchy_diagnostic, gamma_of_sigma, mass_moment
from .lattice import ScalarField, TorusGeometry
from .srf import BlowUpError, Insertion, SrfConfig, run_srf
from .totalmass import (
    TotalMassParams,
    classify_boundary,
    hitting_cdf,
    laplace_transform,
    simulate_paths,
)
from .verify import (
    ibp_catalog_residuals,
    qv_regression,
    reference_catalog,
)
from .expansion import ExpansionConfig, dirichlet_energy, solve_phi0

SCHEMA_VERSION = "v1"

_DEFAULTS = {
    "geometry": {"tau_re": "0.0", "tau_im": "1.0", "n": "64"},
    "physics": {"sigma": "0.5", "lam": "0.5", "insertions": ""},
    "scheme": {
        "dt": "2e-4",
        "freeze_every": "1",
        "eps": "0.0625",
        "alpha_exponent": "0.0",
        "beta_exponent": "0.0",
        "mollifier": "heat",
    },
    "run": {"n_replicas": "8", "t_max": "0.05", "seed": "0", "a0": "1.0", "c0": "0.0"},
    "output": {"directory": "out"},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``bound`` names the violated constraint."""

    def __init__(self, bound: str, message: str | None = None):
        super().__init__(message or bound)
        self.bound = bound


@dataclass
class ExperimentConfig:
    """Fully resolved settings for one CLI run."""

    subcommand: str
    tau: complex = 1j
    n: int = 64
    sigma: float = 0.5
    lam: float = 0.5
    insertions: tuple[Insertion, ...] = ()
    dt: float = 2e-4
    freeze_every: int = 1
    eps: float = 0.0625
    alpha_exponent: float = 0.0
    beta_exponent: float = 0.0
    mollifier: str = "heat"
    n_replicas: int = 8
    t_max: float = 0.05
    seed: int = 0
    a0: float = 1.0
    c0: float = 0.0
    directory: str = "out"
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ConfigError("sigma > 0")
        if self.sigma >= SIGMA_L1:
            raise ConfigError("sigma >= 2*sqrt(pi)")
        if self.tau.imag <= 0:
            raise ConfigError("Im(tau) > 0")
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ConfigError("n a power of two >= 2")
        if self.lam < 0:
            raise ConfigError("lam >= 0")
        if self.dt <= 0:
            raise ConfigError("dt > 0")
        if self.eps < 2.0 / self.n:
            raise ConfigError("eps >= 2/n")
        if self.mollifier not in ("heat", "circle-average"):
            raise ConfigError("mollifier in {heat, circle-average}")
        if self.n_replicas < 1:
            raise ConfigError("n_replicas >= 1")
        if self.t_max <= 0:
            raise ConfigError("t_max > 0")
        if self.a0 <= 0 and self.subcommand == "total-mass":
            raise ConfigError("a0 > 0")
        gamma = gamma_of_sigma(self.sigma)
        q = 2.0 / gamma + gamma / 2.0
        for ins in self.insertions:
            if ins.alpha >= q:
                raise ConfigError("insertion alpha < Q")

    def as_dict(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "geometry": {"tau_re": self.tau.real, "tau_im": self.tau.imag, "n": self.n},
            "physics": {
                "sigma": self.sigma,
                "lam": self.lam,
                "insertions": [[i.u, i.v, i.alpha] for i in self.insertions],
            },
            "scheme": {
                "dt": self.dt,
                "freeze_every": self.freeze_every,
                "eps": self.eps,
                "alpha_exponent": self.alpha_exponent,
                "beta_exponent": self.beta_exponent,
                "mollifier": self.mollifier,
            },
            "run": {
                "n_replicas": self.n_replicas,
                "t_max": self.t_max,
                "seed": self.seed,
                "a0": self.a0,
                "c0": self.c0,
            },
            "output": {"directory": self.directory},
            "version": __version__,
        }


def _parse_insertions(text: str) -> tuple[Insertion, ...]:
    text = text.strip()
    if not text:
        return ()
    out = []
    for part in text.split(";"):
        u, v, alpha = (float(x) for x in part.split(","))
        out.append(Insertion(u=u, v=v, alpha=alpha))
    return tuple(out)


def load_config(path: str | None, overrides: list[str], subcommand: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.read_dict(_DEFAULTS)
    if path is not None:
        if not parser.read(path):
            raise ConfigError("config file readable", f"cannot read config file {path!r}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError("override key=value", f"bad override {item!r}")
        key, value = item.split("=", 1)
        if "." in key:
            section, option = key.split(".", 1)
        else:
            section = next(
                (s for s in _DEFAULTS if key in _DEFAULTS[s]), None
            )
            option = key
            if section is None:
                raise ConfigError("known option", f"unknown option {key!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value)
    try:
        cfg = ExperimentConfig(
            subcommand=subcommand,
            tau=complex(
                parser.getfloat("geometry", "tau_re"),
                parser.getfloat("geometry", "tau_im"),
            ),
            n=parser.getint("geometry", "n"),
            sigma=parser.getfloat("physics", "sigma"),
            lam=parser.getfloat("physics", "lam"),
            insertions=_parse_insertions(parser.get("physics", "insertions")),
            dt=parser.getfloat("scheme", "dt"),
            freeze_every=parser.getint("scheme", "freeze_every"),
            eps=parser.getfloat("scheme", "eps"),
            alpha_exponent=parser.getfloat("scheme", "alpha_exponent"),
            beta_exponent=parser.getfloat("scheme", "beta_exponent"),
            mollifier=parser.get("scheme", "mollifier"),
            n_replicas=parser.getint("run", "n_replicas"),
            t_max=parser.getfloat("run", "t_max"),
            seed=parser.getint("run", "seed"),
            a0=parser.getfloat("run", "a0"),
            c0=parser.getfloat("run", "c0"),
            directory=parser.get("output", "directory"),
        )
    except (ValueError, configparser.Error) as exc:
        raise ConfigError("parseable numeric values", str(exc)) from exc
    cfg.validate()
    return cfg


def convert_conventions(values: dict, direction: str) -> dict:
    """Exact algebraic conversion between coupling conventions.

    ``gamma_to_sigma`` maps ``{gamma, mu?}`` to ``{sigma, lam?, q}`` via
    sigma = sqrt(pi) * gamma and lam = pi * mu * gamma**2; ``sigma_to_gamma``
    inverts it.
    """
    if direction == "gamma_to_sigma":
        gamma = float(values["gamma"])
        if gamma <= 0:
            raise ConfigError("gamma > 0")
        out = {"sigma": math.sqrt(math.pi) * gamma, "q": 2.0 / gamma + gamma / 2.0}
        if "mu" in values:
            out["lam"] = math.pi * float(values["mu"]) * gamma**2
        return out
    if direction == "sigma_to_gamma":
        sigma = float(values["sigma"])
        if sigma <= 0:
            raise ConfigError("sigma > 0")
        gamma = sigma / math.sqrt(math.pi)
        out = {"gamma": gamma, "q": 2.0 / gamma + gamma / 2.0}
        if "lam" in values:
            out["mu"] = float(values["lam"]) / (math.pi * gamma**2)
        return out
    raise ConfigError(
        "direction in {gamma_to_sigma, sigma_to_gamma}", f"unknown direction {direction!r}"
    )


def worker_count() -> int:
    value = os.environ.get("SRFLAB_WORKERS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


class ArtifactWriter:
    """Writes CSV/JSON artifacts for one run and maintains the MANIFEST."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.directory = cfg.directory
        self.files: list[str] = []
        os.makedirs(self.directory, exist_ok=True)

    def _register(self, name: str) -> None:
        if name not in self.files:
            self.files.append(name)

    def write_csv(self, name: str, columns: list[str], rows) -> str:
        path = os.path.join(self.directory, name + ".csv")
        with open(path, "w") as fh:
            fh.write(f"# schema: srflab.{name} {SCHEMA_VERSION}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        self._register(name + ".csv")
        return path

    def write_sidecar(self, name: str, extra: dict | None = None) -> str:
        path = os.path.join(self.directory, name + ".json")
        payload = {"config": self.cfg.as_dict(), "schema_version": SCHEMA_VERSION}
        if extra:
            payload.update(extra)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._register(name + ".json")
        return path

    def finalize(self) -> str:
        lines = []
        for name in sorted(self.files):
            digest = _sha256(os.path.join(self.directory, name))
            lines.append(f"{digest}  {name}")
        path = os.path.join(self.directory, "MANIFEST")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        return path


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def verify_manifest(directory: str) -> bool:
    path = os.path.join(directory, "MANIFEST")
    with open(path) as fh:
        for line in fh:
            digest, name = line.strip().split("  ", 1)
            if _sha256(os.path.join(directory, name)) != digest:
                return False
    return True


# --- subcommand implementations -------------------------------------------


def _geometry(cfg: ExperimentConfig) -> TorusGeometry:
    return TorusGeometry(tau=cfg.tau, n=cfg.n)


def _sampler(cfg: ExperimentConfig, geom: TorusGeometry) -> GffSampler:
    return GffSampler(geom, cfg.sigma, seed=cfg.seed)


def cmd_sample_gff(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    geom = _geometry(cfg)
    sampler = _sampler(cfg, geom)
    grids = sampler.sample_grids(0, cfg.n_replicas)
    rows = []
    cell = geom.total_area / geom.n**2
    for r, grid in enumerate(grids):
        l2 = float(np.sqrt(np.sum(grid**2) * cell))
        rows.append([r, float(np.min(grid)), float(np.max(grid)), l2])
    writer.write_csv("gff_summary", ["replica", "min", "max", "l2_norm"], rows)
    np.save(os.path.join(writer.directory, "gff_fields.npy"), grids)
    writer._register("gff_fields.npy")
    writer.write_sidecar("gff_summary")
    return 0


def cmd_build_gmc(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    geom = _geometry(cfg)
    sampler = _sampler(cfg, geom)
    moll = Mollifier(cfg.mollifier, cfg.eps)
    rows = []
    totals = []
    for r in range(cfg.n_replicas):
        phi = ScalarField.from_grid(geom, sampler.sample_grids(r, 1)[0])
        measure = build_gmc(phi, moll, sampler)
        total = measure.total_mass
        totals.append(total)
        rows.append([r, total, float(measure.masses.max())])
    writer.write_csv("gmc_summary", ["replica", "total_mass", "max_cell_mass"], rows)
    est = mass_moment(np.asarray(totals), p=1.0, gamma=gamma_of_sigma(cfg.sigma), seed=cfg.seed)
    writer.write_csv(
        "gmc_moment",
        ["p", "estimate", "ci_low", "ci_high"],
        [[1.0, est.value, est.ci_low, est.ci_high]],
    )
    phi = ScalarField.from_grid(geom, sampler.sample_grids(0, 1)[0])
    one = ScalarField.constant(geom, 1.0)
    eps_list = [cfg.eps * 4, cfg.eps * 2, cfg.eps]
    diffs = eps_cauchy_diagnostic(phi, one, sampler, cfg.mollifier, eps_list)
    writer.write_csv(
        "gmc_eps_convergence",
        ["eps_coarse", "eps_fine", "abs_diff"],
        [[a, b, d] for a, b, d in zip(eps_list, eps_list[1:], diffs)],
    )
    writer.write_sidecar("gmc_summary")
    return 0


def cmd_run_srf(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    geom = _geometry(cfg)
    sampler = _sampler(cfg, geom)
    n_steps = max(1, int(round(cfg.t_max / cfg.dt)))
    srf_cfg = SrfConfig(
        sigma=cfg.sigma,
        lam=cfg.lam,
        eps=cfg.eps,
        scheme=cfg.mollifier,
        dt=cfg.dt,
        n_steps=n_steps,
        refresh_every=cfg.freeze_every,
        alpha_exponent=cfg.alpha_exponent,
        beta_exponent=cfg.beta_exponent,
        insertions=cfg.insertions,
    )
    one = ScalarField.constant(geom, 1.0)
    rows = []
    status = 0

    def one_replica(r: int):
        phi0 = ScalarField.from_grid(geom, sampler.sample_grids(1000 + r, 1)[0])
        try:
            rec = run_srf(phi0, srf_cfg, sampler, observables={"mass": one}, seed=2000 + r)
            return r, rec, None
        except BlowUpError as exc:
            return r, exc.record, "blow_up"

    n_workers = worker_count()
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(one_replica, range(cfg.n_replicas)))
    else:
        results = [one_replica(r) for r in range(cfg.n_replicas)]
    for r, rec, flag in results:
        if flag == "blow_up":
            status = 3
        for t, a in zip(rec.times, rec.observables["mass"]):
            rows.append([r, t, a, int(flag == "blow_up")])
    writer.write_csv("srf_mass", ["replica", "time", "total_mass", "blew_up"], rows)
    writer.write_sidecar("srf_mass", {"n_steps": n_steps, "blow_up": status == 3})
    return status


def cmd_total_mass(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    params = TotalMassParams(sigma=cfg.sigma, lam=cfg.lam, c0=cfg.c0)
    n_record = 50
    record_every = max(1, int(round(cfg.t_max / cfg.dt)) // n_record)
    ens = simulate_paths(
        cfg.a0,
        params,
        t_max=cfg.t_max,
        h=cfg.dt,
        n_paths=cfg.n_replicas,
        seed=cfg.seed,
        record_every=record_every,
    )
    rows = []
    for r in range(ens.paths.shape[0]):
        for t, a in zip(ens.times, ens.paths[r]):
            rows.append([r, float(t), float(a)])
    writer.write_csv("mass_paths", ["replica", "time", "mass"], rows)
    hit_rows = []
    for r, ht in enumerate(ens.hit_times):
        hit_rows.append([r, float(ht) if np.isfinite(ht) else float("nan"), int(np.isfinite(ht))])
    writer.write_csv("hitting_times", ["replica", "hit_time", "hit"], hit_rows)
    mean_rows = [
        [float(t), float(cfg.a0 * np.exp(-2.0 * cfg.lam * t)
                         + (cfg.c0 * t if cfg.lam == 0.0
                            else cfg.c0 * (1.0 - np.exp(-2.0 * cfg.lam * t))
                            / (2.0 * cfg.lam)))]
        for t in ens.times
    ]
    writer.write_csv("mass_oracle", ["time", "mean_mass"], mean_rows)
    scan_rows = []
    for delta in (-1.0, 0.5, 1.0, 2.0, 3.0):
        p_scan = TotalMassParams(sigma=cfg.sigma, lam=cfg.lam,
                                 c0=delta * cfg.sigma**2)
        scan = simulate_paths(cfg.a0, p_scan, t_max=cfg.t_max,
                              h=max(cfg.dt, cfg.t_max / 500), n_paths=200,
                              seed=cfg.seed + 1,
                              record_every=10**9)
        scan_rows.append([delta, scan.hit_fraction, classify_boundary(delta)])
    writer.write_csv("delta_scan", ["delta", "hit_fraction", "boundary_class"],
                     scan_rows)
    if cfg.c0 == 0.0:
        ts = np.linspace(cfg.t_max / 50, cfg.t_max, 50)
        oracle_rows = [[float(t), float(hitting_cdf(t, cfg.a0, params))] for t in ts]
        writer.write_csv("hitting_oracle", ["time", "cdf"], oracle_rows)
        us = [0.5, 1.0, 2.0, 4.0]
        lap_rows = []
        for u in us:
            emp = float(np.mean(np.exp(-u * ens.paths[:, -1])))
            oracle = laplace_transform(u, ens.times[-1], cfg.a0, params)
            lap_rows.append([u, emp, oracle])
        writer.write_csv("laplace_compare", ["u", "empirical", "oracle"], lap_rows)
    writer.write_sidecar(
        "mass_paths",
        {
            "delta": params.delta,
            "boundary_class": classify_boundary(params.delta),
            "hit_fraction": ens.hit_fraction,
        },
    )
    return 0


def cmd_verify_ibp(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    geom = TorusGeometry(tau=cfg.tau, n=min(cfg.n, 32))
    catalog = reference_catalog(geom)
    labels = [
        (g_name, h_name)
        for g_name in ("G1", "G2", "G3")
        for h_name in ("h_const", "h_mode", "h_bump")
    ]
    reports = ibp_catalog_residuals(
        catalog,
        cfg.sigma,
        cfg.lam,
        n_samples=max(1000, cfg.n_replicas),
        seed=cfg.seed,
        eps=max(cfg.eps, 2.0 / geom.n),
        scheme=cfg.mollifier,
    )
    rows = [
        [gn, hn, rep.lhs, rep.rhs, rep.z, rep.n_samples]
        for (gn, hn), rep in zip(labels, reports)
    ]
    writer.write_csv(
        "ibp_residuals", ["functional", "direction", "lhs", "rhs", "z", "n_samples"], rows
    )
    writer.write_sidecar("ibp_residuals")
    return 0


def cmd_verify_qv(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    geom = _geometry(cfg)
    sampler = _sampler(cfg, geom)
    n_steps = max(1, int(round(cfg.t_max / cfg.dt)))
    srf_cfg = SrfConfig(
        sigma=cfg.sigma, lam=cfg.lam, eps=cfg.eps, scheme=cfg.mollifier,
        dt=cfg.dt, n_steps=n_steps,
    )
    one = ScalarField.constant(geom, 1.0)
    fa = ScalarField.constant(geom, 1.0) + ScalarField.mode(geom, 1, 0, amplitude=0.1)
    fa2 = ScalarField.from_grid(geom, fa.grid**2)
    obs = {"one": one, "fa": fa, "fa2": fa2}
    recs = []
    for r in range(cfg.n_replicas):
        phi0 = ScalarField.from_grid(geom, sampler.sample_grids(3000 + r, 1)[0])
        recs.append(run_srf(phi0, srf_cfg, sampler, observables=obs, seed=4000 + r))
    rows = []
    for name, sq_name in (("one", "one"), ("fa", "fa2")):
        rep = qv_regression(recs, name, sq_name, cfg.sigma)
        rows.append([name, rep.slope, rep.slope_stderr, rep.intercept, rep.n_windows])
    writer.write_csv(
        "qv_regression", ["observable", "slope", "slope_stderr", "intercept", "n_windows"], rows
    )
    rep = qv_regression(recs, "fa", "fa2", cfg.sigma)
    writer.write_csv(
        "qv_scatter",
        ["predicted", "realized"],
        [[float(x), float(y)] for x, y in zip(rep.x, rep.y)],
    )
    writer.write_sidecar("qv_regression")
    return 0


def cmd_expand(cfg: ExperimentConfig, writer: ArtifactWriter) -> int:
    geom = _geometry(cfg)
    n_steps = max(1, int(round(cfg.t_max / cfg.dt)))
    exp_cfg = ExpansionConfig(
        lam=cfg.lam, dt=cfg.dt, n_steps=n_steps, eps=cfg.eps, scheme=cfg.mollifier
    )
    phi_init = ScalarField.mode(geom, 1, 0, amplitude=0.1)
    traj = solve_phi0(phi_init, exp_cfg)
    energies = dirichlet_energy(traj)
    rows = [
        [float(t), float(e), float(np.max(np.abs(f.grid)))]
        for t, e, f in zip(traj.times, energies, traj.fields)
    ]
    writer.write_csv("expansion_energy", ["time", "dirichlet_energy", "max_abs"], rows)
    writer.write_sidecar("expansion_energy")
    return 0


def cmd_print_config(cfg: ExperimentConfig) -> int:
    parser = configparser.ConfigParser()
    parser.read_dict(_DEFAULTS)
    parser.write(sys.stdout)
    return 0


_DISPATCH = {
    "sample-gff": cmd_sample_gff,
    "build-gmc": cmd_build_gmc,
    "run-srf": cmd_run_srf,
    "total-mass": cmd_total_mass,
    "verify-ibp": cmd_verify_ibp,
    "verify-qv": cmd_verify_qv,
    "expand": cmd_expand,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srflab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in list(_DISPATCH) + ["print-config"]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config value (section.key=value or key=value)",
        )
        p.add_argument("--out", default=None, help="output directory override")
    conv = sub.add_parser("convert")
    conv.add_argument("direction", choices=["gamma_to_sigma", "sigma_to_gamma"])
    conv.add_argument("pairs", nargs="+", metavar="KEY=VALUE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "convert":
        try:
            values = dict(p.split("=", 1) for p in args.pairs)
            out = convert_conventions(values, args.direction)
        except (ConfigError, ValueError, KeyError) as exc:
            print(json.dumps({"error": str(exc)}), file=sys.stderr)
            return 2
        print(json.dumps(out, sort_keys=True))
        return 0
    try:
        cfg = load_config(args.config, args.overrides, args.subcommand)
        if args.out is not None:
            cfg.directory = args.out
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "bound": exc.bound}), file=sys.stderr)
        return 2
    if args.subcommand == "print-config":
        return cmd_print_config(cfg)
    try:
        writer = ArtifactWriter(cfg)
        status = _DISPATCH[args.subcommand](cfg, writer)
        writer.finalize()
    except OSError as exc:
        print(json.dumps({"error": str(exc), "bound": "io"}), file=sys.stderr)
        return 4
    except BlowUpError:
        try:
            writer.finalize()
        except OSError:
            pass
        return 3
    return status


if __name__ == "__main__":
    sys.exit(main())
