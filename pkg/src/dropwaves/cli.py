"""Command-line driver: resonance queries, wave solves, evolution runs,
orbit scans, the structural verification suite, and plot-data emission.

Configuration is TOML with sections [physics], [discretization], [solver],
[output]; unknown sections or keys are rejected.  Artifacts are
deterministic given the config (seeds are explicit and recorded; no
timestamps are written).

Exit codes: 0 success, 2 usage/configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .spherical import SphCoeffs, synthesize_at
from .geometry import State
from .fields import FieldOperators, PhysicalParams, evolve
from .dn import DNOperator
from .resonance import (
    ResonanceData,
    block_determinant,
    restricted_inverse_report,
)
from .solver import (
    BranchPoint,
    SolveConfig,
    SolverError,
    WaveProblem,
    read_branch_jsonl,
    write_branch_csv,
    write_branch_jsonl,
)
from .threads import max_workers
from .verification import run_suite, suite_to_json

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_SCHEMA = {
    "physics": {"sigma0": float},
    "discretization": {"l_max": int, "dn_l_ext_offset": int,
                       "dn_misfit_tol": float},
    "solver": {
        "l0": int, "m0": int, "amplitudes": list, "tol_F": float,
        "tol_constraint": float, "max_iter": int, "symmetry": str,
        "fd_step": float, "seed": int, "m_fold": int,
        "start_direction": list, "n_starts": int, "scan_amplitude": float,
        "dt": float, "t_end": float, "eta0": list, "beta0": list,
        "snapshot_every": int, "log_every": int,
    },
    "output": {"directory": str},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated union of all per-command settings."""

    solve: SolveConfig
    out_dir: str
    n_starts: int = 12
    scan_amplitude: float = 1e-3
    dt: float = 1e-3
    t_end: float = 1.0
    eta0: list = field(default_factory=list)
    beta0: list = field(default_factory=list)
    snapshot_every: int = 0
    log_every: int = 1
    start_direction: list | None = None
    raw: dict = field(default_factory=dict)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}")
    for section, entries in raw.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(entries, dict):
            raise ConfigError(f"section [{section}] must be a table")
        for key in entries:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    phys = raw.get("physics", {})
    disc = raw.get("discretization", {})
    sol = raw.get("solver", {})
    outp = raw.get("output", {})

    kwargs = dict(
        sigma0=float(phys.get("sigma0", 1.0)),
        l0=int(sol.get("l0", 3)),
        m0=int(sol.get("m0", 2)),
        l_max=int(disc.get("l_max", 8)),
        tol_F=float(sol.get("tol_F", 1e-9)),
        tol_constraint=float(sol.get("tol_constraint", 1e-11)),
        max_iter=int(sol.get("max_iter", 30)),
        symmetry=str(sol.get("symmetry", "none")),
        fd_step=float(sol.get("fd_step", 1e-6)),
        dn_l_ext_offset=int(disc.get("dn_l_ext_offset", 4)),
        dn_misfit_tol=float(disc.get("dn_misfit_tol", 1e-6)),
        m_fold=int(sol.get("m_fold", 1)),
        seed=int(sol.get("seed", 0)),
    )
    if "amplitudes" in sol:
        amps = tuple(float(a) for a in sol["amplitudes"])
        if not amps:
            raise ConfigError("amplitude list must not be empty")
        kwargs["amplitudes"] = amps
    try:
        scfg = SolveConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return RunConfig(
        solve=scfg,
        out_dir=str(outp.get("directory", "out")),
        n_starts=int(sol.get("n_starts", 12)),
        scan_amplitude=float(sol.get("scan_amplitude", 1e-3)),
        dt=float(sol.get("dt", 1e-3)),
        t_end=float(sol.get("t_end", 1.0)),
        eta0=sol.get("eta0", []),
        beta0=sol.get("beta0", []),
        snapshot_every=int(sol.get("snapshot_every", 0)),
        log_every=int(sol.get("log_every", 1)),
        start_direction=sol.get("start_direction"),
        raw=raw,
    )


def _coeffs_from_triples(l_max: int, triples) -> SphCoeffs:
    c = SphCoeffs.zeros(l_max)
    for entry in triples:
        if len(entry) != 3:
            raise ConfigError(f"coefficient entry {entry!r} is not [l, m, value]")
        ell, m, val = int(entry[0]), int(entry[1]), float(entry[2])
        c[ell, m] = val
    return c


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_resonance(args) -> int:
    try:
        data = ResonanceData.build(args.l0, args.m0, args.sigma, args.l_max)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = data.to_json_dict()
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_linearize(args) -> int:
    try:
        data = ResonanceData.build(args.l0, args.m0, args.sigma, args.l_max)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    inv = restricted_inverse_report(data, s=args.s)
    blocks = [
        {"l": ell, "m": m,
         "det": block_determinant(data.omega0, args.sigma, ell, m)}
        for ell in range(args.l_max + 1) for m in range(0, ell + 1)
    ]
    report = {
        "resonance": data.to_json_dict(),
        "restricted_inverse": inv,
        "block_determinants": blocks,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(cfg.out_dir, exist_ok=True)
    prob = WaveProblem(cfg.solve)
    direction = (np.asarray(cfg.start_direction, float)
                 if cfg.start_direction else None)
    meta = {
        "config": cfg.raw,
        "omega0": prob.data.omega0,
        "resonance": prob.data.to_json_dict(),
        "seed": cfg.solve.seed,
    }
    points: list[BranchPoint] = []
    failure = None
    try:
        points = prob.branch_continue(direction=direction)
    except SolverError as exc:
        failure = str(exc)
        points = getattr(exc, "partial", points)
    write_branch_jsonl(points, os.path.join(cfg.out_dir, "branch.jsonl"))
    write_branch_csv(points, os.path.join(cfg.out_dir, "branch.csv"))
    meta["n_points"] = len(points)
    meta["failure"] = failure
    _write_json(os.path.join(cfg.out_dir, "meta.json"), meta)
    if failure is not None:
        print(f"solver failure: {failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"branch: {len(points)} points -> {cfg.out_dir}/branch.jsonl")
    return EXIT_OK


def cmd_evolve(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(cfg.out_dir, exist_ok=True)
    l_max = cfg.solve.l_max
    u0 = State(_coeffs_from_triples(l_max, cfg.eta0),
               _coeffs_from_triples(l_max, cfg.beta0))
    dn = DNOperator(l_max, l_ext=l_max + cfg.solve.dn_l_ext_offset,
                    misfit_tol=cfg.solve.dn_misfit_tol)
    ops = FieldOperators(l_max, PhysicalParams(cfg.solve.sigma0), dn=dn)
    log = evolve(u0, ops, dt=cfg.dt, t_end=cfg.t_end,
                 snapshot_every=cfg.snapshot_every, log_every=cfg.log_every)
    log.write_csv(os.path.join(cfg.out_dir, "evolution.csv"))
    if cfg.snapshot_every > 0:
        log.write_snapshots(os.path.join(cfg.out_dir, "snapshots.jsonl"))
    _write_json(os.path.join(cfg.out_dir, "evolution_meta.json"), {
        "config": cfg.raw, "drift": log.drift(), "aborted": log.aborted,
        "steps_recorded": len(log.times),
    })
    if log.aborted:
        print(f"evolution aborted: {log.aborted}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"evolution: {len(log.times)} records -> {cfg.out_dir}/evolution.csv")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = load_config(args.config)
    os.makedirs(cfg.out_dir, exist_ok=True)
    prob = WaveProblem(cfg.solve)
    workers = max_workers()
    classes = prob.orbit_scan(cfg.scan_amplitude, cfg.n_starts, workers=workers)
    report = {
        "a": cfg.scan_amplitude,
        "n_starts": cfg.n_starts,
        "seed": cfg.solve.seed,
        "n_classes": len(classes),
        "classes": [
            {
                "members": len(cls),
                "omega": cls[0].omega,
                "Hs0": cls[0].hamiltonian_sigma0,
                "representative": cls[0].to_json_dict(),
            }
            for cls in classes
        ],
    }
    _write_json(os.path.join(cfg.out_dir, "scan.json"), report)
    print(f"scan: {len(classes)} orbit classes from {cfg.n_starts} starts "
          f"-> {cfg.out_dir}/scan.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suite(l_max=args.l_max, sigma0=args.sigma, seed=args.seed,
                        quick=args.quick)
    report = suite_to_json(results)
    if args.out:
        os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
        _write_json(args.out, report)
    print(json.dumps(report if args.full else {
        "passed": report["passed"],
        "n_checks": report["n_checks"],
        "n_failed": report["n_failed"],
        "failed": [c["name"] for c in report["checks"] if not c["passed"]],
    }, indent=2, sort_keys=True))
    return EXIT_OK if report["passed"] else EXIT_NUMERICAL


def cmd_plotdata(args) -> int:
    try:
        records = read_branch_jsonl(args.branch)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: malformed branch file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not records:
        print("error: branch file is empty", file=sys.stderr)
        return EXIT_USAGE
    meta_path = args.meta or os.path.join(os.path.dirname(args.branch) or ".",
                                          "meta.json")
    try:
        with open(meta_path) as fh:
            omega0 = float(json.load(fh)["omega0"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot obtain omega0 from {meta_path}: {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)

    import csv as _csv
    with open(os.path.join(out_dir, "branch_series.csv"), "w", newline="") as fh:
        wr = _csv.writer(fh)
        wr.writerow(["sqrt_a", "omega_minus_omega0", "eta_norm", "beta_norm",
                     "unorm_over_sqrt_a"])
        for rec in records:
            sa = math.sqrt(rec["a"])
            unorm = rec["eta_norm"] + rec["beta_norm"]
            wr.writerow([f"{sa:.12g}", f"{rec['omega'] - omega0:.12g}",
                         f"{rec['eta_norm']:.12g}", f"{rec['beta_norm']:.12g}",
                         f"{unorm / sa:.12g}"])

    rec = records[args.index]
    eta = SphCoeffs.from_json_dict(rec["state"]["eta"])
    n_phi = args.samples
    phis = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    eq_pts = np.column_stack([np.cos(phis), np.sin(phis), np.zeros(n_phi)])
    thetas = np.linspace(0.0, 2.0 * math.pi, n_phi, endpoint=False)
    mer_pts = np.column_stack([np.sin(thetas), np.zeros(n_phi), np.cos(thetas)])
    r_eq = 1.0 + synthesize_at(eta, eq_pts)
    r_mer = 1.0 + synthesize_at(eta, mer_pts)
    with open(os.path.join(out_dir, "profiles.csv"), "w", newline="") as fh:
        wr = _csv.writer(fh)
        wr.writerow(["angle", "radius_equatorial", "radius_meridional"])
        for i in range(n_phi):
            wr.writerow([f"{phis[i]:.12g}", f"{r_eq[i]:.17g}", f"{r_mer[i]:.17g}"])
    print(f"plot data -> {out_dir}/branch_series.csv, {out_dir}/profiles.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dropwaves",
        description="Rotating traveling waves on a capillary drop: "
                    "resonance analysis, wave solves, Hamiltonian evolution, "
                    "and structural verification.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("resonance", help="resonance set and omega0 for a seed index")
    r.add_argument("--l0", type=int, required=True)
    r.add_argument("--m0", type=int, required=True)
    r.add_argument("--sigma", type=float, default=1.0)
    r.add_argument("--l-max", type=int, default=8)
    r.set_defaults(func=cmd_resonance)

    li = sub.add_parser("linearize", help="linearized-operator diagnostics")
    li.add_argument("--l0", type=int, required=True)
    li.add_argument("--m0", type=int, required=True)
    li.add_argument("--sigma", type=float, default=1.0)
    li.add_argument("--l-max", type=int, default=8)
    li.add_argument("--s", type=float, default=2.0)
    li.set_defaults(func=cmd_linearize)

    so = sub.add_parser("solve", help="branch continuation in amplitude")
    so.add_argument("--config", required=True)
    so.set_defaults(func=cmd_solve)

    ev = sub.add_parser("evolve", help="RK4 evolution with conservation log")
    ev.add_argument("--config", required=True)
    ev.set_defaults(func=cmd_evolve)

    sc = sub.add_parser("scan", help="multi-start orbit scan at fixed amplitude")
    sc.add_argument("--config", required=True)
    sc.set_defaults(func=cmd_scan)

    ve = sub.add_parser("verify", help="structural identity suite")
    ve.add_argument("--l-max", type=int, default=6)
    ve.add_argument("--sigma", type=float, default=1.0)
    ve.add_argument("--seed", type=int, default=0)
    ve.add_argument("--out", default=None, help="write the full JSON matrix here")
    ve.add_argument("--full", action="store_true", help="print every check")
    ve.add_argument("--quick", action="store_true",
                    help="skip the integrator-order and wave-solve checks")
    ve.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plotdata", help="series and profiles from a branch file")
    pl.add_argument("--branch", required=True)
    pl.add_argument("--meta", default=None)
    pl.add_argument("--out", default="plotdata")
    pl.add_argument("--index", type=int, default=-1,
                    help="branch point for the profile sections")
    pl.add_argument("--samples", type=int, default=256)
    pl.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
