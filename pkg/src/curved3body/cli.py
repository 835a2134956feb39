"""Command-line interface: ``curved3body <command> [--config PATH] [flags]``.

Exit codes
----------
0  success
1  a verification threshold was missed (residual, rigidity, scan bound)
2  configuration error; no output files are written
3  singularity or domain guard tripped during computation
4  constraint drift exceeded the integrator tolerance
5  the requested family does not exist for these parameters
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .bifurcation import (
    SweepSpec,
    config_hash,
    default_s_grid,
    f_profile,
    sweep,
    sweep_manifest,
    write_table_csv,
)
from .config import (
    COMMAND_MODELS,
    FamilyModel,
    expand,
    load_json,
    normalize_name,
    set_path,
)
from .dynamics import BodyState3D, PlanarState
from .equilibria import (
    Family,
    ReCandidate,
    classical_lagrange_build,
    equatorial_re_build,
    isosceles_re_build,
    isosceles_re_from_latitude,
    lagrange_equal_mass_build,
    planetary_re_build,
    re_residual,
    restricted_equalmass_re_build,
)
from .errors import DomainError, DriftExceeded, FamilyConstraintError, SingularityError
from .integrator import chord_drift, drift_report, integrate, write_trajectory_csv
from .scans import scan_nonexistence

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SINGULAR, EXIT_DRIFT, EXIT_FAMILY = range(6)


class ConfigError(Exception):
    pass


# --- family dispatch -------------------------------------------------------------


def build_candidate(fm: FamilyModel) -> ReCandidate:
    """Dispatch a validated family description to its builder."""
    fam, k = fm.family, fm.kappa

    def need(name):
        value = getattr(fm, name)
        if value is None:
            raise ConfigError(f"family {fam} needs parameter {name!r}")
        return value

    if fam == Family.ISOSCELES_BAND.value:
        if fm.gamma is not None:
            return isosceles_re_from_latitude(k, fm.gamma, fm.m, fm.branch, fm.hemisphere,
                                              fm.direction)
        return isosceles_re_build(k, need("M"), fm.m, fm.hemisphere, fm.direction)
    if fam == Family.LAGRANGE_EQUAL_MASS.value:
        return lagrange_equal_mass_build(k, fm.m, need("lam") if k > 0 else need("v"), fm.direction)
    if fam == Family.PLANETARY.value:
        return planetary_re_build(k, fm.m, need("r"), fm.direction)
    if fam == Family.RESTRICTED_EQUAL_MASS.value:
        return restricted_equalmass_re_build(k, fm.m, fm.direction)
    if fam == Family.EQUATORIAL_SCALENE.value:
        return equatorial_re_build(k, need("angles"), fm.alpha, fm.m)
    if fam == Family.CLASSICAL_LAGRANGE.value:
        if k != 0:
            raise FamilyConstraintError("the classical Lagrange triangle lives on the plane", "curvature")
        return classical_lagrange_build(fm.masses or [fm.m] * 3, fm.side, fm.direction)
    if fam == Family.GENERAL_RESTRICTED.value:
        M = fm.M if fm.M is not None else fm.m
        if M != fm.m:
            raise FamilyConstraintError(
                "with one negligible mass, an equilateral equilibrium needs equal primaries "
                "(M = m); unequal primaries admit none", "no_solution")
        return restricted_equalmass_re_build(k, fm.m, fm.direction)
    raise ConfigError(f"unknown family {fam!r}")


# --- argument parsing --------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--kappa", type=float)
    p.add_argument("--m", type=float, help="reference / equal mass m")
    p.add_argument("--M", type=float, help="distinguished mass M")
    p.add_argument("--tol", type=float)


def _family_flags(p: argparse.ArgumentParser):
    p.add_argument("--family")
    p.add_argument("--r", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--v", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--branch", choices=("inner", "outer"))
    p.add_argument("--hemisphere", choices=("north", "south"))
    p.add_argument("--angles", type=float, nargs=3)
    p.add_argument("--alpha", type=float)
    p.add_argument("--direction", type=int, choices=(1, -1))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curved3body", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a trajectory")
    _common(p)
    _family_flags(p)
    p.add_argument("--masses", type=float, nargs=3)
    p.add_argument("--candidate", help="candidate JSON to integrate")
    p.add_argument("--periods", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)

    p = sub.add_parser("build-re", help="build a relative equilibrium")
    _common(p)
    _family_flags(p)
    p.add_argument("--masses", type=float, nargs=3)
    p.add_argument("--side", type=float)

    p = sub.add_parser("verify-re", help="check a candidate's residual and rigidity")
    _common(p)
    p.add_argument("--candidate", help="candidate JSON")
    p.add_argument("--periods", type=float)
    p.add_argument("--rho-tol", dest="rho_tol", type=float)

    p = sub.add_parser("sweep", help="sweep a family over kappa and mass ratio")
    _common(p)
    _family_flags(p)
    p.add_argument("--kappa-grid", dest="kappa_grid", type=float, nargs=3,
                   metavar=("START", "STOP", "NUM"))
    p.add_argument("--ratio-grid", dest="ratio_grid", type=float, nargs=3,
                   metavar=("START", "STOP", "NUM"))

    p = sub.add_parser("scan", help="evaluate a nonexistence obstruction on a grid")
    _common(p)
    p.add_argument("--case")
    p.add_argument("--masses", type=float, nargs=3)
    p.add_argument("--margin", type=float)

    p = sub.add_parser("f-profile", help="tabulate the shape function F(s)")
    _common(p)
    p.add_argument("--n", type=int, help="grid subdivisions (s = -k/n)")
    return parser


_FAMILY_KEYS = ("family", "M", "r", "lam", "v", "gamma", "branch", "hemisphere", "angles",
                "alpha", "direction")


def _axis(triple):
    start, stop, num = triple
    if num != int(num):
        raise ConfigError("grid NUM must be an integer")
    return {"start": start, "stop": stop, "num": int(num)}


def effective_config(args) -> dict:
    """The config file contents with command-line flags applied on top."""
    cfg = load_json(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if v is not None}
    cmd = args.command

    if cmd == "build-re":
        for k in _FAMILY_KEYS + ("kappa", "masses", "side", "tol"):
            if k in flags:
                cfg[k] = flags[k]
        if "m" in flags:
            cfg["m"] = flags["m"]
    elif cmd == "simulate":
        if "candidate" in flags:
            cfg["candidate_file"] = flags["candidate"]
        if "family" in flags or "candidate" in cfg:
            for k in _FAMILY_KEYS + ("kappa", "m"):
                if k in flags:
                    set_path(cfg, f"candidate.{k}", flags[k])
        elif "kappa" in flags:
            cfg["kappa"] = flags["kappa"]
        for k in ("masses", "periods", "t_end"):
            if k in flags:
                cfg[k] = flags[k]
        if "tol" in flags:
            set_path(cfg, "integrator.drift_tolerance", flags["tol"])
    elif cmd == "verify-re":
        if "candidate" in flags:
            cfg["candidate_file"] = flags["candidate"]
        for k in ("periods", "tol", "rho_tol"):
            if k in flags:
                cfg[k] = flags[k]
    elif cmd == "sweep":
        if "family" in flags:
            cfg["family"] = flags["family"]
        if "kappa_grid" in flags:
            cfg["kappa_grid"] = _axis(flags["kappa_grid"])
        elif "kappa" in flags:
            cfg["kappa_grid"] = [flags["kappa"]]
        if "ratio_grid" in flags:
            cfg["mass_ratio_grid"] = _axis(flags["ratio_grid"])
        for k in ("m", "r", "lam", "v", "hemisphere", "angles", "alpha", "direction"):
            if k in flags:
                set_path(cfg, f"params.{k}", flags[k])
        if "M" in flags:
            raise ConfigError("sweep takes mass ratios through --ratio-grid, not --M")
        if "tol" in flags:
            cfg["tol"] = flags["tol"]
    elif cmd == "scan":
        for k in ("case", "kappa", "masses", "margin"):
            if k in flags:
                cfg[k] = flags[k]
        if "m" in flags:
            cfg["masses"] = [flags["m"]] * 3
        if "tol" in flags:
            cfg["min_bound"] = flags["tol"]
    elif cmd == "f-profile":
        if "n" in flags:
            cfg["n"] = flags["n"]
    return cfg


# --- output helpers ----------------------------------------------------------------


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _finite_or_none(x):
    return float(x) if x is not None and math.isfinite(x) else None


def _load_candidate(path_or_dict) -> ReCandidate:
    if isinstance(path_or_dict, dict):
        data = path_or_dict
    else:
        data = json.loads(Path(path_or_dict).read_text(encoding="utf-8"))
    for key in ("config_sha256", "config"):
        data.pop(key, None)
    try:
        return ReCandidate.from_dict(data)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid candidate: {exc}") from exc


# --- commands -----------------------------------------------------------------------


def _initial(cfg):
    """(kappa, masses, state, period or None) for a simulate config."""
    if cfg.state is not None:
        st = cfg.state
        if st.formulation == "reduced":
            state = PlanarState(np.array(st.pos), np.array(st.vel))
        else:
            state = BodyState3D(np.array(st.pos), np.array(st.vel))
        return cfg.kappa, cfg.masses, state, None
    cand = build_candidate(cfg.candidate) if cfg.candidate else _load_candidate(cfg.candidate_file)
    return cand.kappa, cand.masses, cand.initial_state(), cand.period


def cmd_simulate(cfg, out: Path, chash: str, eff: dict) -> int:
    kappa, masses, state, period = _initial(cfg)
    t_end = cfg.t_end if cfg.t_end is not None else cfg.periods * period
    summary = {"config_sha256": chash, "config": eff, "kappa": kappa, "masses": list(masses),
               "t_end": t_end, "formulation": "extrinsic" if isinstance(state, BodyState3D)
               else "reduced"}
    try:
        traj = integrate(kappa, masses, state, (0.0, t_end), cfg.integrator.options())
    except DriftExceeded as exc:
        _write_json(out / "summary.json", {**summary, "status": "drift_exceeded", "error": str(exc)})
        print(f"drift exceeded: {exc}", file=sys.stderr)
        return EXIT_DRIFT
    h_drift, c3_drift, max_res = drift_report(traj)
    rho = chord_drift(traj)
    summary.update(status="ok", h_drift=h_drift, c3_drift=c3_drift,
                   max_constraint_residual=max_res, rho_drift=rho,
                   n_steps=traj.n_steps, n_samples=len(traj.times))
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(traj, out / "trajectory.csv", chash)
    _write_json(out / "summary.json", summary)
    print(f"h_drift={h_drift:.3e} c3_drift={c3_drift:.3e} "
          f"max_constraint_residual={max_res:.3e} rho_drift={rho:.3e}")
    return EXIT_OK


def cmd_build_re(cfg, out: Path, chash: str, eff: dict) -> int:
    cand = build_candidate(cfg)
    res = re_residual(cand.kappa, cand.masses, cand)
    out.mkdir(parents=True, exist_ok=True)
    doc = cand.to_dict()
    doc.update(residual=res, config_sha256=chash, config=eff)
    _write_json(out / "candidate.json", doc)
    ok = res <= cfg.tol
    print(f"family={cand.family.value} alpha2={cand.alpha2:.17g} residual={res:.3e} "
          f"{'ok' if ok else 'FAILED'} (tol {cfg.tol:.1e})")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_verify_re(cfg, out: Path, chash: str, eff: dict) -> int:
    cand = _load_candidate(cfg.candidate if cfg.candidate is not None else cfg.candidate_file)
    res = re_residual(cand.kappa, cand.masses, cand)
    report = {"config_sha256": chash, "config": eff, "family": cand.family.value,
              "residual": res, "tol": cfg.tol, "periods": cfg.periods}
    ok = res <= cfg.tol
    print(f"residual={res:.3e} {'ok' if ok else 'FAILED'} (tol {cfg.tol:.1e})")
    out.mkdir(parents=True, exist_ok=True)
    if cfg.periods > 0:
        try:
            traj = integrate(cand.kappa, cand.masses, cand.initial_state(),
                             (0.0, cfg.periods * cand.period), cfg.integrator.options())
        except DriftExceeded as exc:
            _write_json(out / "verify.json", {**report, "status": "drift_exceeded", "error": str(exc)})
            print(f"drift exceeded: {exc}", file=sys.stderr)
            return EXIT_DRIFT
        rho = chord_drift(traj)
        h_drift, c3_drift, max_res = drift_report(traj)
        report.update(rho_drift=rho, rho_tol=cfg.rho_tol, h_drift=h_drift, c3_drift=c3_drift,
                      max_constraint_residual=max_res)
        rigid = rho <= cfg.rho_tol
        ok = ok and rigid
        print(f"rho_drift={rho:.3e} over {cfg.periods:g} periods "
              f"{'ok' if rigid else 'FAILED'} (tol {cfg.rho_tol:.1e})")
    report["status"] = "ok" if ok else "failed"
    _write_json(out / "verify.json", report)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(cfg, out: Path, chash: str, eff: dict) -> int:
    try:
        spec = SweepSpec(cfg.family, expand(cfg.kappa_grid), expand(cfg.mass_ratio_grid),
                         tuple(cfg.outputs), dict(cfg.params), cfg.tol)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    rows = sweep(spec)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(rows, out / "sweep.csv", spec.columns(), chash)
    manifest = sweep_manifest(spec, rows, chash)
    manifest["config"] = eff
    _write_json(out / "manifest.json", manifest)
    print(f"{manifest['n_exists']}/{len(rows)} grid points exist")
    return EXIT_OK


def cmd_scan(cfg, out: Path, chash: str, eff: dict) -> int:
    grid = None if cfg.grid is None else {k: expand(v) for k, v in cfg.grid.items()}
    try:
        rep = scan_nonexistence(cfg.case, cfg.kappa, cfg.masses, grid, cfg.margin)
    except DomainError as exc:
        # bad grids (outside the domain, touching an excluded set) are configuration errors
        raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    rep.write_csv(out / "scan.csv", chash)
    summary = rep.summary()
    summary.update(config_sha256=chash, config=eff, min_bound=cfg.min_bound)
    ok = cfg.min_bound is None or rep.min_residual >= cfg.min_bound
    summary["status"] = "ok" if ok else "failed"
    _write_json(out / "scan.json", summary)
    print(f"case={rep.case} points={len(rep.residuals)} min_residual={rep.min_residual:.6g} "
          f"at {rep.argmin}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_f_profile(cfg, out: Path, chash: str, eff: dict) -> int:
    grid = expand(cfg.s_grid) if cfg.s_grid is not None else default_s_grid(cfg.n)
    try:
        rows = [{"s": s, "F": f} for s, f in f_profile(grid)]
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(rows, out / "f_profile.csv", ["s", "F"], chash)
    _write_json(out / "f_profile.json", {"config_sha256": chash, "config": eff,
                                         "n_rows": len(rows), "version": __version__})
    print(f"{len(rows)} rows")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "build-re": cmd_build_re,
    "verify-re": cmd_verify_re,
    "sweep": cmd_sweep,
    "scan": cmd_scan,
    "f-profile": cmd_f_profile,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        eff = effective_config(args)
        if "family" in eff and isinstance(eff["family"], str):
            eff["family"] = normalize_name(eff["family"])
        cfg = COMMAND_MODELS[args.command].model_validate(eff)
        eff = cfg.model_dump(mode="json")
        chash = config_hash(eff)
    except (ConfigError, ValidationError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        return COMMANDS[args.command](cfg, out, chash, eff)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FamilyConstraintError as exc:
        print(f"family constraint ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_FAMILY
    except SingularityError as exc:
        print(f"singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except DomainError as exc:
        print(f"domain guard: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
