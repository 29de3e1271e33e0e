"""Batch front-end: `ddmatom {solve,scan,hs-limit,ncrit,vm-table}`.

Parameters come from an optional key = value config file (one section per subcommand plus
an [scf] section) and are overridden by flags. Every output embeds the resolved config.
Exit codes: 0 ok, 1 configuration error, 2 numerical failure (non-convergence, sizing).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .hyperstrong import hs_convergence_study
from .ionization import BracketError, find_ncrit
from .meanfield import density3d
from .potentials import cached_table, table_cache_key, vm_channels
from .scf import GridSizingError, ScfConfig, SolveReport, energy_curve, scf_solve, solve_on_table

log = logging.getLogger("ddmatom")

CACHE_ENV = "DDMATOM_CACHE"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# parameter name -> (type, default); None default means required
_PARAMS = {
    "solve": {"N": (float, None), "Z": (float, None), "B": (float, None),
              "density_csv": (str, ""), "raster_csv": (str, ""),
              "raster_r": (float, 0.0), "raster_points": (int, 41)},
    "scan": {"param": (str, "N"), "values": (str, None), "N": (float, 0.0), "Z": (float, 0.0),
             "B": (float, 0.0), "workers": (int, 1)},
    "hs-limit": {"lambda": (float, None), "Z": (float, 1.0), "etas": (str, None)},
    "ncrit": {"Z": (float, None), "B": (float, None), "tol_N": (float, 1e-3), "cap": (float, 8.0)},
    "vm-table": {"B": (float, None), "max_m": (int, None), "zmax": (float, None), "points": (int, None)},
}
_SCF_KEYS = {f.name: f.type for f in fields(ScfConfig) if f.name != "cache_dir"}
_POSITIVE = {"N", "Z", "B", "lambda", "tol_N", "cap", "zmax"}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    scf: dict = field(default_factory=dict)
    output: str = ""
    format: str = "json"

    def scf_config(self) -> ScfConfig:
        try:
            return ScfConfig(cache_dir=os.environ.get(CACHE_ENV) or None, **self.scf)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[scf] {exc}") from exc

    def echo(self) -> dict:
        return asdict(self)

    @classmethod
    def from_echo(cls, echo: dict) -> "RunConfig":
        return cls(**echo)


def _float_list(text: str, name: str) -> list[float]:
    try:
        vals = [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"invalid value for '{name}': {text!r}") from exc
    if not vals:
        raise ConfigError(f"'{name}' must be a nonempty list")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"'{name}' must be sorted increasing: {text!r}")
    return vals


def _coerce(kind, value, name):
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for '{name}': {value!r}") from exc


def _scf_value(name, value):
    kind = _SCF_KEYS[name]
    if "int" in str(kind):
        return _coerce(int, value, name)
    return _coerce(float, value, name)


def resolve_config(command: str, file_values: dict, file_scf: dict, flags: dict, scf_flags: dict,
                   output: str = "", fmt: str = "json") -> RunConfig:
    schema = _PARAMS[command]
    params = {}
    for name, (kind, default) in schema.items():
        raw = flags.get(name)
        if raw is None:
            raw = file_values.get(name.lower(), file_values.get(name))
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required parameter '{name}' for {command}")
            raw = default
        params[name] = _coerce(kind, raw, name)
    for name in _POSITIVE & params.keys():
        val = params[name]
        if command == "scan" and val == 0.0:
            continue
        if not (math.isfinite(val) and val > 0):
            raise ConfigError(f"invalid value for '{name}': {val!r} (must be positive)")
    scf = {}
    for source in (file_scf, scf_flags):
        for k, v in source.items():
            if v is None:
                continue
            if k not in _SCF_KEYS:
                raise ConfigError(f"unknown [scf] key '{k}'")
            scf[k] = _scf_value(k, v)
    cfg = RunConfig(command, params, scf, output or "", fmt)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    p = cfg.params
    if cfg.format not in ("json", "csv"):
        raise ConfigError(f"invalid value for 'format': {cfg.format!r}")
    if cfg.command == "scan":
        if p["param"] not in ("N", "Z", "B"):
            raise ConfigError(f"invalid value for 'param': {p['param']!r} (N, Z or B)")
        vals = _float_list(p["values"], "values")
        if any(not (v > 0) for v in vals):
            raise ConfigError("invalid value for 'values': entries must be positive")
        for name in ("N", "Z", "B"):
            if name != p["param"] and not p[name] > 0:
                raise ConfigError(f"invalid value for '{name}': {p[name]!r} (must be positive)")
        if p["workers"] < 1:
            raise ConfigError("invalid value for 'workers': must be >= 1")
    if cfg.command == "hs-limit":
        etas = _float_list(p["etas"], "etas")
        if etas[0] <= 1:
            raise ConfigError("invalid value for 'etas': entries must exceed 1")
    if cfg.command == "vm-table":
        if p["max_m"] < 0:
            raise ConfigError("invalid value for 'max_m': must be >= 0")
        if p["points"] < 2:
            raise ConfigError("invalid value for 'points': must be >= 2")
    if cfg.command == "solve" and p["raster_points"] < 2:
        raise ConfigError("invalid value for 'raster_points': must be >= 2")
    cfg.scf_config()


# ---------------------------------------------------------------- serialization

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with every float written to 17 significant digits and keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return _json_str(str(obj))


def _json_str(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    if not path or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def make_record(cfg: RunConfig, result, cache_key: str | None, started: float) -> dict:
    payload = {
        "command": cfg.command,
        "version": __version__,
        "config": cfg.echo(),
        "cache_key": cache_key,
        "result": result,
    }
    return {"payload": payload,
            "provenance": {"started_unix": started, "wall_time_s": time.time() - started}}


# ---------------------------------------------------------------- commands

def _check_converged(rep: SolveReport) -> None:
    if not rep.converged:
        raise NumericalFailure(
            f"SCF did not converge in {rep.iterations} iterations (gap {rep.gap:.3e}, "
            f"density residual {rep.density_residual:.3e})")


def cmd_solve(cfg: RunConfig) -> tuple[dict, list[tuple[str, str]]]:
    p = cfg.params
    scf = cfg.scf_config()
    rep = scf_solve(p["N"], p["Z"], p["B"], scf)
    files = []
    if p["density_csv"]:
        rows = [[ch.m, float(z), float(v)] for ch in rep.channels for z, v in zip(rep.grid.z, ch.density)]
        files.append((p["density_csv"], _csv_text(["m", "z", "rho_m"], rows)))
    if p["raster_csv"]:
        rmax = p["raster_r"] or 4.0 * math.sqrt(2.0 * max(1, math.ceil(p["N"])) / p["B"])
        zmax = rep.grid.half_length
        rs = np.linspace(0.0, rmax, p["raster_points"])
        zs = np.linspace(-zmax, zmax, p["raster_points"])
        pts = np.array([(r, z) for r in rs for z in zs])
        vals = density3d(rep.densities, p["B"], pts)
        files.append((p["raster_csv"], _csv_text(["r", "z", "rho"], [[float(a), float(b), float(c)] for (a, b), c in zip(pts, vals)])))
    result = rep.summary()
    key = table_cache_key(max(1, math.ceil(p["N"] - 1e-12)), p["B"], rep.grid)
    return {"result": result, "cache_key": key, "converged": rep.converged}, files


def _scan_point(args):
    N, Z, B, scf_dict = args
    try:
        rep = scf_solve(N, Z, B, ScfConfig(**scf_dict))
        return _scan_row(N, Z, B, rep, "")
    except Exception as exc:  # recorded in-row, the scan continues
        return _scan_row(N, Z, B, None, f"{type(exc).__name__}: {exc}")


def _scan_row(N, Z, B, rep, error):
    if rep is None:
        nan = float("nan")
        return {"N": N, "Z": Z, "B": B, "kinetic": nan, "attraction": nan, "direct": nan, "total": nan,
                "mu": nan, "dE_dZ": nan, "filled": nan, "occupations": "", "converged": False,
                "iterations": 0, "error": error}
    occ = ";".join(f"{ch.m}:{ch.trace:.12g}" for ch in rep.channels if ch.trace > 0)
    e = rep.energy
    return {"N": N, "Z": Z, "B": B, "kinetic": e.kinetic, "attraction": e.attraction, "direct": e.direct,
            "total": e.total, "mu": rep.mu, "dE_dZ": rep.dE_dZ, "filled": rep.filled, "occupations": occ,
            "converged": rep.converged, "iterations": rep.iterations,
            "error": "" if rep.converged else "not converged"}


def cmd_scan(cfg: RunConfig) -> tuple[dict, list]:
    p = cfg.params
    scf = cfg.scf_config()
    values = _float_list(p["values"], "values")
    which = p["param"]
    rows: list[dict] = []
    if which == "N":
        try:
            reps = energy_curve(p["Z"], p["B"], values, scf)
            rows = [_scan_row(N, p["Z"], p["B"], r, "") for N, r in zip(values, reps)]
        except (GridSizingError, ArithmeticError, RuntimeError) as exc:
            rows = [_scan_row(N, p["Z"], p["B"], None, f"{type(exc).__name__}: {exc}") for N in values]
    elif which == "Z":
        # one box for the whole sweep: sized at the smallest Z (the widest atom)
        M = max(1, math.ceil(p["N"] - 1e-12))
        grid = scf_solve(p["N"], values[0], p["B"], scf).grid
        table = cached_table(M, p["B"], grid, scf.cache_dir)
        prev = None
        for Z in values:
            try:
                rep = solve_on_table(p["N"], Z, table, scf, initial=prev)
                rows.append(_scan_row(p["N"], Z, p["B"], rep, ""))
                prev = rep
            except Exception as exc:
                rows.append(_scan_row(p["N"], Z, p["B"], None, f"{type(exc).__name__}: {exc}"))
    else:
        jobs = [(p["N"], p["Z"], B, cfg.scf) for B in values]
        if p["workers"] > 1:
            with ProcessPoolExecutor(max_workers=p["workers"]) as pool:
                rows = list(pool.map(_scan_point, jobs))  # map keeps input order
        else:
            rows = [_scan_point(j) for j in jobs]
    return {"result": {"rows": rows}, "cache_key": None}, []


def cmd_hs_limit(cfg: RunConfig) -> tuple[dict, list]:
    p = cfg.params
    rows = hs_convergence_study(p["lambda"], p["Z"], _float_list(p["etas"], "etas"), cfg.scf_config())
    return {"result": {"rows": rows}, "cache_key": None}, []


def cmd_ncrit(cfg: RunConfig) -> tuple[dict, list]:
    p = cfg.params
    rep = find_ncrit(p["Z"], p["B"], p["tol_N"], cfg.scf_config(), cap=p["cap"])
    return {"result": rep.summary(), "cache_key": rep.table.cache_key()}, []


def cmd_vm_table(cfg: RunConfig) -> tuple[dict, list]:
    p = cfg.params
    z = np.linspace(0.0, p["zmax"], p["points"])
    v = vm_channels(p["max_m"], p["B"], z)
    rows = [{"z": float(z[j]), **{f"V_{m}": float(v[m, j]) for m in range(p["max_m"] + 1)}} for j in range(z.size)]
    return {"result": {"rows": rows}, "cache_key": None}, []


COMMANDS = {"solve": cmd_solve, "scan": cmd_scan, "hs-limit": cmd_hs_limit, "ncrit": cmd_ncrit,
            "vm-table": cmd_vm_table}


def render(record: dict, fmt: str) -> str:
    result = record["payload"]["result"]
    if fmt == "csv" and isinstance(result, dict) and "rows" in result:
        rows = result["rows"]
        header = list(rows[0].keys()) if rows else []
        return _csv_text(header, [[r[h] for h in header] for r in rows])
    return dumps(record) + "\n"


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddmatom", description="DDM functional for atoms in strong magnetic fields")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--output", "-o", default="", help="output path (default stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default=None)
        sp.add_argument("--energy-tol", dest="scf_energy_tol", type=str)
        sp.add_argument("--density-tol", dest="scf_density_tol", type=str)
        sp.add_argument("--max-iter", dest="scf_max_iter", type=str)
        sp.add_argument("--eigen-count", dest="scf_eigen_count", type=str)
        sp.add_argument("--half-length", dest="scf_half_length", type=str)
        sp.add_argument("--points-z", dest="scf_n_points", type=str)
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("solve", help="single minimization")
    common(sp)
    sp.add_argument("--n", dest="N")
    sp.add_argument("--z", dest="Z")
    sp.add_argument("--b", dest="B")
    sp.add_argument("--density-csv", dest="density_csv")
    sp.add_argument("--raster-csv", dest="raster_csv")
    sp.add_argument("--raster-r", dest="raster_r")
    sp.add_argument("--raster-points", dest="raster_points")

    sp = sub.add_parser("scan", help="sweep over N, Z or B")
    common(sp)
    sp.add_argument("--param", dest="param")
    sp.add_argument("--values", dest="values")
    sp.add_argument("--n", dest="N")
    sp.add_argument("--z", dest="Z")
    sp.add_argument("--b", dest="B")
    sp.add_argument("--workers", dest="workers")

    sp = sub.add_parser("hs-limit", help="DDM vs hyper-strong limit study")
    common(sp)
    sp.add_argument("--lambda", dest="lambda")
    sp.add_argument("--z", dest="Z")
    sp.add_argument("--etas", dest="etas")

    sp = sub.add_parser("ncrit", help="critical particle number")
    common(sp)
    sp.add_argument("--z", dest="Z")
    sp.add_argument("--b", dest="B")
    sp.add_argument("--tol-n", dest="tol_N")
    sp.add_argument("--cap", dest="cap")

    sp = sub.add_parser("vm-table", help="tabulate V_m(z)")
    common(sp)
    sp.add_argument("--b", dest="B")
    sp.add_argument("--max-m", dest="max_m")
    sp.add_argument("--zmax", dest="zmax")
    sp.add_argument("--points", dest="points")
    return ap


def _read_config_file(path: str | None, command: str) -> tuple[dict, dict, dict]:
    if not path:
        return {}, {}, {}
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    sect = dict(cp[command]) if cp.has_section(command) else {}
    scf = dict(cp["scf"]) if cp.has_section("scf") else {}
    out = dict(cp["output"]) if cp.has_section("output") else {}
    return sect, scf, out


def config_from_args(argv: list[str] | None = None) -> tuple[RunConfig, bool]:
    args = build_parser().parse_args(argv)
    ns = vars(args)
    file_vals, file_scf, file_out = _read_config_file(ns.get("config"), args.command)
    flags = {k: v for k, v in ns.items() if k in _PARAMS[args.command] and v is not None}
    scf_flags = {k[4:]: v for k, v in ns.items() if k.startswith("scf_") and v is not None}
    fmt = ns.get("format") or file_out.get("format") or ("csv" if args.command in ("scan", "vm-table") else "json")
    output = ns.get("output") or file_out.get("path", "")
    cfg = resolve_config(args.command, file_vals, file_scf, flags, scf_flags, output, fmt)
    return cfg, bool(ns.get("verbose"))


def run(cfg: RunConfig) -> tuple[dict, int]:
    started = time.time()
    out, files = COMMANDS[cfg.command](cfg)
    record = make_record(cfg, out["result"], out.get("cache_key"), started)
    for path, text in files:
        _write(path, text)
    _write(cfg.output, render(record, cfg.format))
    code = EXIT_OK if out.get("converged", True) else EXIT_NUMERIC
    return record, code


def main(argv: list[str] | None = None) -> int:
    try:
        cfg, verbose = config_from_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _, code = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, GridSizingError, BracketError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if code == EXIT_NUMERIC:
        print("numerical failure: SCF did not converge (best state written)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
