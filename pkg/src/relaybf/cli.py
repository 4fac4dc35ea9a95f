"""Command-line front end.

Two subcommands:

    relaybf design --config net.ini [--method robust] [--rho 0.01] [--seed 0]
                   [--out design.json]
    relaybf sweep  --config net.ini --experiment {power,sep} [--gamma-grid ...]
                   [--trials N] [--rho R] [--seed N] [--out-dir DIR] [--jobs N]
                   [--symbols N] [--per-trial]

Configs are INI files with sections [network], [channels], [uncertainty],
[sweep], [solver]; quantities in dB carry a ``_db`` suffix, everything else
is linear.  Exit codes: 0 success, 1 usage/config error, 2 infeasible design.
The SOLVER_TOL environment variable overrides the backend tolerances.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .conic import SolveStatus, SolverSettings
from .matrices import build_matrices
from .model import (ChannelStatistics, NetworkConfig, db_to_linear,
                    generate_channels)
from .sim import (SweepReport, power_sweep, sep_sweep, write_aggregate_csv,
                  write_trials_csv)
from .solvers import DesignMethod, design
from .uncertainty import derive_bounds

__all__ = ["main", "load_config_file", "ConfigError"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


class ConfigError(Exception):
    """Configuration problem with file/line context when available."""


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog + ": error: " + message)


def _find_line(path: str, key: str) -> int:
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if stripped.lower().startswith(key.lower()) and "=" in stripped:
                    return lineno
    except OSError:
        pass
    return 0


def _floats(text: str) -> list:
    return [float(part) for part in text.replace(",", " ").split()]


class _ConfigReader:
    def __init__(self, parser: configparser.ConfigParser, path: str):
        self.parser = parser
        self.path = path

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def get(self, section, key, convert, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                raise ConfigError(f"{self.path}: missing key '{key}' in [{section}]")
            return default
        raw = self.parser.get(section, key)
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            lineno = _find_line(self.path, key)
            raise ConfigError(
                f"{self.path}:{lineno}: invalid value for '{key}' in "
                f"[{section}]: {raw!r} ({exc})") from exc

    def linear_or_db(self, section, base_key, convert_list=False, default=None,
                     required=False):
        """Read ``key`` (linear) or ``key_db`` (decibel), whichever is present."""
        conv = _floats if convert_list else float
        if self.parser.has_option(section, base_key + "_db"):
            val = self.get(section, base_key + "_db", conv)
            return db_to_linear(np.asarray(val)).tolist() if convert_list \
                else float(db_to_linear(val))
        if self.parser.has_option(section, base_key):
            return self.get(section, base_key, conv)
        if required:
            raise ConfigError(
                f"{self.path}: missing key '{base_key}' (or '{base_key}_db') "
                f"in [{section}]")
        return default


def load_config_file(path: str):
    """Parse an INI config into (NetworkConfig, ChannelStatistics, extras).

    extras carries the optional [uncertainty], [sweep] and [solver] values.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    reader = _ConfigReader(parser, path)
    for section in ("network", "channels"):
        if not parser.has_section(section):
            raise ConfigError(f"{path}: missing required section [{section}]")

    num_users = reader.get("network", "num_users", int, required=True)
    powers = reader.get("network", "source_powers", _floats, required=True)
    if len(powers) == 1:
        powers = powers * num_users
    targets = reader.linear_or_db("network", "sinr_targets", convert_list=True,
                                  required=True)
    targets = list(np.atleast_1d(targets))
    if len(targets) == 1:
        targets = targets * num_users
    try:
        config = NetworkConfig(
            num_relays=reader.get("network", "num_relays", int, required=True),
            num_users=num_users,
            source_powers=np.asarray(powers),
            relay_noise_var=reader.linear_or_db("network", "relay_noise_var",
                                                required=True),
            dest_noise_var=reader.linear_or_db("network", "dest_noise_var",
                                               required=True),
            sinr_targets=np.asarray(targets),
        )
        stats = ChannelStatistics(
            var_f=reader.linear_or_db("channels", "var_f", required=True),
            var_g=reader.linear_or_db("channels", "var_g", required=True),
            distribution=reader.get("channels", "distribution", str,
                                    default="rayleigh_iid"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    extras = {
        "rho": reader.get("uncertainty", "relative_level", float, default=0.0)
        if parser.has_section("uncertainty") else 0.0,
        "gamma_grid_db": reader.get("sweep", "gamma_grid_db", _floats,
                                    default=None)
        if parser.has_section("sweep") else None,
        "trials": reader.get("sweep", "trials", int, default=None)
        if parser.has_section("sweep") else None,
        "symbols_per_trial": reader.get("sweep", "symbols_per_trial", int,
                                        default=None)
        if parser.has_section("sweep") else None,
        "methods": reader.get("sweep", "methods",
                              lambda s: [DesignMethod(x.strip()) for x in
                                         s.replace(",", " ").split()],
                              default=None)
        if parser.has_section("sweep") else None,
        "settings": _solver_settings(reader) if parser.has_section("solver")
        else None,
        "snapshot": {s: dict(parser.items(s)) for s in parser.sections()},
    }
    return config, stats, extras


def _solver_settings(reader: _ConfigReader) -> SolverSettings:
    base = SolverSettings()
    return SolverSettings(
        max_iterations=reader.get("solver", "max_iterations", int,
                                  default=base.max_iterations),
        feas_tol=reader.get("solver", "feas_tol", float, default=base.feas_tol),
        gap_rel_tol=reader.get("solver", "gap_rel_tol", float,
                               default=base.gap_rel_tol),
        gap_abs_tol=reader.get("solver", "gap_abs_tol", float,
                               default=base.gap_abs_tol),
    )


def _effective_settings(extras) -> SolverSettings:
    settings = extras.get("settings") or SolverSettings()
    tol = os.environ.get("SOLVER_TOL")
    if tol:
        try:
            tol = float(tol)
        except ValueError as exc:
            raise ConfigError(f"invalid SOLVER_TOL: {exc}") from exc
        settings = SolverSettings(max_iterations=settings.max_iterations,
                                  feas_tol=tol, gap_rel_tol=tol,
                                  gap_abs_tol=tol)
    return settings


def _complex_to_json(arr: np.ndarray):
    arr = np.asarray(arr)
    return {"re": np.real(arr).tolist(), "im": np.imag(arr).tolist()}


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# design

def cmd_design(args) -> int:
    config, stats, extras = load_config_file(args.config)
    rho = args.rho if args.rho is not None else extras["rho"]
    settings = _effective_settings(extras)

    channels = generate_channels(stats, config, args.seed)
    m = build_matrices(channels, config)
    bounds = derive_bounds(m, rho)
    method = DesignMethod(args.method)
    sol = design(method, m, bounds, config, seed=args.seed, settings=settings)

    if sol.status is not SolveStatus.OPTIMAL:
        print(f"method={method.value} status={sol.status.value}")
        return EXIT_INFEASIBLE if sol.status is SolveStatus.INFEASIBLE \
            else EXIT_ERROR

    print(f"method={method.value} status=optimal")
    print(f"objective_w={sol.objective_rank1:.10g} "
          f"(relaxed {sol.objective_relaxed:.10g})")
    print(f"rank_numeric={sol.rank_numeric}")
    for k, val in enumerate(sol.nominal_sinr):
        print(f"sinr_user{k}={val:.10g} ({10*np.log10(val):.4f} dB, "
              f"target {config.sinr_targets[k]:.10g})")

    if args.out:
        payload = {
            "tool": "relaybf",
            "version": __version__,
            "method": method.value,
            "status": sol.status.value,
            "seed": args.seed,
            "rho": rho,
            "objective_relaxed_w": sol.objective_relaxed,
            "objective_rank1_w": sol.objective_rank1,
            "rank_numeric": sol.rank_numeric,
            "nominal_sinr": [float(x) for x in sol.nominal_sinr],
            "weights": _complex_to_json(sol.weights),
            "gram": _complex_to_json(sol.gram),
        }
        _atomic_write(args.out, json.dumps(payload, sort_keys=True, indent=1)
                      + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _manifest(args, extras, experiment, gamma_grid, trials, symbols, methods,
              outputs):
    stable = {
        "tool": "relaybf",
        "version": __version__,
        "experiment": experiment,
        "config": extras["snapshot"],
        "rho": args.rho if args.rho is not None else extras["rho"],
        "gamma_grid_db": list(gamma_grid),
        "trials": trials,
        "symbols_per_trial": symbols,
        "methods": [m.value for m in methods],
        "seed": args.seed,
        "outputs": outputs,
    }
    digest = hashlib.sha256(_canonical_json(stable).encode()).hexdigest()
    manifest = dict(stable)
    manifest["manifest_hash"] = digest
    manifest["jobs"] = args.jobs
    return manifest, digest


def cmd_sweep(args) -> int:
    config, stats, extras = load_config_file(args.config)
    rho = args.rho if args.rho is not None else extras["rho"]
    settings = _effective_settings(extras)

    gamma_grid = _floats(args.gamma_grid) if args.gamma_grid \
        else extras["gamma_grid_db"]
    if not gamma_grid:
        raise ConfigError("no gamma grid: pass --gamma-grid or set "
                          "[sweep] gamma_grid_db")
    trials = args.trials if args.trials is not None else (extras["trials"] or 1)
    symbols = args.symbols if args.symbols is not None \
        else (extras["symbols_per_trial"] or 2000)
    methods = extras["methods"] or list(DesignMethod)

    out_dir = args.out_dir
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_ERROR

    csv_name = f"{args.experiment}_sweep.csv"
    trials_name = f"{args.experiment}_sweep_trials.csv"
    manifest_name = f"{args.experiment}_sweep_manifest.json"
    outputs = [csv_name] + ([trials_name] if args.per_trial else [])
    manifest, digest = _manifest(args, extras, args.experiment, gamma_grid,
                                 trials, symbols if args.experiment == "sep"
                                 else 0, methods, outputs)

    t0 = time.monotonic()
    merged = None
    for gamma_db in gamma_grid:
        if args.experiment == "power":
            rep = power_sweep(config, stats, rho, [gamma_db], trials, methods,
                              args.seed, jobs=args.jobs, settings=settings)
        else:
            rep = sep_sweep(config, stats, rho, [gamma_db], trials, symbols,
                            methods, args.seed, jobs=args.jobs,
                            settings=settings)
        if merged is None:
            merged = rep
        else:
            merged.records.extend(rep.records)
            merged.aggregates.extend(rep.aggregates)
        agg = rep.aggregates[-1]
        line = (f"gamma={gamma_db:g} dB done: feasibility="
                f"{[f'{a.feasibility:.2f}' for a in rep.aggregates]}")
        print(line, file=sys.stderr)
    merged.gamma_grid_db = tuple(float(g) for g in gamma_grid)

    import io
    buf = io.StringIO()
    write_aggregate_csv(merged, buf, manifest_hash=digest)
    _atomic_write(os.path.join(out_dir, csv_name), buf.getvalue())
    if args.per_trial:
        buf = io.StringIO()
        write_trials_csv(merged, buf, manifest_hash=digest)
        _atomic_write(os.path.join(out_dir, trials_name), buf.getvalue())
    manifest["wall_clock_s"] = round(time.monotonic() - t0, 3)
    _atomic_write(os.path.join(out_dir, manifest_name),
                  json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="relaybf",
                     description="Minimum-power relay beamforming designs "
                                 "and Monte-Carlo experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="solve one instance")
    p_design.add_argument("--config", required=True)
    p_design.add_argument("--method", default="nonrobust",
                          choices=[m.value for m in DesignMethod])
    p_design.add_argument("--seed", type=int, default=0)
    p_design.add_argument("--rho", type=float, default=None,
                          help="relative uncertainty level (overrides config)")
    p_design.add_argument("--out", default=None,
                          help="write weights and Gram matrix as JSON")
    p_design.set_defaults(func=cmd_design)

    p_sweep = sub.add_parser("sweep", help="run a Monte-Carlo sweep")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--experiment", required=True,
                         choices=["power", "sep"])
    p_sweep.add_argument("--gamma-grid", default=None,
                         help="comma-separated targets in dB (overrides config)")
    p_sweep.add_argument("--trials", type=int, default=None)
    p_sweep.add_argument("--rho", type=float, default=None)
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.add_argument("--symbols", type=int, default=None,
                         help="symbols per trial (sep experiment)")
    p_sweep.add_argument("--out-dir", default=".")
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_sweep.add_argument("--per-trial", action="store_true",
                         help="also write the per-trial CSV")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_ERROR
        return EXIT_ERROR if exc.code else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # backend/runtime failures must not traceback
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
