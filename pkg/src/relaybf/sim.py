"""Monte-Carlo experiment engines: power-vs-target and SEP-vs-power sweeps.

Trials are independent tasks seeded from (base seed, trial index), so serial
and parallel execution produce identical reports.  Within a trial, one
channel realization is shared across the swept SINR targets and methods
(common random numbers), and for the symbol-error experiment one admissible
channel perturbation is shared by the robust methods while the non-robust
design is evaluated on unperturbed channels as the benchmark.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conic import SolveStatus, SolverSettings
from .matrices import BeamformingMatrices, build_matrices, sinr
from .model import (ChannelRealization, ChannelStatistics, NetworkConfig,
                    db_to_linear, generate_channels)
from .solvers import DesignMethod, RandomizationSettings, SolverSolution, design
from .uncertainty import UncertaintyBounds, derive_bounds

__all__ = [
    "TrialRecord",
    "MethodAggregate",
    "SweepReport",
    "power_sweep",
    "sep_sweep",
    "simulate_symbol_errors",
    "perturb_channels",
    "write_aggregate_csv",
    "write_trials_csv",
    "AGGREGATE_COLUMNS",
    "TRIAL_COLUMNS",
]

_METHOD_ORDER = [DesignMethod.NONROBUST, DesignMethod.MOM, DesignMethod.ROBUST]
_SYMBOL_CHUNK = 1 << 16


@dataclass(frozen=True)
class TrialRecord:
    gamma_db: float
    trial: int
    method: str
    seed: int
    status: str
    power_relaxed: float
    power_rank1: float
    rank_numeric: int
    nominal_sinr: tuple
    worst_sampled_sinr: float
    sep: float
    symbols: int
    errors: int


@dataclass(frozen=True)
class MethodAggregate:
    gamma_db: float
    method: str
    trials: int
    feasible: int
    feasibility: float
    mean_power_rank1: float
    mean_power_relaxed: float
    sep_mean: float
    sep_max: float
    sep_se: float
    symbols: int


@dataclass
class SweepReport:
    kind: str                      # "power" | "sep"
    config: NetworkConfig
    stats: ChannelStatistics
    rho: float
    gamma_grid_db: tuple
    trials: int
    methods: tuple
    seed: int
    symbols_per_trial: int
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)

    def aggregate(self, gamma_db: float, method: str) -> MethodAggregate:
        for agg in self.aggregates:
            if agg.gamma_db == gamma_db and agg.method == method:
                return agg
        raise KeyError((gamma_db, method))


def _ordered_methods(methods) -> tuple:
    wanted = {DesignMethod(m) for m in methods}
    return tuple(m for m in _METHOD_ORDER if m in wanted)


def _trial_seeds(base_seed: int, trial: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(trial),))
    return ss.generate_state(4, dtype=np.uint64)


def _circular_gaussian(rng, shape, var):
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape)
                                 + 1j * rng.standard_normal(shape))


def perturb_channels(channels: ChannelRealization, m: BeamformingMatrices,
                     bounds: UncertaintyBounds, config: NetworkConfig,
                     stats: ChannelStatistics, seed: int,
                     max_attempts: int = 40):
    """True channels = nominal + small draw, accepted only when every induced
    matrix perturbation lies inside its modeled Frobenius ball.

    Rejected draws retry at 0.8x scale; a zero perturbation (always
    admissible) is the terminal fallback.
    """
    rng = np.random.default_rng(seed)
    if bounds.relative_level == 0.0:
        return channels
    shape = channels.source_to_relay.shape
    scale = 0.25 * bounds.relative_level
    for _ in range(max_attempts):
        df = _circular_gaussian(rng, shape, (scale ** 2) * stats.var_f)
        dg = _circular_gaussian(rng, shape, (scale ** 2) * stats.var_g)
        perturbed = ChannelRealization(channels.source_to_relay + df,
                                       channels.relay_to_dest + dg)
        m2 = build_matrices(perturbed, config)
        if (np.linalg.norm(m2.power_diag - m.power_diag) <= bounds.eps_power
            and np.all(np.linalg.norm(m2.signal - m.signal, axis=(1, 2))
                       <= bounds.eps_signal)
            and np.all(np.linalg.norm(m2.interference - m.interference, axis=(1, 2))
                       <= bounds.eps_interference)
            and np.all(np.linalg.norm(m2.noise_diag - m.noise_diag, axis=1)
                       <= bounds.eps_noise)):
            return perturbed
        scale *= 0.8
    return channels


def simulate_symbol_errors(w: np.ndarray, true_channels: ChannelRealization,
                           config: NetworkConfig, n_symbols: int, seed: int):
    """Coherent BPSK over the two-hop link; returns (errors_per_user, n_symbols).

    Per symbol: sources send s_p = +-sqrt(P_p), relays receive with complex
    Gaussian noise, apply conj(w_r), destinations add their own noise and
    detect sign(Re(y_k / gain_k)) with the true channel gains.
    """
    w = np.asarray(w, dtype=complex)
    f = true_channels.source_to_relay
    g = true_channels.relay_to_dest
    R, d = f.shape
    amp = np.sqrt(config.source_powers)
    gains = np.array([w.conj() @ (g[:, k] * f[:, k]) for k in range(d)])
    if np.any(np.abs(gains) == 0):
        raise ValueError("zero effective channel gain; detector undefined")

    rng = np.random.default_rng(seed)
    errors = np.zeros(d, dtype=np.int64)
    done = 0
    while done < n_symbols:
        n = min(_SYMBOL_CHUNK, n_symbols - done)
        bits = rng.integers(0, 2, size=(d, n))
        s = (2.0 * bits - 1.0) * amp[:, None]
        v = _circular_gaussian(rng, (R, n), config.relay_noise_var)
        noise = _circular_gaussian(rng, (d, n), config.dest_noise_var)
        relay_out = w.conj()[:, None] * (f @ s + v)
        y = g.T @ relay_out + noise
        decision = np.real(y / gains[:, None])
        errors += np.sum((decision > 0) != (s > 0), axis=1)
        done += n
    return errors, n_symbols


def _record_infeasible(gamma_db, trial, method, seed, status) -> TrialRecord:
    return TrialRecord(gamma_db=gamma_db, trial=trial, method=method.value,
                       seed=seed, status=status.value,
                       power_relaxed=float("nan"), power_rank1=float("nan"),
                       rank_numeric=0, nominal_sinr=(), worst_sampled_sinr=float("nan"),
                       sep=float("nan"), symbols=0, errors=0)


def _power_trial(args):
    (config, stats, rho, gamma_grid_db, methods, base_seed, trial,
     settings, rand) = args
    seeds = _trial_seeds(base_seed, trial)
    channels = generate_channels(stats, config, int(seeds[0]))
    records = []
    for gamma_db in gamma_grid_db:
        cfg = config.with_sinr_targets(db_to_linear(gamma_db))
        m = build_matrices(channels, cfg)
        bounds = derive_bounds(m, rho)
        for method in methods:
            sol = design(method, m, bounds, cfg, rand=rand,
                         seed=int(seeds[1]), settings=settings)
            if sol.status is not SolveStatus.OPTIMAL:
                records.append(_record_infeasible(gamma_db, trial, method,
                                                  int(seeds[0]), sol.status))
                continue
            records.append(TrialRecord(
                gamma_db=gamma_db, trial=trial, method=method.value,
                seed=int(seeds[0]), status=sol.status.value,
                power_relaxed=sol.objective_relaxed,
                power_rank1=sol.objective_rank1,
                rank_numeric=sol.rank_numeric,
                nominal_sinr=tuple(float(x) for x in sol.nominal_sinr),
                worst_sampled_sinr=float("nan"), sep=float("nan"),
                symbols=0, errors=0))
    return records


def _sep_trial(args):
    (config, stats, rho, gamma_grid_db, methods, base_seed, trial,
     symbols_per_trial, settings, rand) = args
    seeds = _trial_seeds(base_seed, trial)
    channels = generate_channels(stats, config, int(seeds[0]))
    base_m = build_matrices(channels, config)
    base_bounds = derive_bounds(base_m, rho)
    perturbed = perturb_channels(channels, base_m, base_bounds, config, stats,
                                 int(seeds[2]))
    records = []
    for gi, gamma_db in enumerate(gamma_grid_db):
        cfg = config.with_sinr_targets(db_to_linear(gamma_db))
        m = build_matrices(channels, cfg)
        bounds = derive_bounds(m, rho)
        for mi, method in enumerate(methods):
            sol = design(method, m, bounds, cfg, rand=rand,
                         seed=int(seeds[1]), settings=settings)
            if sol.status is not SolveStatus.OPTIMAL:
                records.append(_record_infeasible(gamma_db, trial, method,
                                                  int(seeds[0]), sol.status))
                continue
            # non-robust benchmark runs on unperturbed channels
            truth = channels if method is DesignMethod.NONROBUST else perturbed
            m_true = build_matrices(truth, cfg)
            sampled_sinr = min(sinr(sol.weights, m_true, cfg, k)
                               for k in range(cfg.num_users))
            errors, n_sym = simulate_symbol_errors(
                sol.weights, truth, cfg, symbols_per_trial,
                seed=[int(seeds[3]), gi, mi])
            records.append(TrialRecord(
                gamma_db=gamma_db, trial=trial, method=method.value,
                seed=int(seeds[0]), status=sol.status.value,
                power_relaxed=sol.objective_relaxed,
                power_rank1=sol.objective_rank1,
                rank_numeric=sol.rank_numeric,
                nominal_sinr=tuple(float(x) for x in sol.nominal_sinr),
                worst_sampled_sinr=float(sampled_sinr),
                sep=float(np.sum(errors)) / (n_sym * cfg.num_users),
                symbols=n_sym, errors=int(np.sum(errors))))
    return records


def _limit_worker_threads():
    # one solver thread per worker; oversubscription costs more than it buys
    os.environ["RAYON_NUM_THREADS"] = "1"
    os.environ["OMP_NUM_THREADS"] = "1"


def _run_trials(task, arg_list, jobs: int):
    if jobs <= 1:
        return [task(a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=jobs,
                             initializer=_limit_worker_threads) as pool:
        return list(pool.map(task, arg_list, chunksize=1))


def _aggregate(report: SweepReport) -> None:
    for gamma_db in report.gamma_grid_db:
        for method in report.methods:
            recs = [r for r in report.records
                    if r.gamma_db == gamma_db and r.method == method.value]
            ok = [r for r in recs if r.status == SolveStatus.OPTIMAL.value]
            feasible = len(ok)
            total_sym = sum(r.symbols * max(len(r.nominal_sinr), 1) for r in ok)
            total_err = sum(r.errors for r in ok)
            if report.kind == "sep" and total_sym > 0:
                p = total_err / total_sym
                sep_mean = p
                sep_max = max(r.sep for r in ok)
                sep_se = math.sqrt(max(p * (1 - p), 0.0) / total_sym)
            else:
                sep_mean = sep_max = sep_se = float("nan")
            report.aggregates.append(MethodAggregate(
                gamma_db=gamma_db, method=method.value, trials=len(recs),
                feasible=feasible,
                feasibility=feasible / len(recs) if recs else float("nan"),
                mean_power_rank1=(sum(r.power_rank1 for r in ok) / feasible
                                  if feasible else float("nan")),
                mean_power_relaxed=(sum(r.power_relaxed for r in ok) / feasible
                                    if feasible else float("nan")),
                sep_mean=sep_mean, sep_max=sep_max, sep_se=sep_se,
                symbols=total_sym))


def power_sweep(config: NetworkConfig, stats: ChannelStatistics, rho: float,
                gamma_grid_db, trials: int, methods, seed: int,
                jobs: int = 1, settings: SolverSettings | None = None,
                rand: RandomizationSettings | None = None) -> SweepReport:
    """Average minimum transmit power versus SINR target over random channels."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gamma_grid_db = tuple(float(g) for g in gamma_grid_db)
    if not gamma_grid_db:
        raise ValueError("gamma grid must be nonempty")
    methods = _ordered_methods(methods)
    report = SweepReport(kind="power", config=config, stats=stats, rho=rho,
                         gamma_grid_db=gamma_grid_db, trials=trials,
                         methods=methods, seed=seed, symbols_per_trial=0)
    args = [(config, stats, rho, gamma_grid_db, methods, seed, t, settings, rand)
            for t in range(trials)]
    for recs in _run_trials(_power_trial, args, jobs):
        report.records.extend(recs)
    _aggregate(report)
    return report


def sep_sweep(config: NetworkConfig, stats: ChannelStatistics, rho: float,
              gamma_grid_db, trials: int, symbols_per_trial: int, methods,
              seed: int, jobs: int = 1, settings: SolverSettings | None = None,
              rand: RandomizationSettings | None = None) -> SweepReport:
    """Symbol error probability paired with average transmit power, sweeping
    the SINR target; designs use nominal matrices, symbols run over true
    (perturbed) channels."""
    if symbols_per_trial < 1000:
        raise ValueError("symbols_per_trial must be >= 1000")
    gamma_grid_db = tuple(float(g) for g in gamma_grid_db)
    if not gamma_grid_db:
        raise ValueError("gamma grid must be nonempty")
    methods = _ordered_methods(methods)
    report = SweepReport(kind="sep", config=config, stats=stats, rho=rho,
                         gamma_grid_db=gamma_grid_db, trials=trials,
                         methods=methods, seed=seed,
                         symbols_per_trial=symbols_per_trial)
    args = [(config, stats, rho, gamma_grid_db, methods, seed, t,
             symbols_per_trial, settings, rand) for t in range(trials)]
    for recs in _run_trials(_sep_trial, args, jobs):
        report.records.extend(recs)
    _aggregate(report)
    return report


# ---------------------------------------------------------------------------
# CSV output

AGGREGATE_COLUMNS = ("method", "gamma_db", "trials", "feasible", "feasibility",
                     "mean_power_w", "mean_power_relaxed_w", "sep_mean",
                     "sep_max", "sep_se", "symbols")
TRIAL_COLUMNS = ("method", "gamma_db", "trial", "seed", "status",
                 "power_rank1_w", "power_relaxed_w", "rank_numeric",
                 "min_nominal_sinr", "worst_sampled_sinr", "sep", "symbols",
                 "errors")


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    return str(x)


def _write(path_or_buf, text: str) -> None:
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w") as fh:
            fh.write(text)


def write_aggregate_csv(report: SweepReport, path_or_buf,
                        manifest_hash: str = "unhashed") -> None:
    """One row per (gamma, method); comment header names columns and manifest."""
    lines = [
        "# relaybf sweep csv v1",
        f"# experiment: {report.kind}",
        f"# manifest_hash: {manifest_hash}",
        "# columns: " + ",".join(AGGREGATE_COLUMNS),
        ",".join(AGGREGATE_COLUMNS),
    ]
    for gamma_db in report.gamma_grid_db:
        for method in report.methods:
            a = report.aggregate(gamma_db, method.value)
            lines.append(",".join(_fmt(x) for x in (
                a.method, a.gamma_db, a.trials, a.feasible, a.feasibility,
                a.mean_power_rank1, a.mean_power_relaxed, a.sep_mean,
                a.sep_max, a.sep_se, a.symbols)))
    _write(path_or_buf, "\n".join(lines) + "\n")


def write_trials_csv(report: SweepReport, path_or_buf,
                     manifest_hash: str = "unhashed") -> None:
    lines = [
        "# relaybf per-trial csv v1",
        f"# experiment: {report.kind}",
        f"# manifest_hash: {manifest_hash}",
        "# columns: " + ",".join(TRIAL_COLUMNS),
        ",".join(TRIAL_COLUMNS),
    ]
    for r in report.records:
        min_sinr = min(r.nominal_sinr) if r.nominal_sinr else float("nan")
        lines.append(",".join(_fmt(x) for x in (
            r.method, r.gamma_db, r.trial, r.seed, r.status, r.power_rank1,
            r.power_relaxed, r.rank_numeric, min_sinr, r.worst_sampled_sinr,
            r.sep, r.symbols, r.errors)))
    _write(path_or_buf, "\n".join(lines) + "\n")
