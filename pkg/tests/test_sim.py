import io

import numpy as np
import pytest
from scipy.special import erfc

from relaybf import (ChannelRealization, ChannelStatistics, DesignMethod,
                     NetworkConfig, build_matrices, derive_bounds, design,
                     generate_channels, power_sweep, sep_sweep, sinr,
                     simulate_symbol_errors, write_aggregate_csv,
                     write_trials_csv)
from relaybf.sim import AGGREGATE_COLUMNS, TRIAL_COLUMNS, perturb_channels


def _paper_config(R=4, d=2, gamma_db=0.0, var=10.0):
    config = NetworkConfig(num_relays=R, num_users=d,
                           source_powers=np.ones(d), relay_noise_var=1.0,
                           dest_noise_var=1.0,
                           sinr_targets=np.full(d, 10 ** (gamma_db / 10)))
    stats = ChannelStatistics(var_f=var, var_g=var)
    return config, stats


def q_function(x):
    return 0.5 * erfc(x / np.sqrt(2.0))


# ---------------------------------------------------------------------------
# power sweep

def test_power_sweep_single_trial_reproducible():
    config, stats = _paper_config()
    kwargs = dict(rho=0.01, gamma_grid_db=[0.0], trials=1,
                  methods=[DesignMethod.NONROBUST], seed=3)
    a = power_sweep(config, stats, **kwargs)
    b = power_sweep(config, stats, **kwargs)
    for writer in (write_aggregate_csv, write_trials_csv):
        buf_a, buf_b = io.StringIO(), io.StringIO()
        writer(a, buf_a)
        writer(b, buf_b)
        assert buf_a.getvalue() == buf_b.getvalue()


def test_power_sweep_zero_rho_collapses_methods():
    config, stats = _paper_config()
    report = power_sweep(config, stats, rho=0.0, gamma_grid_db=[0.0, 3.0],
                         trials=4, methods=list(DesignMethod), seed=1)
    for gamma_db in (0.0, 3.0):
        aggs = {meth.value: report.aggregate(gamma_db, meth.value)
                for meth in DesignMethod}
        ref = aggs["nonrobust"].mean_power_relaxed
        for name in ("mom", "robust"):
            assert aggs[name].mean_power_relaxed == pytest.approx(ref, rel=1e-4)


def test_power_sweep_ordering_on_jointly_feasible_trials():
    config, stats = _paper_config(R=6)
    report = power_sweep(config, stats, rho=0.01,
                         gamma_grid_db=[0.0, 4.0], trials=6,
                         methods=list(DesignMethod), seed=5)
    for gamma_db in (0.0, 4.0):
        by_trial = {}
        for r in report.records:
            if r.gamma_db == gamma_db and r.status == "optimal":
                by_trial.setdefault(r.trial, {})[r.method] = r.power_relaxed
        compared = 0
        for vals in by_trial.values():
            if set(vals) == {"nonrobust", "mom", "robust"}:
                tol = 1e-5 * max(1.0, vals["mom"])
                assert vals["nonrobust"] <= vals["robust"] + tol
                assert vals["robust"] <= vals["mom"] + tol
                compared += 1
        assert compared >= 4


def test_power_sweep_feasibility_nonincreasing_in_gamma():
    config, stats = _paper_config(R=4)
    grid = [0.0, 6.0, 12.0, 18.0]
    report = power_sweep(config, stats, rho=0.01, gamma_grid_db=grid,
                         trials=8, methods=[DesignMethod.MOM], seed=2)
    fracs = [report.aggregate(g, "mom").feasibility for g in grid]
    assert all(b <= a + 1e-12 for a, b in zip(fracs, fracs[1:]))
    assert fracs[0] > fracs[-1]  # the grid actually spans the transition


def test_power_sweep_parallel_jobs_identical():
    config, stats = _paper_config()
    kwargs = dict(rho=0.01, gamma_grid_db=[2.0], trials=4,
                  methods=[DesignMethod.NONROBUST, DesignMethod.MOM], seed=9)
    serial = power_sweep(config, stats, **kwargs, jobs=1)
    parallel = power_sweep(config, stats, **kwargs, jobs=2)
    buf_s, buf_p = io.StringIO(), io.StringIO()
    write_trials_csv(serial, buf_s)
    write_trials_csv(parallel, buf_p)
    assert buf_s.getvalue() == buf_p.getvalue()


def test_power_sweep_validates_arguments():
    config, stats = _paper_config()
    with pytest.raises(ValueError):
        power_sweep(config, stats, 0.01, [], 2, [DesignMethod.NONROBUST], 0)
    with pytest.raises(ValueError):
        power_sweep(config, stats, 0.01, [0.0], 0, [DesignMethod.NONROBUST], 0)


# ---------------------------------------------------------------------------
# symbol error engine

def test_sep_noiseless_limit_is_zero():
    config = NetworkConfig(num_relays=2, num_users=1, source_powers=[1.0],
                           relay_noise_var=1e-12, dest_noise_var=1e-12,
                           sinr_targets=[1.0])
    channels = generate_channels(ChannelStatistics(1.0, 1.0), config, 0)
    w = np.ones(2, dtype=complex)
    errors, n = simulate_symbol_errors(w, channels, config, 5000, seed=1)
    assert n == 5000
    assert errors.sum() == 0


def test_sep_matches_bpsk_oracle_on_scalar_link():
    # single relay, single user: exact closed-form error rate Q(sqrt(2*SINR))
    config = NetworkConfig(num_relays=1, num_users=1, source_powers=[1.0],
                           relay_noise_var=1.0, dest_noise_var=1.0,
                           sinr_targets=[1.0])
    channels = ChannelRealization(np.array([[1.2 + 0.3j]]),
                                  np.array([[0.9 - 0.4j]]))
    m = build_matrices(channels, config)
    w = np.array([1.1 + 0.2j])
    gamma = sinr(w, m, config, 0)
    n = 200_000
    errors, _ = simulate_symbol_errors(w, channels, config, n, seed=11)
    p_hat = errors[0] / n
    p_theory = q_function(np.sqrt(2 * gamma))
    se = np.sqrt(p_theory * (1 - p_theory) / n)
    assert abs(p_hat - p_theory) <= 3 * se


def test_sep_deterministic_in_seed():
    config, stats = _paper_config(R=3, d=2)
    channels = generate_channels(stats, config, 4)
    w = np.ones(3, dtype=complex)
    a = simulate_symbol_errors(w, channels, config, 4096, seed=7)
    b = simulate_symbol_errors(w, channels, config, 4096, seed=7)
    assert np.array_equal(a[0], b[0])


# ---------------------------------------------------------------------------
# channel perturbation for the SEP experiment

def test_perturb_channels_induced_deltas_inside_balls():
    config, stats = _paper_config(R=5, d=2)
    channels = generate_channels(stats, config, 6)
    m = build_matrices(channels, config)
    bounds = derive_bounds(m, 0.01)
    for seed in range(10):
        perturbed = perturb_channels(channels, m, bounds, config, stats, seed)
        m2 = build_matrices(perturbed, config)
        assert np.linalg.norm(m2.power_diag - m.power_diag) <= bounds.eps_power
        for k in range(2):
            assert np.linalg.norm(m2.signal[k] - m.signal[k]) <= \
                bounds.eps_signal[k]
            assert np.linalg.norm(m2.interference[k] - m.interference[k]) <= \
                bounds.eps_interference[k]
            assert np.linalg.norm(m2.noise_diag[k] - m.noise_diag[k]) <= \
                bounds.eps_noise[k]
        assert not np.array_equal(perturbed.source_to_relay,
                                  channels.source_to_relay)


def test_perturb_channels_zero_rho_returns_nominal():
    config, stats = _paper_config(R=3, d=2)
    channels = generate_channels(stats, config, 1)
    m = build_matrices(channels, config)
    bounds = derive_bounds(m, 0.0)
    assert perturb_channels(channels, m, bounds, config, stats, 0) is channels


# ---------------------------------------------------------------------------
# sep sweep

def test_sep_sweep_basic_run_and_aggregates():
    config, stats = _paper_config(R=5, d=2)
    report = sep_sweep(config, stats, rho=0.01, gamma_grid_db=[2.0],
                       trials=3, symbols_per_trial=1000,
                       methods=list(DesignMethod), seed=8)
    for meth in DesignMethod:
        agg = report.aggregate(2.0, meth.value)
        assert agg.trials == 3
        if agg.feasible:
            assert 0.0 <= agg.sep_mean <= 1.0
            assert agg.sep_max >= agg.sep_mean - 1e-12
            assert agg.symbols == agg.feasible * 1000 * 2
            assert agg.sep_se == pytest.approx(
                np.sqrt(agg.sep_mean * (1 - agg.sep_mean) / agg.symbols))
    # per-trial records carry the worst sampled SINR for feasible trials
    ok = [r for r in report.records if r.status == "optimal"]
    assert all(np.isfinite(r.worst_sampled_sinr) for r in ok)


def test_sep_sweep_rejects_tiny_symbol_count():
    config, stats = _paper_config()
    with pytest.raises(ValueError):
        sep_sweep(config, stats, 0.01, [0.0], 1, 100, list(DesignMethod), 0)


def test_sep_sweep_robust_sinr_holds_under_perturbation():
    config, stats = _paper_config(R=6, d=2, gamma_db=3.0)
    report = sep_sweep(config, stats, rho=0.01, gamma_grid_db=[3.0],
                       trials=4, symbols_per_trial=1000,
                       methods=[DesignMethod.ROBUST], seed=12)
    gamma = 10 ** 0.3
    ok = [r for r in report.records if r.status == "optimal"]
    assert ok
    for r in ok:
        assert r.worst_sampled_sinr >= gamma * (1 - 1e-3)


# ---------------------------------------------------------------------------
# csv output

def test_aggregate_csv_layout():
    config, stats = _paper_config()
    report = power_sweep(config, stats, rho=0.0, gamma_grid_db=[1.0],
                         trials=1, methods=[DesignMethod.NONROBUST], seed=0)
    buf = io.StringIO()
    write_aggregate_csv(report, buf, manifest_hash="deadbeef")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# relaybf sweep csv v1"
    assert lines[1] == "# experiment: power"
    assert lines[2] == "# manifest_hash: deadbeef"
    assert lines[3] == "# columns: " + ",".join(AGGREGATE_COLUMNS)
    assert lines[4] == ",".join(AGGREGATE_COLUMNS)
    row = lines[5].split(",")
    assert row[0] == "nonrobust"
    assert float(row[1]) == 1.0
    assert int(row[2]) == 1 and int(row[3]) == 1
    # single trial: aggregate equals the trial value
    rec = report.records[0]
    assert float(row[5]) == pytest.approx(rec.power_rank1, rel=1e-9)


def test_trials_csv_layout():
    config, stats = _paper_config()
    report = power_sweep(config, stats, rho=0.0, gamma_grid_db=[1.0],
                         trials=2, methods=[DesignMethod.NONROBUST], seed=0)
    buf = io.StringIO()
    write_trials_csv(report, buf, manifest_hash="cafe")
    lines = buf.getvalue().splitlines()
    assert lines[2] == "# manifest_hash: cafe"
    assert lines[4] == ",".join(TRIAL_COLUMNS)
    assert len(lines) == 5 + 2
