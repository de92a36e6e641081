# test_stats.py
import logging
import pickle
from pathlib import Path

import numpy as np
import pytest

from config import Config, load_experiment_config
from errors import ConfigError, SimulationError
from graphs import preset
from logger import ReplicationFilter
from models import RegimeSpec, SampleTensor
from stats import (VerificationRunner, activity_check, batch_median_ks, bound_row, build_motifs, build_ratio_pair,
                   calibration_check, correlation_structure_check, cumulant_decay_check, diagram_check,
                   gaussianity_check, info_row, jackknife_covariance, ks_critical_value, mean_check,
                   oracle_equivalence_check, ratio_check, relative_row, run_replications, subset_tensor,
                   theory_check, z_row)
from theory import psi


CONFIGS = Path(__file__).parent / "configs"
LENIENT = dict(Config.DEFAULT_TOLERANCES, z=5.0, ks_alpha=1e-4)


def _tensor(normalized, n, regime, names=("a", "b"), grid=(0.0,)):
    normalized = np.asarray(normalized, dtype=float)
    return SampleTensor(normalized.copy(), normalized, np.asarray(grid, dtype=float), list(names),
                        RegimeSpec(n, 0.01, regime))


def test_rows():
    assert z_row("m", 1.0, 1.3, 0.1, 3.0).z == pytest.approx(3.0)
    assert z_row("m", 1.0, 1.0, 0.0, 3.0).passed
    missed = z_row("m", 1.0, 1.1, 0.0, 3.0)
    assert missed.z == float("inf") and not missed.passed
    assert relative_row("c", 10.0, 10.5, 0.0, 0.1).passed
    assert not relative_row("c", 10.0, 12.0, 0.0, 0.1).passed
    assert bound_row("u", 0.2, 0.5, "D").passed
    assert not bound_row("l", 0.2, 0.5, "corr>=", upper=False).passed
    assert info_row("i", 1.0, -7.0).passed


def test_jackknife_matches_leave_one_out(rng):
    x = rng.standard_normal(40)
    y = 0.5 * x + rng.standard_normal(40)
    cov, se = jackknife_covariance(x, y)
    assert cov == pytest.approx(np.cov(x, y)[0, 1])
    loo = np.array([np.cov(np.delete(x, i), np.delete(y, i))[0, 1] for i in range(40)])
    assert se == pytest.approx(np.sqrt(39 / 40 * np.sum((loo - loo.mean()) ** 2)))
    with pytest.raises(ValueError):
        jackknife_covariance(x[:2], y[:2])


def test_ks_critical_value():
    assert ks_critical_value(0.01, 1000) == pytest.approx(1.628 / np.sqrt(1000), rel=0.02)
    assert ks_critical_value(0.01, 100) > ks_critical_value(0.01, 1000)
    assert ks_critical_value(0.001, 500) > ks_critical_value(0.05, 500)


def test_calibration_passes_on_exact_normals(rng):
    report = calibration_check(rng, LENIENT)
    assert report.passed, report.to_table()
    assert any(row.name == "null-direction variance ratio" for row in report.rows)


def test_batch_median_ks_rejects_shifted_batches(rng):
    shifted = [rng.standard_normal(500) + 1.0 for _ in range(5)]
    assert not batch_median_ks(shifted, 0.01).passed


def test_gaussianity_of_rank_one_vector(rng):
    common = rng.standard_normal(1000)
    samples = np.column_stack((common, 2.0 * common))
    sigma = np.array([[1.0, 2.0], [2.0, 4.0]])
    report = gaussianity_check(samples, sigma, ["x", "y"], LENIENT, rng)
    assert report.passed, report.to_table()
    with pytest.raises(ValueError):
        gaussianity_check(samples[:100], sigma, ["x", "y"], LENIENT, rng)


def test_gaussianity_flags_skewed_samples(rng):
    samples = rng.exponential(size=(1000, 1)) - 1.0
    report = gaussianity_check(samples, np.ones((1, 1)), ["x"], LENIENT, rng)
    assert not report.passed


def test_mean_check(engine_d1, params):
    tensor = SampleTensor(np.full((4, 1, 2), 200.0), np.zeros((4, 1, 2)), np.array([0.0, 1.0]), ["edge"],
                          RegimeSpec(200, 0.02, "dense"))
    assert mean_check(tensor, engine_d1, [preset("edge")], params, LENIENT).passed
    tensor.raw += 40.0
    assert not mean_check(tensor, engine_d1, [preset("edge")], params, LENIENT).passed


def test_correlation_structure_dense(rng):
    tensors = []
    for n, noise in ((100, 0.5), (400, 0.2), (1600, 0.05)):
        x = rng.standard_normal(500)
        y = 2.0 * x + noise * rng.standard_normal(500)
        tensors.append(_tensor(np.stack((x, y), axis=1)[:, :, None], n, "dense"))
    report = correlation_structure_check(tensors, [preset("edge"), preset("triangle")], None, LENIENT,
                                         lag_motifs=[])
    assert report.passed, report.to_table()
    assert any(row.name == "correlation trend (Spearman)" for row in report.rows)


def test_correlation_structure_sparse_decoupling(rng, params):
    x = rng.standard_normal((2000, 2, 1))
    report = correlation_structure_check([_tensor(x, 1000, "sparse")], [preset("edge"), preset("triangle")],
                                         params, LENIENT, lag_motifs=[])
    assert report.passed, report.to_table()
    coupled = np.repeat(x[:, :1, :], 2, axis=1)
    report = correlation_structure_check([_tensor(coupled, 1000, "sparse")], [preset("edge"), preset("triangle")],
                                         params, LENIENT, lag_motifs=[])
    assert not report.passed
    with pytest.raises(ValueError):
        correlation_structure_check([_tensor(x, 1000, "sparse")], [preset("edge")], params, LENIENT)


def test_cumulant_decay(rng):
    tensors = []
    for n in (100, 400, 1600):
        shape = n / 10.0
        x = (rng.gamma(shape, size=20_000) - shape) / np.sqrt(shape)
        tensors.append(_tensor(x[:, None, None], n, "dense", names=("edge",)))
    report = cumulant_decay_check(tensors, 0, LENIENT)
    assert report.passed, report.to_table()
    with pytest.raises(ValueError):
        cumulant_decay_check(tensors[:2], 0, LENIENT)


def test_diagram_check_passes(rng):
    report = diagram_check(rng, Config.DEFAULT_TOLERANCES, models=10)
    assert report.passed, report.to_table()


def test_theory_check_passes(engine_d1, params):
    report = theory_check(engine_d1, params, [0.0, 0.5, 1.0], Config.DEFAULT_TOLERANCES)
    assert report.passed, report.to_table()
    closed = [row for row in report.rows if row.criterion == "info"][0]
    assert closed.theory / closed.estimate == pytest.approx(81.0, rel=1e-6)


def test_activity_check(params, rng):
    report = activity_check(params, 1.0, [0.0, 0.5, 1.0], 40_000, rng, LENIENT)
    assert report.passed, report.to_table()


def test_build_motifs_errors(experiment_file):
    cfg, _ = load_experiment_config(experiment_file(motifs=["edge", "edge"]))
    with pytest.raises(ConfigError) as info:
        build_motifs(cfg)
    assert info.value.field == "motifs"
    cfg, _ = load_experiment_config(experiment_file(motifs=["edge", "hexagon"]))
    with pytest.raises(ConfigError) as info:
        build_motifs(cfg)
    assert info.value.field == "motifs[1]"


def test_replications_are_reproducible(experiment_file):
    cfg, _ = load_experiment_config(experiment_file())
    first, _ = run_replications(cfg)
    second, _ = run_replications(cfg)
    assert first.raw.shape == (3, 2, 3)
    assert np.array_equal(first.raw, second.raw)
    assert first.seeds == second.seeds and len(set(first.seeds)) == 3
    repeated, _ = run_replications(cfg, seeds=[first.seeds[0]] * 2)
    assert np.array_equal(repeated.raw[0], repeated.raw[1])
    assert np.array_equal(repeated.raw[0], first.raw[0])


def test_replications_normalize_with_exact_means(experiment_file, engine_d1):
    cfg, _ = load_experiment_config(experiment_file())
    tensor, processes = run_replications(cfg, engine=engine_d1, keep_processes=True)
    assert len(processes) == 3
    edge_mean = engine_d1.expected_count(60, 0.05, preset("edge"), cfg.params)
    scale = psi(2, 60, 0.05, cfg.params.rho, "dense")
    assert np.allclose(tensor.normalized[:, 0, :], (tensor.raw[:, 0, :] - edge_mean) / scale)
    assert np.array_equal(processes[1].sample_grid(cfg.grid), tensor.raw[1])
    edges_only = subset_tensor(tensor, [0])
    assert edges_only.motif_names == ["edge"] and edges_only.raw.shape == (3, 1, 3)


def test_worker_pool_gives_identical_results(experiment_file, engine_d1):
    cfg, _ = load_experiment_config(experiment_file())
    serial, _ = run_replications(cfg, engine=engine_d1, threads=1)
    pooled, _ = run_replications(cfg, engine=engine_d1, threads=2)
    assert np.array_equal(serial.raw, pooled.raw)


def test_failed_replication_carries_its_seed(experiment_file):
    cfg, _ = load_experiment_config(experiment_file(ladder=[{"n": 20, "nu": 0.6, "regime": "dense"}]))
    with pytest.raises(SimulationError) as info:
        run_replications(cfg)
    assert info.value.replication == 0
    assert info.value.seed is not None
    restored = pickle.loads(pickle.dumps(info.value))
    assert restored.seed == info.value.seed and str(restored) == str(info.value)


def test_incremental_counts_match_recounts(experiment_file):
    cfg, _ = load_experiment_config(experiment_file(motifs=["edge", "wedge", "triangle"]))
    report = oracle_equivalence_check(cfg, replications=2, times=20)
    assert report.passed
    assert report.rows[0].name == "mismatches over 120 recounts"


def test_runner_writes_diagram_reports(experiment_file, tmp_path):
    cfg, _ = load_experiment_config(experiment_file(verify={"diagram_models": 5}))
    runner = VerificationRunner(cfg, tmp_path / "reports")
    reports = runner.run("diagrams")
    assert [r.name for r in reports] == ["diagrams"] and reports[0].passed
    assert sorted(p.name for p in runner.written) == ["diagrams.json", "diagrams.txt"]
    with pytest.raises(ConfigError):
        runner.run("everything")


def test_runner_rejects_bad_selections(experiment_file, tmp_path):
    cfg, _ = load_experiment_config(experiment_file(verify={"covariance_motifs": ["square"]}))
    runner = VerificationRunner(cfg, tmp_path)
    with pytest.raises(ConfigError):
        runner._pick("covariance_motifs", 2, ["edge", "triangle"])
    cfg, _ = load_experiment_config(experiment_file(verify={"covariance_rungs": [4]}))
    with pytest.raises(ConfigError):
        VerificationRunner(cfg, tmp_path)._pick("covariance_rungs", 1)


def test_ratio_paths_count_degenerate_replications(experiment_file, engine_d1):
    cfg, _ = load_experiment_config(experiment_file(
        motifs=["wedge", "triangle"], ratio={"numerator": "triangle", "denominator": "wedge"},
        ladder=[{"n": 5, "nu": 0.001, "regime": "dense"}]))
    tensor, _ = run_replications(cfg, engine=engine_d1)
    assert tensor.ratio_name == "triangle/wedge"
    assert tensor.degenerate_paths == cfg.replications
    assert tensor.ratio.shape == (3, 3) and np.isnan(tensor.ratio).all()
    assert tensor.kept_ratio().shape == (0, 3)
    summary = tensor.summary()
    assert summary["degenerate_paths"] == 3 and summary["ratio"] == "triangle/wedge"
    assert summary["ratio_variance"] is None


def test_ratio_paths_without_degeneracy(experiment_file, engine_d1):
    cfg, _ = load_experiment_config(experiment_file(
        motifs=["wedge", "triangle"], ratio={"numerator": "triangle", "denominator": "wedge"},
        ladder=[{"n": 200, "nu": 0.05, "regime": "dense"}]))
    tensor, _ = run_replications(cfg, engine=engine_d1)
    assert tensor.degenerate_paths == 0
    expected = engine_d1.expected_ratio(200, 0.05, preset("triangle"), preset("wedge"), cfg.params)
    zeta = np.sqrt(200)
    raw_ratio = 6 * tensor.raw[:, 1, :] / (2 * tensor.raw[:, 0, :])
    assert np.allclose(tensor.ratio, (raw_ratio - expected) * zeta)
    assert "ratio_variance" in tensor.summary()


def test_no_ratio_configured(experiment_file):
    cfg, _ = load_experiment_config(experiment_file())
    tensor, _ = run_replications(cfg)
    assert tensor.ratio is None and tensor.degenerate_paths == 0
    assert build_ratio_pair(cfg, build_motifs(cfg)) is None


@pytest.mark.parametrize("motifs, ratio, field", [
    (["wedge", "triangle"], {"numerator": "square", "denominator": "wedge"}, "ratio.numerator"),
    (["wedge", "triangle"], {"numerator": "triangle", "denominator": "star"}, "ratio.denominator"),
    (["edge", "triangle"], {"numerator": "triangle", "denominator": "edge"}, "ratio"),
])
def test_build_ratio_pair_errors(experiment_file, motifs, ratio, field):
    cfg, _ = load_experiment_config(experiment_file(motifs=motifs, ratio=ratio))
    with pytest.raises(ConfigError) as info:
        build_ratio_pair(cfg, build_motifs(cfg))
    assert info.value.field == field


def _ratio_tensor(ratio, rung, grid=(0.0,)):
    R = len(ratio)
    tensor = SampleTensor(np.ones((R, 2, len(grid))), np.zeros((R, 2, len(grid))), np.asarray(grid, dtype=float),
                          ["wedge", "triangle"], rung)
    tensor.ratio = np.asarray(ratio, dtype=float)
    tensor.ratio_name = "triangle/wedge"
    tensor.degenerate_paths = int(np.isnan(tensor.ratio).any(axis=1).sum())
    return tensor


def test_ratio_check_against_finite_n_covariance(engine_d1, params, rng):
    rung = RegimeSpec(200, 0.05, "dense")
    variance = engine_d1.ratio_covariance(200, 0.05, 0.0, 0.0, preset("triangle"), preset("wedge"), params, "dense")
    assert variance > 0
    samples = rng.normal(0.0, np.sqrt(variance), size=(4000, 1))
    report = ratio_check(_ratio_tensor(samples, rung), engine_d1, preset("triangle"), preset("wedge"), params,
                         LENIENT)
    assert report.passed, report.to_table()
    limit = [row for row in report.rows if row.name == "Sigma^C(0,0) limit"][0]
    assert limit.theory == 0.0
    report = ratio_check(_ratio_tensor(3.0 * samples, rung), engine_d1, preset("triangle"), preset("wedge"),
                         params, LENIENT)
    assert not report.passed


def test_ratio_check_flags_degenerate_fraction(engine_d1, params):
    ratio = np.full((10, 1), np.nan)
    ratio[:2] = 0.1
    report = ratio_check(_ratio_tensor(ratio, RegimeSpec(200, 0.05, "dense")), engine_d1, preset("triangle"),
                         preset("wedge"), params, LENIENT)
    assert [row.name for row in report.rows] == ["degenerate paths", "degenerate fraction"]
    assert report.rows[0].estimate == 8
    assert not report.passed


def test_ratio_check_sparse_gap_shrinks(engine_d1, params, rng):
    n, gamma = 20000, -1.2
    rung = RegimeSpec(n, n ** gamma, "sparse", gamma=gamma, c=1.0)
    variance = engine_d1.ratio_covariance(n, n ** gamma, 0.0, 0.0, preset("triangle"), preset("wedge"), params,
                                          "sparse")
    samples = rng.normal(0.0, np.sqrt(variance), size=(4000, 1))
    report = ratio_check(_ratio_tensor(samples, rung), engine_d1, preset("triangle"), preset("wedge"), params,
                         LENIENT)
    assert report.passed, report.to_table()
    names = [row.name for row in report.rows]
    assert "finite-n gap to Sigma^C (this n)" in names
    assert "gap to Sigma^C shrinks along gamma" in names


def test_runner_skips_correlation_when_disabled(experiment_file, tmp_path):
    cfg, _ = load_experiment_config(experiment_file(
        motifs=["wedge", "triangle"], ratio={"numerator": "triangle", "denominator": "wedge"},
        ladder=[{"n": 120, "nu": 0.05, "regime": "dense"}],
        verify={"correlation": False, "covariance_rungs": [], "gaussianity_rungs": [], "oracle_replications": 1,
                "oracle_times": 5, "activity_samples": 2000}))
    reports = VerificationRunner(cfg, tmp_path).run("simulation")
    names = [r.name for r in reports]
    assert "ratio[triangle/wedge,n=120,nu=0.05]" in names
    assert not any(name.startswith("correlation") for name in names)
    assert not any(name.startswith("covariance") for name in names)


@pytest.mark.slow
def test_acceptance_means_hit_exact_values(tmp_path):
    cfg, _ = load_experiment_config(CONFIGS / "acceptance_means.json")
    reports = VerificationRunner(cfg, tmp_path).run("simulation")
    means = [r for r in reports if r.name.startswith("mean[")][0]
    assert means.passed, means.to_table()
    for row in means.rows:
        assert row.theory == pytest.approx(200.0, rel=1e-3)
        assert row.estimate == pytest.approx(200.0, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["acceptance.json", "acceptance_sparse.json", "acceptance_means.json",
                                  "acceptance_covariance.json", "acceptance_ratio.json"])
def test_acceptance_runs(tmp_path, name):
    cfg, _ = load_experiment_config(CONFIGS / name)
    reports = VerificationRunner(cfg, tmp_path).run("all")
    failing = [r.name for r in reports if not r.passed]
    assert not failing, failing


def test_replication_logs_carry_seed_and_index(experiment_file, engine_d1):
    cfg, _ = load_experiment_config(experiment_file(
        motifs=["wedge", "triangle"], ratio={"numerator": "triangle", "denominator": "wedge"},
        ladder=[{"n": 5, "nu": 0.001, "regime": "dense"}]))
    records = []
    handler = logging.Handler()
    handler.emit = records.append
    handler.addFilter(ReplicationFilter())
    logging.getLogger("counts").addHandler(handler)
    try:
        tensor, _ = run_replications(cfg, engine=engine_d1, threads=1)
    finally:
        logging.getLogger("counts").removeHandler(handler)
    degenerate = [r for r in records if "degenerate" in r.getMessage()]
    assert [(r.seed, r.replication) for r in degenerate] == list(zip(tensor.seeds, range(3)))
