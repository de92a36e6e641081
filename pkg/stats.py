# stats.py
"""Replication runner and statistical comparison of simulated count processes against the theory engine."""

import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from math import comb, factorial
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as st
from sympy import bell

from config import Config
from counts import SubgraphCounter, ratio_process, run_count_process
from diagrams import (CLASSES, enumerate_partitions, joint_cumulant, mixed_central_moment, oracle_moments,
                      random_finite_model, relative_delta, set_partition_count)
from dynamics import Z, pair_moment, sample_trajectories, switching_probability_bounds_check
from errors import ConfigError, GraphError, SimulationError
from geometry import sample_poisson_points
from graphs import SmallGraph, automorphism_count, contains_after_relabeling, motif_from_spec, preset
from logger import replication_context
from models import (ComparisonReport, ComparisonRow, CountProcess, ExperimentConfig, FiniteSpaceModel,
                    NormalizedProcess, OnOffParams, RegimeSpec, RowStructure, SampleTensor, Trajectory)
from rcm import PotentialGraph, Profile, sample_potential_edges
from theory import TheoryEngine, check_regime, psi
from utils import derive_seed, make_rng, write_json

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# Building blocks from a validated config


def build_profile(cfg: ExperimentConfig) -> Profile:
    try:
        return Profile.from_spec(cfg.profile)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(str(e), field="profile")


def build_motifs(cfg: ExperimentConfig) -> List[SmallGraph]:
    motifs = []
    for idx, spec in enumerate(cfg.motifs):
        try:
            motifs.append(motif_from_spec(spec, idx))
        except GraphError as e:
            raise ConfigError(str(e), field=f"motifs[{idx}]")
    names = [g.name for g in motifs]
    if len(set(names)) != len(names):
        raise ConfigError(f"motif names must be unique, got {names}", field="motifs")
    return motifs


def build_ratio_pair(cfg: ExperimentConfig, motifs: Sequence[SmallGraph]) -> Optional[Tuple[int, int]]:
    """Motif indices (numerator, denominator) of the configured ratio process, if any."""
    if cfg.ratio is None:
        return None
    names = [g.name for g in motifs]
    picked = []
    for key in ("numerator", "denominator"):
        name = cfg.ratio[key]
        if name not in names:
            raise ConfigError(f"unknown motif {name!r}; choose from {names}", field=f"ratio.{key}")
        picked.append(names.index(name))
    g1, g2 = motifs[picked[0]], motifs[picked[1]]
    if g1.q != g2.q:
        raise ConfigError(f"ratio needs equal vertex counts, got {g1.q} and {g2.q}", field="ratio")
    if not (contains_after_relabeling(g1, g2) or contains_after_relabeling(g2, g1)):
        raise ConfigError(f"neither of {g1.name} and {g2.name} contains the other", field="ratio")
    return picked[0], picked[1]


def ratio_path(cp: CountProcess, motifs: Sequence[SmallGraph], pair: Tuple[int, int], rung: RegimeSpec,
               expected: float) -> NormalizedProcess:
    i, j = pair
    g1, g2 = motifs[i], motifs[j]
    return ratio_process(cp.select(i), cp.select(j), automorphism_count(g1), automorphism_count(g2),
                         rung.n, rung.nu, rung.regime, g1.q, expected)


def build_engine(cfg: ExperimentConfig, profile: Optional[Profile] = None) -> TheoryEngine:
    return TheoryEngine(profile or build_profile(cfg), cfg.d, seed=derive_seed(cfg.seed, 0xF),
                        method=cfg.verify.get("integration", "auto"))


# ----------------------------------------------------------------------
# Replications


def simulate_replication(d: int, params: OnOffParams, horizon: float, profile: Profile,
                         motifs: Sequence[SmallGraph], rung: RegimeSpec,
                         seed: int) -> Tuple[CountProcess, PotentialGraph, List[Trajectory]]:
    """One realization: points, potential edges, status paths and the count process."""
    points = sample_poisson_points(rung.n, d, make_rng(seed, 0))
    potential = sample_potential_edges(points, profile, rung.nu, d, derive_seed(seed, 1))
    trajectories = sample_trajectories(params, horizon, len(points), make_rng(seed, 2))
    return run_count_process(potential, trajectories, motifs, horizon), potential, trajectories


def _replicate(task) -> Tuple[np.ndarray, Optional[np.ndarray], bool, Optional[CountProcess]]:
    index, seed, d, params, horizon, profile, motifs, rung, grid, keep, ratio_spec = task
    try:
        with replication_context(seed, index):
            cp, _, _ = simulate_replication(d, params, horizon, profile, motifs, rung, seed)
            ratio = None
            if ratio_spec is not None:
                pair, expected = ratio_spec
                ratio = ratio_path(cp, motifs, pair, rung, expected)
    except Exception as e:
        raise SimulationError(f"replication failed: {e}", seed=seed, replication=index) from e
    if ratio is None:
        return cp.sample_grid(grid), None, False, (cp if keep else None)
    return cp.sample_grid(grid), ratio.sample_grid(grid)[0], ratio.degenerate, (cp if keep else None)


def run_replications(cfg: ExperimentConfig, rung_index: int = 0, engine: Optional[TheoryEngine] = None,
                     seeds: Optional[Sequence[int]] = None, threads: Optional[int] = None,
                     keep_processes: bool = False,
                     replications: Optional[int] = None) -> Tuple[SampleTensor, List[CountProcess]]:
    """R independent simulations of one ladder rung, sampled on the config's time grid.

    Replication r uses the seed derived from (master seed, rung, r) unless seeds are given.
    With a ratio pair configured, the tensor also carries C* on the grid; degenerate
    paths hold NaN and are counted in `degenerate_paths`.
    """
    profile = build_profile(cfg)
    motifs = build_motifs(cfg)
    pair = build_ratio_pair(cfg, motifs)
    rung = check_regime(cfg.ladder[rung_index], motifs)
    count = replications or cfg.replications
    seeds = list(seeds) if seeds is not None else [derive_seed(cfg.seed, rung_index, r) for r in range(count)]
    grid = np.asarray(cfg.grid, dtype=float)
    engine = engine or build_engine(cfg, profile)
    ratio_spec = None
    if pair is not None:
        ratio_spec = (pair, engine.expected_ratio(rung.n, rung.nu, motifs[pair[0]], motifs[pair[1]], cfg.params))
    tasks = [(r, seed, cfg.d, cfg.params, cfg.horizon, profile, motifs, rung, grid, keep_processes, ratio_spec)
             for r, seed in enumerate(seeds)]

    workers = threads or cfg.threads
    logger.info(f"Running {len(tasks)} replications of rung {rung_index} (n={rung.n:g}, nu={rung.nu:g}, "
                f"{rung.regime}) on {workers} worker(s)")
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
        else:
            results = [_replicate(task) for task in tasks]
    except SimulationError as e:
        logger.error(f"Simulation aborted: {e}", exc_info=True)
        raise

    raw = np.stack([result[0] for result in results]).astype(float)
    means = np.array([engine.expected_count(rung.n, rung.nu, g, cfg.params) for g in motifs])
    scales = np.array([psi(g.q, rung.n, rung.nu, cfg.params.rho, rung.regime) for g in motifs])
    normalized = (raw - means[None, :, None]) / scales[None, :, None]
    tensor = SampleTensor(raw, normalized, grid, [g.name for g in motifs], rung, seeds)
    if pair is not None:
        tensor.ratio = np.stack([result[1] for result in results]).astype(float)
        tensor.ratio_name = f"{motifs[pair[0]].name}/{motifs[pair[1]].name}"
        tensor.degenerate_paths = sum(1 for result in results if result[2])
        if tensor.degenerate_paths:
            logger.warning(f"{tensor.degenerate_paths} of {len(results)} {tensor.ratio_name} paths degenerate; "
                           f"excluded from ratio statistics")
    return tensor, [result[3] for result in results if result[3] is not None]


def subset_tensor(tensor: SampleTensor, motifs: Sequence[int]) -> SampleTensor:
    motifs = list(motifs)
    return SampleTensor(tensor.raw[:, motifs, :], tensor.normalized[:, motifs, :], tensor.grid,
                        [tensor.motif_names[k] for k in motifs], tensor.rung, tensor.seeds,
                        tensor.ratio, tensor.ratio_name, tensor.degenerate_paths)


# ----------------------------------------------------------------------
# Report rows


def z_row(name: str, theory: float, estimate: float, stderr: float, threshold: float) -> ComparisonRow:
    if stderr > 0:
        z = (estimate - theory) / stderr
    else:
        z = 0.0 if estimate == theory else float("inf")
    return ComparisonRow(name, float(theory), float(estimate), float(stderr), float(z), "|z|",
                         float(threshold), bool(abs(z) <= threshold))


def relative_row(name: str, theory: float, estimate: float, stderr: float, bound: float) -> ComparisonRow:
    rel = abs(estimate - theory) / abs(theory) if theory else abs(estimate)
    z = (estimate - theory) / stderr if stderr > 0 else 0.0
    return ComparisonRow(name, float(theory), float(estimate), float(stderr), float(z), "rel",
                         float(bound), bool(rel <= bound))


def bound_row(name: str, estimate: float, threshold: float, criterion: str, upper: bool = True,
              theory: float = 0.0, stderr: float = 0.0) -> ComparisonRow:
    passed = estimate <= threshold if upper else estimate >= threshold
    return ComparisonRow(name, float(theory), float(estimate), float(stderr), 0.0, criterion,
                         float(threshold), bool(passed))


def info_row(name: str, theory: float, estimate: float) -> ComparisonRow:
    return ComparisonRow(name, float(theory), float(estimate), 0.0, 0.0, "info", 0.0, True)


def jackknife_covariance(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Sample covariance and its jackknife standard error from closed-form leave-one-out sums."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = len(x)
    if R < 3:
        raise ValueError("jackknife needs at least 3 replications")
    x = x - x.mean()
    y = y - y.mean()
    sx, sy, sxy = x.sum(), y.sum(), (x * y).sum()
    cov = (sxy - sx * sy / R) / (R - 1)
    m = R - 1
    loo = ((sxy - x * y) - (sx - x) * (sy - y) / m) / (m - 1)
    se = np.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2))
    return float(cov), float(se)


def ks_critical_value(alpha: float, size: int) -> float:
    return float(st.kstwo.ppf(1.0 - alpha, size))


# ----------------------------------------------------------------------
# Checks


def activity_check(params: OnOffParams, horizon: float, grid: Sequence[float], samples: int,
                   rng: np.random.Generator, tol: Dict[str, float]) -> ComparisonReport:
    """Stationary mean and pair moments of the status chain on a time grid."""
    grid = np.asarray(grid, dtype=float)
    paths = sample_trajectories(params, horizon, samples, rng)
    states = np.array([path.state_at(grid) for path in paths], dtype=float)
    report = ComparisonReport("activity")
    for a, t in enumerate(grid):
        x = states[:, a]
        report.rows.append(z_row(f"E[A({t:g})]", params.rho, x.mean(), x.std(ddof=1) / np.sqrt(samples), tol["z"]))
    for a, b in product(range(len(grid)), repeat=2):
        if b < a:
            continue
        x = states[:, a] * states[:, b]
        report.rows.append(z_row(f"E[A({grid[a]:g})A({grid[b]:g})]", float(pair_moment(grid[a], grid[b], params)),
                                 x.mean(), x.std(ddof=1) / np.sqrt(samples), tol["z"]))

    switching = switching_probability_bounds_check(params, grid, max(1000, samples // 10), rng)
    coarse = switching["coarse"]
    report.rows.append(info_row("switching c1 (exact vs fitted)", coarse["exact_c1"], coarse["c1"]))
    report.rows.append(info_row("switching c2 (exact vs fitted)", coarse["exact_c2"], coarse["c2"]))
    report.rows.append(bound_row("switching constants stable under refinement",
                                 0.0 if switching["stable"] else 1.0, 0.0, "unstable"))
    return report


def mean_check(tensor: SampleTensor, engine: TheoryEngine, motifs: Sequence[SmallGraph], params: OnOffParams,
               tol: Dict[str, float]) -> ComparisonReport:
    """Empirical mean counts (averaged over the grid) against the exact mean."""
    rung = tensor.rung
    R = tensor.raw.shape[0]
    report = ComparisonReport(f"mean[n={rung.n:g},nu={rung.nu:g}]")
    for i, g in enumerate(motifs):
        x = tensor.raw[:, i, :].mean(axis=1)
        theory = engine.expected_count(rung.n, rung.nu, g, params)
        # floor: Poisson dispersion at the exact mean
        stderr = max(x.std(ddof=1), np.sqrt(max(theory, 0.0))) / np.sqrt(R)
        report.rows.append(z_row(f"E[{g.name}]", theory, x.mean(), stderr, tol["z"]))
    return report


def covariance_check(tensor: SampleTensor, engine: TheoryEngine, motifs: Sequence[SmallGraph],
                     params: OnOffParams, tol: Dict[str, float]) -> ComparisonReport:
    """Cov(Gamma(s), Gamma(t)) from the first grid time, with jackknife errors, plus the lag profile."""
    rung = tensor.rung
    grid = tensor.grid
    s = float(grid[0])
    report = ComparisonReport(f"covariance[n={rung.n:g},nu={rung.nu:g}]")
    for i, g in enumerate(motifs):
        x = tensor.raw[:, i, 0]
        predicted = [engine.covariance_counts(rung.n, rung.nu, s, float(t), g, g, params) for t in grid]
        measured = [jackknife_covariance(x, tensor.raw[:, i, k]) for k in range(len(grid))]
        for k, t in enumerate(grid):
            cov, se = measured[k]
            report.rows.append(relative_row(f"Cov[{g.name}]({s:g},{t:g})", predicted[k], cov, se,
                                            tol["covariance_rel"]))
        for k in range(1, len(grid)):
            report.rows.append(relative_row(f"lag[{g.name}]({grid[k] - s:g})", predicted[k] / predicted[0],
                                            measured[k][0] / measured[0][0], 0.0, tol["lag_rel"]))
    return report


def ratio_check(tensor: SampleTensor, engine: TheoryEngine, g1: SmallGraph, g2: SmallGraph,
                params: OnOffParams, tol: Dict[str, float]) -> ComparisonReport:
    """Covariance of the ratio process C* from the first grid time, degenerate paths excluded.

    The variance at the first grid time is held to a relative bound, the decaying
    lagged covariances to a z bound.

    Pass/fail is against the finite-n delta method built from the exact count
    covariances; the limit sigma_C stands next to it. On a gamma sequence the
    finite-n value must also move toward the limit as n grows.
    """
    rung = tensor.rung
    grid = tensor.grid
    R = tensor.raw.shape[0]
    report = ComparisonReport(f"ratio[{tensor.ratio_name},n={rung.n:g},nu={rung.nu:g}]")
    report.rows.append(info_row("degenerate paths", 0.0, tensor.degenerate_paths))
    report.rows.append(bound_row("degenerate fraction", tensor.degenerate_paths / R, tol["degenerate_fraction"],
                                 "frac"))
    kept = tensor.kept_ratio()
    if len(kept) < 3:
        logger.warning(f"Ratio check of {tensor.ratio_name}: only {len(kept)} non-degenerate paths")
        return report

    s = float(grid[0])
    for k, t in enumerate(grid):
        cov, se = jackknife_covariance(kept[:, 0], kept[:, k])
        finite = engine.ratio_covariance(rung.n, rung.nu, s, float(t), g1, g2, params, rung.regime)
        label = f"Cov C*({s:g},{t:g})"
        if k == 0:
            report.rows.append(relative_row(label, finite, cov, se, tol["ratio_rel"]))
        else:
            report.rows.append(z_row(label, finite, cov, se, tol["z"]))
        report.rows.append(info_row(f"Sigma^C({s:g},{t:g}) limit", engine.sigma_C(s, float(t), g1, g2, params,
                                                                                 rung.regime), cov))

    if rung.regime == "sparse" and rung.gamma is not None:
        limit = engine.sigma_C(s, s, g1, g2, params, rung.regime)
        gaps = []
        for n in (rung.n, rung.n * 1e6):
            nu = rung.c * n ** rung.gamma
            gaps.append(abs(engine.ratio_covariance(n, nu, s, s, g1, g2, params, rung.regime) / limit - 1.0))
        report.rows.append(info_row("finite-n gap to Sigma^C (this n)", 0.0, gaps[0]))
        report.rows.append(bound_row("gap to Sigma^C shrinks along gamma", gaps[1] - gaps[0], 0.0, "delta<"))
    return report


def gaussianity_check(samples: np.ndarray, sigma: np.ndarray, labels: Sequence[str], tol: Dict[str, float],
                      rng: np.random.Generator, projections: int = 3, min_replications: int = 500,
                      name: str = "gaussianity") -> ComparisonReport:
    """KS, skewness and kurtosis per coordinate, then Cramer-Wold projections of the whole vector.

    `samples` has shape (R, dim) in the coordinate order of `sigma`. Projections are drawn
    within the range of sigma; when sigma is singular, the direction of its smallest
    eigenvalue must carry almost no variance.
    """
    samples = np.asarray(samples, dtype=float).reshape(len(samples), -1)
    R, dim = samples.shape
    if R < min_replications:
        raise ValueError(f"gaussianity check needs at least {min_replications} replications, got {R}")
    alpha = tol["ks_alpha"]
    critical = ks_critical_value(alpha, R)
    report = ComparisonReport(name)

    for idx in range(dim):
        variance = sigma[idx, idx]
        if variance <= 0:
            report.rows.append(info_row(f"{labels[idx]}: zero limit variance", 0.0, samples[:, idx].var()))
            continue
        z = samples[:, idx] / np.sqrt(variance)
        report.rows.append(bound_row(f"KS[{labels[idx]}]", st.kstest(z, "norm").statistic, critical, "D"))
        report.rows.append(z_row(f"skew[{labels[idx]}]", 0.0, st.skew(z), np.sqrt(6.0 / R), tol["z"]))
        report.rows.append(z_row(f"exkurt[{labels[idx]}]", 0.0, st.kurtosis(z), np.sqrt(24.0 / R), tol["z"]))

    eigenvalues, vectors = np.linalg.eigh(sigma)
    top = eigenvalues.max()
    support = eigenvalues > 1e-8 * top
    basis = vectors[:, support]
    for p in range(projections):
        v = basis @ rng.standard_normal(basis.shape[1])
        v /= np.linalg.norm(v)
        projected = samples @ v / np.sqrt(v @ sigma @ v)
        report.rows.append(bound_row(f"KS[projection {p + 1}]", st.kstest(projected, "norm").statistic,
                                     critical, "D"))
    if not support.all():
        null = vectors[:, np.argmin(eigenvalues)]
        ratio = np.var(samples @ null) / np.var(samples @ vectors[:, np.argmax(eigenvalues)])
        report.rows.append(bound_row("null-direction variance ratio", ratio, tol["null_variance_ratio"], "ratio"))
    return report


def batch_median_ks(batches: Sequence[np.ndarray], alpha: float, name: str = "KS batch median") -> ComparisonRow:
    """Median KS distance of standardized batches against the critical value of the smallest batch."""
    distances = [st.kstest(np.asarray(b, dtype=float), "norm").statistic for b in batches]
    critical = ks_critical_value(alpha, min(len(b) for b in batches))
    return bound_row(name, float(np.median(distances)), critical, "median D")


def _correlation(x: np.ndarray, y: np.ndarray) -> float:
    if np.std(x) == 0 or np.std(y) == 0:
        logger.warning("Correlation of a constant sample taken as 0")
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def correlation_structure_check(tensors: Sequence[SampleTensor], motifs: Sequence[SmallGraph],
                                params: OnOffParams, tol: Dict[str, float],
                                pair: Tuple[int, int] = (0, 1),
                                lag_motifs: Optional[Sequence[int]] = None) -> ComparisonReport:
    """Equal-time cross-correlation along the ladder and the lag profile at its top rung."""
    if len(motifs) < 2:
        raise ValueError("correlation structure needs at least two motifs")
    i, j = pair
    regime = tensors[-1].rung.regime
    report = ComparisonReport(f"correlation[{regime}]")
    ns, correlations = [], []
    for tensor in tensors:
        x, y = tensor.normalized[:, i, :], tensor.normalized[:, j, :]
        per_time = [_correlation(x[:, k], y[:, k]) for k in range(x.shape[1])]
        ns.append(tensor.rung.n)
        correlations.append(float(np.mean(per_time)))
        report.rows.append(info_row(f"corr[{motifs[i].name},{motifs[j].name}](n={tensor.rung.n:g})",
                                    1.0 if regime == "dense" else 0.0, correlations[-1]))

    top = tensors[-1]
    R = top.normalized.shape[0]
    if regime == "dense":
        report.rows.append(bound_row("correlation at ladder top", correlations[-1], tol["correlation_min"],
                                     "corr>=", upper=False, theory=1.0))
        if len(tensors) >= 3:
            trend = st.spearmanr(ns, correlations).statistic
            report.rows.append(bound_row("correlation trend (Spearman)", trend, 0.0, "rho_s>", upper=False))
        elif len(tensors) == 2:
            report.rows.append(bound_row("correlation increase", correlations[1] - correlations[0], 0.0,
                                         "delta>=", upper=False))
    elif motifs[i].q != motifs[j].q:
        # Fisher transform of the equal-time correlation at the first grid time
        r = _correlation(top.normalized[:, i, 0], top.normalized[:, j, 0])
        report.rows.append(z_row("Fisher z of cross-correlation", 0.0, np.arctanh(r), 1.0 / np.sqrt(R - 3),
                                 tol["z"]))

    grid = top.grid
    for k in (range(len(motifs)) if lag_motifs is None else lag_motifs):
        g = motifs[k]
        x0 = top.normalized[:, k, 0]
        var0 = np.var(x0, ddof=1)
        if var0 == 0:
            logger.warning(f"Lag profile of {g.name} skipped: no variation at t={grid[0]:g}")
            continue
        for idx in range(1, len(grid)):
            h = float(grid[idx] - grid[0])
            decay = float(Z(h, params) / Z(0.0, params))
            predicted = decay if regime == "dense" else decay ** g.q
            measured = np.cov(x0, top.normalized[:, k, idx])[0, 1] / var0
            report.rows.append(relative_row(f"lag profile[{g.name}]({h:g})", predicted, measured, 0.0,
                                            tol["lag_rel"]))
    return report


def cumulant_decay_check(tensors: Sequence[SampleTensor], motif: int, tol: Dict[str, float],
                         batches: int = 5) -> ComparisonReport:
    """Third and fourth k-statistics of the normalized counts along the n-ladder.

    Each rung's replications are split into batches; the batch medians of |k3|
    must decrease in trend, and in the dense regime their log-log slope must
    sit near -1/2.
    """
    if len(tensors) < 3:
        raise ValueError("cumulant decay needs a ladder with at least 3 rungs")
    name = tensors[0].motif_names[motif]
    regime = tensors[-1].rung.regime
    report = ComparisonReport(f"cumulant decay[{name}]")
    ns, k3, k4 = [], [], []
    for tensor in tensors:
        x = tensor.normalized[:, motif, 0]
        parts = np.array_split(x, batches)
        ns.append(tensor.rung.n)
        k3.append(float(np.median([abs(st.kstat(part, 3)) for part in parts])))
        k4.append(float(np.median([abs(st.kstat(part, 4)) for part in parts])))
        report.rows.append(info_row(f"median |k3| (n={tensor.rung.n:g})", 0.0, k3[-1]))
        report.rows.append(info_row(f"median |k4| (n={tensor.rung.n:g})", 0.0, k4[-1]))

    report.rows.append(bound_row("|k3| trend (Spearman)", st.spearmanr(ns, k3).statistic, 0.0, "rho_s<"))
    report.rows.append(bound_row("|k3| top rung below bottom rung", k3[-1] - k3[0], 0.0, "delta<="))
    if regime == "dense":
        fit = st.linregress(np.log(ns), np.log(k3))
        center, halfwidth = tol["slope_center"], tol["slope_halfwidth"]
        report.rows.append(ComparisonRow("log|k3| vs log n slope", center, float(fit.slope), float(fit.stderr),
                                         float((fit.slope - center) / fit.stderr) if fit.stderr > 0 else 0.0,
                                         "|slope-c|", halfwidth, bool(abs(fit.slope - center) <= halfwidth)))
    return report


def calibration_check(rng: np.random.Generator, tol: Dict[str, float], size: int = 1000,
                      batches: int = 5) -> ComparisonReport:
    """The Gaussian machinery fed with exact normals; everything must pass."""
    report = ComparisonReport("calibration")
    x = rng.standard_normal(size)
    report.rows.append(bound_row("KS[N(0,1)]", st.kstest(x, "norm").statistic,
                                 ks_critical_value(tol["ks_alpha"], size), "D"))
    report.rows.append(z_row("skew[N(0,1)]", 0.0, st.skew(x), np.sqrt(6.0 / size), tol["z"]))
    report.rows.append(z_row("exkurt[N(0,1)]", 0.0, st.kurtosis(x), np.sqrt(24.0 / size), tol["z"]))
    report.rows.append(z_row("k3[N(0,1)]", 0.0, st.kstat(x, 3), np.sqrt(6.0 / size), tol["z"]))
    report.rows.append(z_row("k4[N(0,1)]", 0.0, st.kstat(x, 4), np.sqrt(24.0 / size), tol["z"]))
    report.rows.append(batch_median_ks([rng.standard_normal(size) for _ in range(batches)], tol["ks_alpha"]))

    # Rank-one pair: the null direction carries no variance at all
    common = rng.standard_normal(size)
    paired = np.column_stack((common, common))
    sub = gaussianity_check(paired, np.ones((2, 2)), ["u", "v"], tol, rng, min_replications=2,
                            name="calibration projections")
    report.rows.extend(sub.rows)
    return report


def oracle_equivalence_check(cfg: ExperimentConfig, rung_index: int = 0, replications: int = 3,
                             times: int = 50) -> ComparisonReport:
    """Incremental counts against brute-force recounts at random times; exact equality."""
    profile = build_profile(cfg)
    motifs = build_motifs(cfg)
    rung = cfg.ladder[rung_index]
    mismatches = checked = 0
    for r in range(replications):
        seed = derive_seed(cfg.seed, rung_index, r)
        cp, potential, trajectories = simulate_replication(cfg.d, cfg.params, cfg.horizon, profile, motifs,
                                                           rung, seed)
        counter = SubgraphCounter(potential, motifs)
        rng = make_rng(seed, 3)
        for t in rng.uniform(0.0, cfg.horizon, size=times):
            active = {p for p, path in enumerate(trajectories) if path.state_at(t) == 1}
            for k, g in enumerate(motifs):
                checked += 1
                if counter.count_static(active, g) != int(cp.value_at(k, t)):
                    mismatches += 1
                    logger.error(f"Count mismatch for {g.name} at t={t:.6g} (replication seed {seed})")
    report = ComparisonReport(f"incremental vs static[n={rung.n:g}]")
    report.rows.append(bound_row(f"mismatches over {checked} recounts", mismatches, 0, "count"))
    return report


def _two_row_size(a: int, b: int) -> int:
    return sum(comb(a, k) * comb(b, k) * factorial(k) for k in range(min(a, b) + 1))


def _compositions(total: int):
    for cuts in product((0, 1), repeat=total - 1):
        parts, size = [], 1
        for cut in cuts:
            if cut:
                parts.append(size)
                size = 1
            else:
                size += 1
        parts.append(size)
        yield tuple(parts)


def diagram_check(rng: np.random.Generator, tol: Dict[str, float], models: int = 100) -> ComparisonReport:
    """Partition class sizes and the diagram formulae against the factorial-moment oracle."""
    bound = tol["diagram_rel"]
    report = ComparisonReport("diagrams")

    rs = RowStructure((2, 2))
    for cls, expected in (("Pi", 7), ("PiTilde", 6), ("PiTilde_ge2", 2), ("PiBar", 6)):
        size = len(enumerate_partitions(rs, cls))
        report.rows.append(bound_row(f"|{cls}(2,2)| = {expected}", abs(size - expected), 0, "|diff|",
                                     theory=expected))

    size_errors = 0
    for a in range(1, 8):
        for b in range(1, 9 - a):
            if len(enumerate_partitions(RowStructure((a, b)), "Pi")) != _two_row_size(a, b):
                size_errors += 1
    report.rows.append(bound_row("|Pi(a,b)| vs direct count (a+b<=8)", size_errors, 0, "count"))

    bell_errors = inclusion_errors = 0
    for total in range(1, 7):
        for q in _compositions(total):
            rs = RowStructure(q)
            if set_partition_count(rs) != int(bell(total)):
                bell_errors += 1
            classes = {cls: {p.blocks for p in enumerate_partitions(rs, cls)} for cls in CLASSES}
            if not (classes["PiTilde_ge2"] <= classes["PiTilde"] <= classes["Pi"]
                    and classes["PiTilde_ge2"] <= classes["Pi_ge2"] <= classes["Pi"]
                    and classes["PiBar"] <= classes["Pi"]):
                inclusion_errors += 1
    report.rows.append(bound_row("set partitions vs Bell numbers (N<=6)", bell_errors, 0, "count"))
    report.rows.append(bound_row("class inclusions (N<=6)", inclusion_errors, 0, "count"))

    model = FiniteSpaceModel(np.array([1.0, 2.0]), ["a", "b"])
    f = np.array([1.0, 3.0])
    report.rows.append(relative_row("Var(S) two-atom model", 19.0, mixed_central_moment(model, [f, f]), 0.0, bound))
    report.rows.append(relative_row("cum3(S) two-atom model", 55.0, joint_cumulant(model, [f, f, f]), 0.0, bound))

    worst_moment = worst_cumulant = 0.0
    for _ in range(models):
        while True:
            arities = [int(a) for a in rng.integers(1, 4, size=int(rng.integers(1, 4)))]
            if sum(arities) <= 8:
                break
        model = random_finite_model(int(rng.integers(1, 4)), arities, rng)
        worst_moment = max(worst_moment, relative_delta(mixed_central_moment(model, model.kernels),
                                                        oracle_moments(model, model.kernels, "central")))
        worst_cumulant = max(worst_cumulant, relative_delta(joint_cumulant(model, model.kernels),
                                                            oracle_moments(model, model.kernels, "cumulant")))
    report.rows.append(bound_row(f"central moments vs oracle ({models} models)", worst_moment, bound, "max rel"))
    report.rows.append(bound_row(f"cumulants vs oracle ({models} models)", worst_cumulant, bound, "max rel"))
    return report


def theory_check(engine: TheoryEngine, params: OnOffParams, grid: Sequence[float],
                 tol: Dict[str, float]) -> ComparisonReport:
    """Internal consistency of the theory engine and, for the 1-d indicator, its known constants."""
    report = ComparisonReport("theory")
    edge, wedge, triangle = preset("edge"), preset("wedge"), preset("triangle")
    kappa = engine.F_of(edge).value
    tau = engine.F_of(triangle).value
    if engine.d == 1 and engine.profile.kind == "indicator":
        report.rows.append(relative_row("kappa_1", 2.0, kappa, 0.0, 1e-9))
        report.rows.append(relative_row("tau_1", 3.0, tau, 0.0, 1e-9))
        report.rows.append(relative_row("F_n(K2), nu=0.02", 0.04, engine.F_n_of(edge, 0.02).value, 0.0, 1e-9))

    for g in (edge, wedge, triangle):
        for row in engine.F_n_ladder(g, [1e-3, 5e-4]):
            report.rows.append(bound_row(f"F_n/(nu^(q-1) F) [{g.name}, nu={row['nu']:g}]",
                                         abs(row["ratio"] - 1.0), 0.01, "|ratio-1|", theory=1.0))

    for gi, gj in ((edge, edge), (edge, triangle), (wedge, triangle), (triangle, triangle)):
        factorized = (gi.q * engine.F_of(gi).value / automorphism_count(gi)
                      * gj.q * engine.F_of(gj).value / automorphism_count(gj))
        report.rows.append(relative_row(f"F+ factorization [{gi.name},{gj.name}]", factorized,
                                        engine.F_plus(gi, gj), 0.0, 1e-9))

    dense = engine.limit_covariance_matrix([edge, triangle], [0.0], params, "dense")
    eigenvalues = np.linalg.eigvalsh(dense)
    report.rows.append(bound_row("dense (edge, triangle) rank one", eigenvalues.min() / eigenvalues.max(),
                                 1e-8, "min/max eig"))

    asymmetry = 0.0
    motifs = [edge, triangle]
    for regime in ("dense", "sparse"):
        for s, t in product(grid, repeat=2):
            for i, j in product(range(2), repeat=2):
                a = engine.limit_sigma(i, j, s, t, motifs, params, regime)
                b = engine.limit_sigma(j, i, t, s, motifs, params, regime)
                asymmetry = max(asymmetry, abs(a - b))
    report.rows.append(bound_row("Sigma_ij(s,t) = Sigma_ji(t,s)", asymmetry, 1e-12, "max |diff|"))

    scale = 4.0 * engine.limit_sigma(0, 0, 0.0, 0.0, [wedge, triangle], params, "dense") / tau ** 2
    dense_c = engine.sigma_C(0.0, 0.0, wedge, triangle, params, "dense")
    report.rows.append(bound_row("ratio limit vanishes (dense)", abs(dense_c) / scale, 1e-12, "rel"))

    hand = 4.0 / tau - 10.0 * kappa ** 2 / tau ** 2 + 6.0 * kappa ** 4 / tau ** 3
    z0 = float(Z(0.0, params))
    per_z3 = engine.sigma_C(0.0, 0.0, wedge, triangle, params, "sparse") / z0 ** 3
    report.rows.append(relative_row("ratio limit per Z^3 (wedge over triangle)", hand, per_z3, 0.0, 1e-9))
    spread = max(abs(engine.sigma_C(0.0, float(h), wedge, triangle, params, "sparse")
                     / float(Z(h, params)) ** 3 - per_z3) for h in grid)
    report.rows.append(bound_row("ratio limit proportional to Z^3", spread / abs(per_z3), 1e-12, "rel"))

    closed_form = 9 * (36 / tau - 90 * kappa ** 2 / tau ** 2 + 54 * kappa ** 4 / tau ** 3)
    report.rows.append(info_row("closed form vs computed ratio limit per Z^3", closed_form, per_z3))
    if abs(closed_form - per_z3) > 1e-9 * abs(closed_form):
        logger.warning(f"Closed-form ratio limit {closed_form:.10g} differs from the delta-method value "
                       f"{per_z3:.10g} by a factor {closed_form / per_z3:.6g}")
    return report


# ----------------------------------------------------------------------
# Orchestration


def write_report(report: ComparisonReport, out_dir: Path) -> List[Path]:
    out_dir = Path(out_dir)
    stem = "".join(c if c.isalnum() or c in "-_" else "_" for c in report.name).strip("_")
    json_path = write_json(out_dir / f"{stem}.json", report.to_dict())
    table_path = out_dir / f"{stem}.txt"
    table_path.write_text(report.to_table() + "\n", encoding="utf-8")
    return [json_path, table_path]


class VerificationRunner:
    """Runs the verification suites of one experiment config and writes their reports."""

    SUITES = ("diagrams", "theory", "simulation")

    def __init__(self, cfg: ExperimentConfig, out_dir: Path, threads: Optional[int] = None):
        self.logger = logging.getLogger(__name__)
        self.cfg = cfg
        self.out_dir = Path(out_dir)
        self.threads = threads or cfg.threads
        self.tol = dict(Config.DEFAULT_TOLERANCES, **cfg.tolerances)
        self.options: Dict[str, Any] = cfg.verify
        self.written: List[Path] = []

    def _rng(self, *keys: int) -> np.random.Generator:
        return make_rng(self.cfg.seed, 0xC0DE, *keys)

    def _emit(self, report: ComparisonReport) -> ComparisonReport:
        self.written.extend(write_report(report, self.out_dir))
        status = "PASS" if report.passed else "FAIL"
        self.logger.info(f"{report.name}: {status} ({len(report.failing_rows())} failing of {len(report.rows)})")
        for row in report.failing_rows():
            self.logger.warning(f"  failing: {row.name} estimate={row.estimate:.6g} theory={row.theory:.6g} "
                                f"{row.criterion}<={row.threshold:g}")
        return report

    def run(self, suite: str = "all") -> List[ComparisonReport]:
        suites = self.SUITES if suite == "all" else (suite,)
        if any(s not in self.SUITES for s in suites):
            raise ConfigError(f"unknown suite {suite!r}; choose all, {', '.join(self.SUITES)}", field="suite")

        reports = []
        if "simulation" in suites:
            calibration = self._emit(calibration_check(self._rng(1), self.tol))
            reports.append(calibration)
            if not calibration.passed:
                self.logger.error("Calibration failed; model checks of this batch are invalid and were skipped")
                return reports
        if "diagrams" in suites:
            reports.append(self._emit(diagram_check(self._rng(2), self.tol,
                                                    int(self.options.get("diagram_models", 100)))))
        if "theory" in suites or "simulation" in suites:
            engine = build_engine(self.cfg)
        if "theory" in suites:
            reports.append(self._emit(theory_check(engine, self.cfg.params, self.cfg.grid, self.tol)))
        if "simulation" in suites:
            reports.extend(self._simulation(engine))
        return reports

    def _pick(self, key: str, count: int, names: Optional[Sequence[str]] = None) -> List[int]:
        """Indices chosen by a verify option: rung indices, or motif names when `names` is given."""
        chosen = self.options.get(key)
        if chosen is None:
            return list(range(count))
        if names is None:
            if any(not 0 <= int(i) < count for i in chosen):
                raise ConfigError(f"indices must lie in [0, {count})", field=f"verify.{key}")
            return [int(i) for i in chosen]
        missing = [name for name in chosen if name not in names]
        if missing:
            raise ConfigError(f"unknown motifs {missing}", field=f"verify.{key}")
        return [names.index(name) for name in chosen]

    def _simulation(self, engine: TheoryEngine) -> List[ComparisonReport]:
        cfg, tol = self.cfg, self.tol
        motifs = build_motifs(cfg)
        names = [g.name for g in motifs]
        pair = build_ratio_pair(cfg, motifs)
        rungs = len(cfg.ladder)
        covariance_rungs = self._pick("covariance_rungs", rungs)
        covariance_motifs = self._pick("covariance_motifs", len(motifs), names)
        gaussian_rungs = self._pick("gaussianity_rungs", rungs)
        gaussian_motifs = self._pick("gaussianity_motifs", len(motifs), names)
        minimum = int(self.options.get("gaussianity_min_replications", 500))

        reports = [self._emit(activity_check(cfg.params, cfg.horizon, cfg.grid,
                                             int(self.options.get("activity_samples", 100_000)),
                                             self._rng(3), tol))]

        tensors = []
        for idx, rung in enumerate(cfg.ladder):
            tensor, _ = run_replications(cfg, idx, engine=engine, threads=self.threads)
            tensors.append(tensor)
            reports.append(self._emit(mean_check(tensor, engine, motifs, cfg.params, tol)))
            if idx in covariance_rungs and covariance_motifs:
                reports.append(self._emit(covariance_check(subset_tensor(tensor, covariance_motifs), engine,
                                                           [motifs[k] for k in covariance_motifs],
                                                           cfg.params, tol)))
            if pair is not None:
                reports.append(self._emit(ratio_check(tensor, engine, motifs[pair[0]], motifs[pair[1]],
                                                      cfg.params, tol)))
            reports.append(self._emit(oracle_equivalence_check(
                cfg, idx, int(self.options.get("oracle_replications", 3)), int(self.options.get("oracle_times", 50)))))

            if idx not in gaussian_rungs:
                continue
            if tensor.raw.shape[0] < minimum:
                self.logger.warning(f"Gaussianity skipped for rung {idx}: {tensor.raw.shape[0]} < {minimum} replications")
                continue
            chosen = [motifs[k] for k in gaussian_motifs]
            part = subset_tensor(tensor, gaussian_motifs)
            sigma = engine.limit_covariance_matrix(chosen, part.grid, cfg.params, rung.regime)
            labels = [f"{g.name}@{t:g}" for g in chosen for t in part.grid]
            reports.append(self._emit(gaussianity_check(
                part.normalized.reshape(len(part.normalized), -1), sigma, labels, tol, self._rng(4, idx),
                min_replications=minimum, name=f"gaussianity[n={rung.n:g},nu={rung.nu:g}]")))

        seed_batches = int(self.options.get("seed_batches", 1))
        if seed_batches > 1 and gaussian_rungs:
            reports.append(self._emit(self._batch_median(engine, motifs, gaussian_rungs[0], gaussian_motifs[0],
                                                         seed_batches)))
        regimes = {t.rung.regime for t in tensors}
        if len(motifs) >= 2 and len(regimes) == 1 and self.options.get("correlation", True):
            reports.append(self._emit(correlation_structure_check(
                tensors, motifs, cfg.params, tol, lag_motifs=self._pick("lag_motifs", len(motifs), names))))
        if len(tensors) >= 3 and len(regimes) == 1:
            reports.append(self._emit(cumulant_decay_check(tensors, 0, tol,
                                                           int(self.options.get("batches", 5)))))
        return reports

    def _batch_median(self, engine: TheoryEngine, motifs: Sequence[SmallGraph], rung_index: int, motif: int,
                      batches: int) -> ComparisonReport:
        """One rung, one motif, first grid time, re-simulated under independent master seeds."""
        cfg = self.cfg
        rung = cfg.ladder[rung_index]
        variance = engine.limit_sigma(motif, motif, cfg.grid[0], cfg.grid[0], motifs, cfg.params, rung.regime)
        standardized = []
        for b in range(batches):
            seeds = [derive_seed(cfg.seed, 0xBA7C, b, r) for r in range(cfg.replications)]
            tensor, _ = run_replications(cfg, rung_index, engine=engine, seeds=seeds, threads=self.threads)
            standardized.append(tensor.normalized[:, motif, 0] / np.sqrt(variance))
        report = ComparisonReport(f"gaussianity batch median[{motifs[motif].name},n={rung.n:g}]")
        report.rows.append(batch_median_ks(standardized, self.tol["ks_alpha"]))
        return report
