# main.py
"""Command-line entry point: simulate, theory, verify and diagrams subcommands."""

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence

from config import Config, load_experiment_config
from counts import normalize, write_counts_csv, write_ratio_csv
from diagrams import diagram_summary, load_model, random_finite_model
from errors import ConfigError, PartitionSizeError, RcmToolkitError, RegimeError
from geometry import write_points_csv
from logger import replication_context, setup_logging
from models import RunManifest
from rcm import write_edges_csv
from stats import (VerificationRunner, build_engine, build_motifs, build_profile, build_ratio_pair, ratio_path,
                   run_replications, simulate_replication)
from theory import theory_report
from utils import file_sha256, format_rung_label, make_rng, verify_manifest, write_json

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--threads", type=int, help="cap on worker processes")
    common.add_argument("--out", type=Path, default=Config.OUTPUT_FOLDER, help="output directory")
    common.add_argument("--log-level", default=Config.LOG_LEVEL)

    parser = argparse.ArgumentParser(prog="rcm-toolkit",
                                     description="Dynamic random connection model: simulation, theory and checks")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", parents=[common], help="simulate count processes to CSV")
    simulate.add_argument("--replications", type=int, help="replications per rung (default: config)")
    simulate.add_argument("--no-geometry", action="store_true", help="skip points/edges CSV of replication 0")

    theory = sub.add_parser("theory", parents=[common], help="theory report JSON")
    theory.add_argument("--nu-ladder", type=float, nargs="*", default=[],
                        help="nu values for the torus Monte Carlo ladder")

    verify = sub.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument("--suite", choices=("all",) + VerificationRunner.SUITES, default="all")

    diagrams = sub.add_parser("diagrams", parents=[common], help="diagram formulae on a finite-space model")
    diagrams.add_argument("--rows", help="row structure, e.g. 2,2")
    diagrams.add_argument("--model", type=Path, help="model JSON (atoms, intensities, kernels)")
    diagrams.add_argument("--atoms", type=int, default=3, help="atoms of a random model when --model is absent")
    return parser


def parse_rows(text: str) -> List[int]:
    try:
        rows = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}", field="--rows")
    if not rows or any(q < 1 for q in rows):
        raise ConfigError("row lengths must be positive", field="--rows")
    return rows


def load_config(args):
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg, raw_text = load_experiment_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = max(1, args.threads)
    return cfg, raw_text


def write_manifest(out_dir: Path, manifest: RunManifest, outputs: Sequence[Path]) -> int:
    """Hash every output, write manifest.json, and re-verify it."""
    manifest.finished = datetime.now().isoformat(timespec="seconds")
    manifest.outputs = [{"path": Path(p).relative_to(out_dir).as_posix(), "sha256": file_sha256(p)}
                        for p in sorted(set(Path(p) for p in outputs))]
    path = write_json(out_dir / "manifest.json", manifest.to_dict())
    logger.info(f"Manifest written: {path} ({len(manifest.outputs)} outputs)")
    mismatched = verify_manifest(path)
    if mismatched:
        logger.error(f"Manifest verification failed for: {', '.join(mismatched)}")
        return EXIT_FAILED
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg, raw_text = load_config(args)
    out_dir = Path(args.out)
    manifest = RunManifest(Config.VERSION, cfg.seed, raw_text, datetime.now().isoformat(timespec="seconds"))
    profile = build_profile(cfg)
    motifs = build_motifs(cfg)
    pair = build_ratio_pair(cfg, motifs)
    engine = build_engine(cfg, profile)
    outputs = []

    for idx, rung in enumerate(cfg.ladder):
        label = format_rung_label(idx, rung.n, rung.nu)
        logger.info(f"Rung {label} ({rung.regime})")
        tensor, processes = run_replications(cfg, idx, engine=engine, keep_processes=True,
                                             replications=args.replications)
        means = [engine.expected_count(rung.n, rung.nu, g, cfg.params) for g in motifs]
        runs = [(r, cp, normalize(cp, motifs, rung.n, rung.nu, cfg.params, rung.regime, means=means))
                for r, cp in enumerate(processes)]
        outputs.append(write_counts_csv(out_dir / label / "counts.csv", runs))
        outputs.append(write_json(out_dir / label / "summary.json", tensor.summary()))
        if pair is not None:
            expected = engine.expected_ratio(rung.n, rung.nu, motifs[pair[0]], motifs[pair[1]], cfg.params)
            ratios = []
            for r, cp in enumerate(processes):
                with replication_context(tensor.seeds[r], r):
                    ratios.append((r, ratio_path(cp, motifs, pair, rung, expected)))
            outputs.append(write_ratio_csv(out_dir / label / "ratio.csv", ratios))
            logger.info(f"  {tensor.ratio_name}: {tensor.degenerate_paths} degenerate path(s)")

        if not args.no_geometry:
            with replication_context(tensor.seeds[0], 0):
                _, potential, _ = simulate_replication(cfg.d, cfg.params, cfg.horizon, profile, motifs, rung,
                                                       tensor.seeds[0])
            outputs.append(write_points_csv(potential.points, out_dir / label / "points.csv"))
            outputs.append(write_edges_csv(potential, out_dir / label / "edges.csv"))
        for k, g in enumerate(motifs):
            logger.info(f"  {g.name}: mean over grid {tensor.raw[:, k, :].mean():.6g} (exact {means[k]:.6g})")

    return write_manifest(out_dir, manifest, outputs)


def cmd_theory(args) -> int:
    cfg, raw_text = load_config(args)
    out_dir = Path(args.out)
    manifest = RunManifest(Config.VERSION, cfg.seed, raw_text, datetime.now().isoformat(timespec="seconds"))
    engine = build_engine(cfg)
    report = theory_report(engine, build_motifs(cfg), cfg.params, cfg.ladder, cfg.grid, nu_ladder=args.nu_ladder)
    path = write_json(out_dir / "theory.json", report)

    constants = report["constants"]
    logger.info(f"kappa = {constants['kappa']['value']:.10g}, tau = {constants['tau']['value']:.10g}")
    for row in report["sigma_C"]:
        logger.info(f"Sigma^C[{row['G1']}/{row['G2']}]({row['s']:g},{row['t']:g}) {row['regime']}: "
                    f"{row['value']:.6g} (per Z^q {row['value_over_Zq']:.6g})")
    return write_manifest(out_dir, manifest, [path])


def cmd_verify(args) -> int:
    cfg, raw_text = load_config(args)
    out_dir = Path(args.out)
    manifest = RunManifest(Config.VERSION, cfg.seed, raw_text, datetime.now().isoformat(timespec="seconds"))
    runner = VerificationRunner(cfg, out_dir / "reports", threads=cfg.threads)
    reports = runner.run(args.suite)

    failing = [report for report in reports if not report.passed]
    logger.info("=" * 60)
    for report in reports:
        logger.info(f"{'PASS' if report.passed else 'FAIL'}  {report.name}")
    logger.info("=" * 60)
    for report in failing:
        for row in report.failing_rows():
            logger.error(f"{report.name}: {row.name} estimate={row.estimate:.6g} theory={row.theory:.6g} "
                         f"{row.criterion}<={row.threshold:g}")

    status = write_manifest(out_dir, manifest, runner.written)
    return EXIT_FAILED if failing else status


def cmd_diagrams(args) -> int:
    rows = parse_rows(args.rows) if args.rows else None
    if rows is not None and sum(rows) > Config.MAX_PARTITION_ELEMENTS:
        raise PartitionSizeError(f"N = {sum(rows)} exceeds the enumeration guard {Config.MAX_PARTITION_ELEMENTS}")
    if args.model is not None:
        model = load_model(args.model)
        kernels = list(model.kernels)
        if rows is not None:
            if len(kernels) == 1 and all(q == kernels[0].ndim for q in rows):
                kernels = kernels * len(rows)
            elif [k.ndim for k in kernels] != rows:
                raise ConfigError(f"kernels have orders {[k.ndim for k in kernels]}, rows ask for {rows}",
                                  field="--rows")
    else:
        if rows is None:
            raise ConfigError("need --rows or --model")
        seed = args.seed if args.seed is not None else 0
        model = random_finite_model(args.atoms, rows, make_rng(seed, *rows))
        kernels = list(model.kernels)

    summary = diagram_summary(model, kernels)
    out_dir = Path(args.out)
    path = write_json(out_dir / "diagrams.json", summary)
    for key, value in summary.items():
        logger.info(f"{key}: {value}")
    logger.info(f"Written: {path}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "theory": cmd_theory,
    "verify": cmd_verify,
    "diagrams": cmd_diagrams,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function."""
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)

    logger.info("=" * 60)
    logger.info(f"RCM toolkit {Config.VERSION}: {args.command}")
    logger.info("=" * 60)

    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](args)
    except (ConfigError, PartitionSizeError, RegimeError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except RcmToolkitError as e:
        logger.error(f"Error: {e}", exc_info=True)
        return EXIT_FAILED

    logger.info("=" * 60)
    logger.info("Completed!" if code == EXIT_OK else "Completed with failures")
    logger.info("=" * 60)
    return code


if __name__ == "__main__":
    sys.exit(main())
