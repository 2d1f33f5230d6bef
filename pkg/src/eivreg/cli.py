"""Command-line interface.

Subcommands: estimate, simulate, law, adr, efficiency, verify.  One YAML
configuration document drives every subcommand; command-line overrides are
limited to the master seed, replication count, sample size, worker count, and
output directory.  Every run writes a plain-text manifest with the
configuration digest so outputs can be audited and reproduced.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .asymptotics import (estimate_score_cov, joint_law, named_weight_limit,
                          population)
from .config import RunConfig, load_config
from .csvio import read_matrix_csv, write_manifest, write_matrix_csv, write_rows_csv
from .estimators import estimate_all
from .exceptions import ConfigError, EivregError
from .model import make_restricted_b
from .montecarlo import SimulationPlan, compare_law, run_plan
from .risk import dominance_report, efficiency_curve

LAW_LABELS = ("UE", "B2", "B3", "B4")
EFFICIENCY_HEADER = ["scale", "theta0_norm2", "adr_ue", "adr_re",
                     "relative_efficiency", "verdict"]


def _version() -> str:
    from . import __version__

    return __version__


def _law_pieces(run: RunConfig):
    pm = population(run.model)
    cfg_s = run.model.at_n(run.score_cov.n) if run.score_cov.n != run.model.n \
        else run.model
    b_s = make_restricted_b(cfg_s, run.restriction, run.b_truth_seed())
    score = estimate_score_cov(cfg_s, b_s, reps=run.score_cov.reps,
                               seed=run.simulation.master_seed)
    return pm, score


def _finish(out_dir: Path, command: str, run: RunConfig, written: list[Path]) -> None:
    write_manifest(out_dir / "manifest.txt", {
        "command": command,
        "config_digest": run.digest,
        "master_seed": run.simulation.master_seed,
        "artifact_version": _version(),
        "output_paths": sorted(p.name for p in written),
    })


def cmd_estimate(run: RunConfig, z_csv, x_csv, out_dir: Path) -> int:
    Z = read_matrix_csv(z_csv)
    X = read_matrix_csv(x_csv)
    if Z.shape[0] != X.shape[0]:
        raise ConfigError(
            f"Z has {Z.shape[0]} rows but X has {X.shape[0]}")
    if X.shape[1] != run.model.p or Z.shape[1] != run.model.q:
        raise ConfigError(
            f"expected X with {run.model.p} and Z with {run.model.q} columns, "
            f"got {X.shape[1]} and {Z.shape[1]}")
    est = estimate_all(X, Z, run.model.sigma_delta2, run.restriction)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"LSE": ("b_lse.csv", est.b_lse), "UE": ("b1.csv", est.b1),
             "B2": ("b2.csv", est.b2), "B3": ("b3.csv", est.b3),
             "B4": ("b4.csv", est.b4)}
    written = []
    for _, (name, mat) in files.items():
        write_matrix_csv(out_dir / name, mat)
        written.append(out_dir / name)
    write_manifest(out_dir / "estimators.txt",
                   {label: name for label, (name, _) in files.items()})
    written.append(out_dir / "estimators.txt")
    _finish(out_dir, "estimate", run, written)
    return 0


def cmd_law(run: RunConfig, out_dir: Path, workers: int = 1) -> int:
    pm, score = _law_pieces(run)
    labels = tuple(l for l in run.simulation.estimators if l in LAW_LABELS)
    if not labels:
        raise ConfigError("no law-compatible estimators configured")
    law = joint_law(pm, score, run.restriction, estimators=labels)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    write_matrix_csv(out_dir / "score_cov.csv", score.cov)
    written.append(out_dir / "score_cov.csv")
    for lbl in labels:
        path = out_dir / f"mean_{lbl}.csv"
        write_matrix_csv(path, law.mean(lbl))
        written.append(path)
    for i in range(len(labels)):
        for j in range(len(labels)):
            path = out_dir / f"cov_{i + 1}_{j + 1}.csv"
            write_matrix_csv(path, law.cov_blocks[(i, j)])
            written.append(path)
    write_manifest(out_dir / "blocks.txt", {
        "labels": list(labels),
        **{f"block_{i + 1}_{j + 1}": f"cov_{i + 1}_{j + 1}.csv"
           for i in range(len(labels)) for j in range(len(labels))},
    })
    written.append(out_dir / "blocks.txt")
    _finish(out_dir, "law", run, written)
    return 0


def cmd_simulate(run: RunConfig, out_dir: Path, workers: int = 1) -> int:
    plan = SimulationPlan(cfg=run.model, restr=run.restriction,
                          b_seed=run.b_truth_seed(), reps=run.simulation.reps,
                          master_seed=run.simulation.master_seed + 7,
                          estimators=run.simulation.estimators,
                          weight=run.weight_matrix())
    summary = run_plan(plan, workers=workers)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for lbl, mat in summary.mean_errors.items():
        path = out_dir / f"mean_error_{lbl}.csv"
        write_matrix_csv(path, mat)
        written.append(path)
    write_matrix_csv(out_dir / "cov_empirical.csv", summary.cov_empirical)
    written.append(out_dir / "cov_empirical.csv")
    loss_rows = np.column_stack([summary.per_rep_losses[lbl]
                                 for lbl in summary.labels])
    write_rows_csv(out_dir / "losses.csv", list(summary.labels),
                   [list(map(float, row)) for row in loss_rows])
    written.append(out_dir / "losses.csv")
    verdict_lines = [f"replications={summary.rep_count}",
                     f"excluded={len(summary.excluded)}"]
    if all(lbl in LAW_LABELS for lbl in summary.labels):
        pm, score = _law_pieces(run)
        law = joint_law(pm, score, run.restriction, estimators=summary.labels)
        cmp = compare_law(summary, law)
        rows = [[i + 1, j + 1, cmp.cov_rel_fro[(i, j)]]
                for i in range(len(summary.labels))
                for j in range(len(summary.labels))]
        write_rows_csv(out_dir / "compare_cov.csv",
                       ["block_i", "block_j", "rel_frobenius"],
                       [[str(a), str(b), float(c)] for a, b, c in rows])
        written.append(out_dir / "compare_cov.csv")
        write_rows_csv(out_dir / "compare_means.csv",
                       ["estimator", "max_abs_se"],
                       [[lbl, float(cmp.mean_max_se[lbl])]
                        for lbl in summary.labels])
        written.append(out_dir / "compare_means.csv")
        verdict_lines.append(
            f"law_agreement={'PASS' if cmp.passed else 'FAIL'}")
        verdict_lines.append(f"worst_cov_block={cmp.worst_cov:.6f}")
        verdict_lines.append(f"worst_mean_se={cmp.worst_mean:.6f}")
    else:
        verdict_lines.append("law_agreement=SKIPPED (non-limit estimators present)")
    (out_dir / "verdict.txt").write_text("\n".join(verdict_lines) + "\n",
                                         encoding="utf-8")
    written.append(out_dir / "verdict.txt")
    _finish(out_dir, "simulate", run, written)
    return 0


def cmd_adr(run: RunConfig, out_dir: Path, workers: int = 1) -> int:
    pm, score = _law_pieces(run)
    w = run.weight_matrix()
    labels = [l for l in run.simulation.estimators if l in ("B2", "B3", "B4")]
    if not labels:
        labels = [run.risk.q0]
    rows = []
    for lbl in labels:
        rep = dominance_report(w, pm, score, run.restriction,
                               named_weight_limit(pm, lbl))
        rows.append([lbl, rep.adr_ue, rep.adr_re, rep.variance_gain,
                     rep.bias_form_min, rep.bias_form_max,
                     rep.lower_threshold, rep.upper_threshold,
                     rep.theta0_norm2, rep.relative_efficiency, rep.verdict])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out_dir / "adr.csv",
                   ["estimator", "adr_ue", "adr_re", "variance_gain",
                    "bias_form_min", "bias_form_max", "lower_threshold",
                    "upper_threshold", "theta0_norm2", "relative_efficiency",
                    "verdict"],
                   rows)
    _finish(out_dir, "adr", run, [out_dir / "adr.csv"])
    return 0


def cmd_efficiency(run: RunConfig, out_dir: Path, workers: int = 1) -> int:
    pm, score = _law_pieces(run)
    w = run.weight_matrix()
    q0 = named_weight_limit(pm, run.risk.q0)
    theta0 = run.restriction.theta0
    if np.linalg.norm(theta0) == 0:
        theta0 = np.ones_like(run.restriction.theta)
    direction = theta0 / np.linalg.norm(theta0)
    npts = max(run.risk.grid, 2)
    if run.risk.scale_max is not None:
        scales = np.linspace(0.0, run.risk.scale_max, npts)
    else:
        base = dominance_report(w, pm, score, run.restriction, q0,
                                theta0=np.zeros_like(direction))
        top = base.upper_threshold if math.isfinite(base.upper_threshold) else 1.0
        scales = np.sqrt(np.linspace(0.0, 2.0 * top, npts))
    rows = efficiency_curve(w, pm, score, run.restriction, q0, direction, scales)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rows_csv(out_dir / "efficiency.csv", EFFICIENCY_HEADER,
                   [[r.scale, r.theta0_norm2, r.adr_ue, r.adr_re,
                     r.relative_efficiency, r.verdict] for r in rows])
    _finish(out_dir, "efficiency", run, [out_dir / "efficiency.csv"])
    return 0


def cmd_verify(run: RunConfig, out_dir: Path, workers: int = 1) -> int:
    from .verify import run_acceptance

    results = run_acceptance(run, out_dir, workers=workers)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  criterion {r.number}: "
              f"{r.name} -- {r.detail}")
    return 0 if all(r.passed for r in results) else 4


def run_command(command: str, run: RunConfig, out_dir, workers: int = 1) -> int:
    """Programmatic dispatcher for the config-driven subcommands."""
    out_dir = Path(out_dir)
    dispatch = {"law": cmd_law, "simulate": cmd_simulate, "adr": cmd_adr,
                "efficiency": cmd_efficiency, "verify": cmd_verify}
    return dispatch[command](run, out_dir, workers=workers)


def _apply_overrides(run: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        run = replace(run, simulation=replace(run.simulation,
                                              master_seed=args.seed))
    if getattr(args, "reps", None) is not None:
        run = replace(run, simulation=replace(run.simulation, reps=args.reps),
                      score_cov=replace(run.score_cov, reps=args.reps))
    if getattr(args, "n", None) is not None:
        run = replace(run, model=run.model.at_n(args.n))
    return run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eivreg",
        description="Measurement-error multivariate regression: estimation, "
                    "asymptotic laws, risk analysis, and verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override master seed")
        p.add_argument("--reps", type=int, help="override replication count")
        p.add_argument("--n", type=int, help="override sample size")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: machine parallelism)")

    p_est = sub.add_parser("estimate", help="estimate from CSV data")
    common(p_est)
    p_est.add_argument("--z", required=True, help="responses CSV (n x q)")
    p_est.add_argument("--x", required=True, help="predictors CSV (n x p)")
    for name, desc in (("simulate", "replication study with law comparison"),
                       ("law", "asymptotic law blocks"),
                       ("adr", "risk comparison report"),
                       ("efficiency", "relative-efficiency sweep"),
                       ("verify", "full acceptance suite")):
        common(sub.add_parser(name, help=desc))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = load_config(args.config)
        run = _apply_overrides(run, args)
        out_dir = Path(args.out)
        if args.command == "estimate":
            return cmd_estimate(run, args.z, args.x, out_dir)
        return run_command(args.command, run, out_dir, workers=args.workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EivregError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
