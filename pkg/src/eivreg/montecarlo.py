"""Replication engine: generate datasets, estimate, accumulate scaled errors
and losses, and compare empirical moments against the theoretical limit laws.

Seeding contract: replication r of a plan draws from
``numpy.random.default_rng([master_seed, 0, r])`` (score-covariance estimation
uses stream tag 1, the affine-limit suite tag 2).  Results are therefore
independent of evaluation order and of the worker count, and reruns are
bit-reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .asymptotics import AsymptoticLaw
from .estimators import build_kx, lse, restricted
from .exceptions import NearSingular, ShapeMismatch
from .linalg import (AffineTransform, MatrixNormal, psd_factor, rvec,
                     sample_matrix_normal, sym, transform_cov_block)
from .model import ModelConfig, Restriction, generate, make_restricted_b

KNOWN_ESTIMATORS = ("LSE", "UE", "B2", "B3", "B4", "generic")
MAX_EXCLUDED_FRACTION = 0.01


@dataclass(frozen=True)
class SimulationPlan:
    cfg: ModelConfig
    restr: Restriction
    b_seed: np.ndarray
    reps: int
    master_seed: int
    estimators: tuple[str, ...] = ("UE", "B2", "B3", "B4")
    weight: np.ndarray | None = None      # loss weight, identity when None
    generic_weight: np.ndarray | None = None  # fixed weight for the "generic" label
    n: int | None = None

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("reps must be at least 2")
        if not self.estimators:
            raise ValueError("estimator set must be nonempty")
        for lbl in self.estimators:
            if lbl not in KNOWN_ESTIMATORS:
                raise ValueError(f"unknown estimator label {lbl!r}")
        if "generic" in self.estimators and self.generic_weight is None:
            raise ValueError("the generic estimator needs generic_weight")
        object.__setattr__(self, "b_seed", np.asarray(self.b_seed, dtype=float))

    @property
    def sample_size(self) -> int:
        return self.cfg.n if self.n is None else self.n


@dataclass(frozen=True)
class EmpiricalSummary:
    """Per-estimator scaled-error moments from one plan run."""

    labels: tuple[str, ...]
    p: int
    q: int
    n: int
    rep_count: int
    errors: np.ndarray                   # (kept reps, len(labels)*p*q), rvec rows
    per_rep_losses: dict[str, np.ndarray]
    excluded: tuple[int, ...] = ()

    @property
    def mean_errors(self) -> dict[str, np.ndarray]:
        k = self.p * self.q
        out = {}
        for i, lbl in enumerate(self.labels):
            out[lbl] = self.errors[:, i * k:(i + 1) * k].mean(axis=0).reshape(self.p, self.q)
        return out

    @property
    def cov_empirical(self) -> np.ndarray:
        return np.atleast_2d(np.cov(self.errors.T))

    def block(self, i: int, j: int) -> np.ndarray:
        k = self.p * self.q
        full = self.cov_empirical
        return full[i * k:(i + 1) * k, j * k:(j + 1) * k]


def _estimate_labels(X, Z, cfg, restr, labels, generic_weight):
    out = {}
    att = None
    b1 = None
    need_b1 = any(lbl != "LSE" for lbl in labels)
    if need_b1:
        att = build_kx(X, cfg.sigma_delta2)
        b1 = np.linalg.solve(att.n * att.sigma_d, X.T @ Z)
    for lbl in labels:
        if lbl == "LSE":
            out[lbl] = lse(X, Z)
        elif lbl == "UE":
            out[lbl] = b1
        elif lbl == "B2":
            out[lbl] = restricted(b1, att.n * att.sigma_d, restr)
        elif lbl == "B3":
            out[lbl] = restricted(b1, att.n * att.sigma_x, restr)
        elif lbl == "B4":
            out[lbl] = restricted(b1, float(att.n) * np.eye(cfg.p), restr)
        else:
            out[lbl] = restricted(b1, generic_weight, restr)
    return out


def _run_chunk(plan: SimulationPlan, b_truth: np.ndarray, start: int,
               stop: int) -> tuple[int, np.ndarray, np.ndarray, list[int]]:
    n = plan.sample_size
    k = plan.cfg.p * plan.cfg.q
    m = len(plan.estimators)
    w = np.eye(plan.cfg.p) if plan.weight is None else plan.weight
    errs = np.zeros((stop - start, m * k))
    losses = np.zeros((stop - start, m))
    bad: list[int] = []
    root_n = math.sqrt(n)
    for r in range(start, stop):
        rng = np.random.default_rng([plan.master_seed, 0, r])
        ds = generate(plan.cfg, b_truth, rng, n=n)
        try:
            est = _estimate_labels(ds.X, ds.Z, plan.cfg, plan.restr,
                                   plan.estimators, plan.generic_weight)
        except NearSingular:
            bad.append(r)
            continue
        row = r - start
        for i, lbl in enumerate(plan.estimators):
            dev = est[lbl] - b_truth
            errs[row, i * k:(i + 1) * k] = root_n * rvec(dev)
            losses[row, i] = n * float(np.trace(dev.T @ w @ dev))
    return start, errs, losses, bad


def run_plan(plan: SimulationPlan, workers: int = 1) -> EmpiricalSummary:
    """Run all replications; deterministic for a fixed plan at any worker count.

    Replications hitting NearSingular are excluded; more than 1% excluded is an
    error.
    """
    n = plan.sample_size
    b_truth = make_restricted_b(plan.cfg, plan.restr, plan.b_seed, n=n)
    k = plan.cfg.p * plan.cfg.q
    m = len(plan.estimators)
    errors = np.zeros((plan.reps, m * k))
    losses = np.zeros((plan.reps, m))
    excluded: list[int] = []
    if workers <= 1 or plan.reps < 4:
        chunks = [(0, plan.reps)]
    else:
        step = max(1, math.ceil(plan.reps / (4 * workers)))
        chunks = [(s, min(s + step, plan.reps)) for s in range(0, plan.reps, step)]
    if len(chunks) == 1:
        results = [_run_chunk(plan, b_truth, *chunks[0])]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, plan, b_truth, s, e)
                       for s, e in chunks]
            results = [f.result() for f in futures]
    for start, errs, loss, bad in results:
        errors[start:start + errs.shape[0]] = errs
        losses[start:start + loss.shape[0]] = loss
        excluded.extend(bad)
    if len(excluded) > MAX_EXCLUDED_FRACTION * plan.reps:
        raise NearSingular(
            f"{len(excluded)} of {plan.reps} replications were near-singular")
    keep = np.ones(plan.reps, dtype=bool)
    keep[excluded] = False
    errors = errors[keep]
    losses = losses[keep]
    per_label = {lbl: losses[:, i].copy() for i, lbl in enumerate(plan.estimators)}
    return EmpiricalSummary(labels=plan.estimators, p=plan.cfg.p, q=plan.cfg.q,
                            n=n, rep_count=int(keep.sum()), errors=errors,
                            per_rep_losses=per_label,
                            excluded=tuple(sorted(excluded)))


@dataclass(frozen=True)
class LawComparison:
    labels: tuple[str, ...]
    cov_rel_fro: dict[tuple[int, int], float]
    mean_max_se: dict[str, float]
    tol_cov: float
    tol_mean_se: float

    @property
    def worst_cov(self) -> float:
        return max(self.cov_rel_fro.values())

    @property
    def worst_mean(self) -> float:
        return max(self.mean_max_se.values())

    @property
    def passed(self) -> bool:
        return self.worst_cov <= self.tol_cov and self.worst_mean <= self.tol_mean_se


def compare_law(summary: EmpiricalSummary, law: AsymptoticLaw,
                tol_cov: float = 0.15, tol_mean_se: float = 4.0) -> LawComparison:
    """Per-block relative Frobenius discrepancy of the covariance grid and
    per-estimator standardized mean discrepancies."""
    if summary.labels != law.labels or (summary.p, summary.q) != (law.p, law.q):
        raise ShapeMismatch("summary and law describe different estimator stacks")
    k = summary.p * summary.q
    cov_rel = {}
    for i in range(len(summary.labels)):
        for j in range(len(summary.labels)):
            ref = law.cov_blocks[(i, j)]
            emp = summary.block(i, j)
            denom = np.linalg.norm(ref)
            cov_rel[(i, j)] = float(np.linalg.norm(emp - ref) /
                                    (denom if denom > 0 else 1.0))
    mean_se = {}
    for i, lbl in enumerate(summary.labels):
        cols = summary.errors[:, i * k:(i + 1) * k]
        se = cols.std(axis=0, ddof=1) / math.sqrt(summary.rep_count)
        diff = np.abs(cols.mean(axis=0) - rvec(law.means[i]))
        mean_se[lbl] = float(np.max(diff / np.where(se > 0, se, 1.0)))
    return LawComparison(labels=summary.labels, cov_rel_fro=cov_rel,
                         mean_max_se=mean_se, tol_cov=tol_cov,
                         tol_mean_se=tol_mean_se)


def summary_from_law_draws(law: AsymptoticLaw, ndraws: int,
                           rng: np.random.Generator) -> EmpiricalSummary:
    """Sample the stacked limit law directly (bypassing the model); the
    resulting summary must agree with the law itself."""
    factor = psd_factor(sym(law.full_cov()))
    z = rng.standard_normal((ndraws, factor.shape[1]))
    draws = z @ factor.T + law.full_mean()
    losses = {lbl: np.zeros(ndraws) for lbl in law.labels}
    return EmpiricalSummary(labels=law.labels, p=law.p, q=law.q, n=0,
                            rep_count=ndraws, errors=draws,
                            per_rep_losses=losses)


@dataclass(frozen=True)
class AffineLimitReport:
    """Empirical check that converging affine transforms of a converging
    matrix-normal sequence obey the block covariance formula."""

    m: int
    block_rel_fro: dict[tuple[int, int], float]
    mean_max_se: float
    pair_cross_rel: float
    passed: bool
    tol_cov: float = 0.10
    tol_mean_se: float = 4.0


def _random_transform(p: int, q: int, g: np.random.Generator) -> AffineTransform:
    return AffineTransform(kappa=g.uniform(-1, 1, (p, p)),
                           iota=g.uniform(-1, 1, (q, q)),
                           alpha=g.uniform(-1, 1, (p, p)),
                           beta=g.uniform(-1, 1, (q, q)),
                           rho=g.uniform(-1, 1, (p, q)))


def affine_limit_suite(m: int, seed: int, p: int = 2, q: int = 2,
                       draws: int = 100_000, n_conv: int = 10_000,
                       tol_cov: float = 0.10,
                       tol_mean_se: float = 4.0) -> AffineLimitReport:
    """Build m random affine transforms with coefficients converging at rate
    n^{-1/2}, push a converging matrix-normal sequence through them, and match
    the empirical joint covariance against the block formula and the empirical
    means against the offsets.

    Also verifies the two-transform specialization with an identity first
    component: the cross block must equal lam @ (I + kron(alpha2.T, beta2)).
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    g = np.random.default_rng([seed, 2, 0])
    pq = p * q
    f = g.standard_normal((pq, pq))
    lam = sym(f @ f.T) / pq + 0.5 * np.eye(pq)
    transforms = [_random_transform(p, q, g) for _ in range(m)]
    law = MatrixNormal(mean=np.zeros((p, q)), cov=lam)
    y = sample_matrix_normal(law, g, size=draws)
    y = y + g.standard_normal(y.shape) / math.sqrt(n_conv)
    scale = 1.0 / math.sqrt(n_conv)
    stacked = np.empty((draws, m * pq))
    for j, t in enumerate(transforms):
        kap = t.kappa + scale * g.standard_normal((draws, p, p))
        iot = t.iota + scale * g.standard_normal((draws, q, q))
        alp = t.alpha + scale * g.standard_normal((draws, p, p))
        bet = t.beta + scale * g.standard_normal((draws, q, q))
        rho = t.rho + scale * g.standard_normal((draws, p, q))
        val = np.einsum("rab,rbc,rcd->rad", kap, y, iot) \
            + np.einsum("rab,rbc,rcd->rad", alp, y, bet) + rho
        stacked[:, j * pq:(j + 1) * pq] = val.reshape(draws, pq)
    emp_cov = np.cov(stacked.T)
    block_rel = {}
    for i in range(m):
        for j in range(m):
            ref = transform_cov_block(transforms[i], transforms[j], lam)
            emp = emp_cov[i * pq:(i + 1) * pq, j * pq:(j + 1) * pq]
            denom = np.linalg.norm(ref)
            block_rel[(i, j)] = float(np.linalg.norm(emp - ref) /
                                      (denom if denom > 0 else 1.0))
    se = stacked.std(axis=0, ddof=1) / math.sqrt(draws)
    target = np.concatenate([rvec(t.rho) for t in transforms])
    mean_max = float(np.max(np.abs(stacked.mean(axis=0) - target) / se))

    # identity-first pair: the cross block gains the transposed-lift factor
    # and the second diagonal block is the two-sided lift of the score cov
    t_pair = AffineTransform(kappa=np.eye(p), iota=np.eye(q),
                             alpha=transforms[0].alpha, beta=transforms[0].beta,
                             rho=transforms[0].rho)
    base = y.reshape(draws, pq)
    second = (y + np.einsum("ab,rbc,cd->rad", t_pair.alpha, y, t_pair.beta)
              + t_pair.rho).reshape(draws, pq)
    joint = np.cov(np.hstack([base, second]).T)
    lift2 = np.eye(pq) + np.kron(t_pair.alpha, t_pair.beta.T)
    v12_ref = lam + lam @ np.kron(t_pair.alpha.T, t_pair.beta)
    v22_ref = lift2 @ lam @ lift2.T
    pair_rel = max(
        float(np.linalg.norm(joint[:pq, pq:] - v12_ref) / np.linalg.norm(v12_ref)),
        float(np.linalg.norm(joint[pq:, pq:] - v22_ref) / np.linalg.norm(v22_ref)))

    passed = (max(block_rel.values()) <= tol_cov and mean_max <= tol_mean_se
              and pair_rel <= tol_cov)
    return AffineLimitReport(m=m, block_rel_fro=block_rel, mean_max_se=mean_max,
                             pair_cross_rel=pair_rel, passed=passed,
                             tol_cov=tol_cov, tol_mean_se=tol_mean_se)


def empirical_adr(summary: EmpiricalSummary, label: str) -> float:
    """Mean per-replication loss n ||b - B||_W^2; diagnostic counterpart of ADR."""
    return float(summary.per_rep_losses[label].mean())
