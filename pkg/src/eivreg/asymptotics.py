"""Population limits and joint asymptotic laws of the corrected and restricted
estimators, under the exact restriction and under local alternatives.

All stacked laws use the row-major flattening convention from `linalg`: the
limit of sqrt(n)(estimator - truth) is described through its flattened mean and
pq-by-pq covariance blocks  block(i,j) = A_i @ score_cov @ A_j.T,  where A_i is
the estimator's linear limit map acting on the flattened score limit and
score_cov is the limiting covariance of the centered score

    h = n^{-1/2} X'(E - Delta B) + n^{1/2} sigma_delta^2 B .

The score covariance has no closed form under general error families; it is
estimated by Monte Carlo averaging of flattened-score outer products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimMismatch, NotPD, ShapeMismatch
from .linalg import eig_extremes, kron, rvec, sym
from .model import ModelConfig, Restriction, generate

NAMED_WEIGHT_LIMITS = ("B2", "B3", "B4")


@dataclass(frozen=True)
class PopulationModel:
    """Limits of the design second-moment pieces.

    sigma   : limit of X'X/n  (= M'M/n + sigma_psi^2 I + sigma_delta^2 I)
    sigma_d : sigma - sigma_delta^2 I (also equals sigma @ k)
    k       : attenuation limit sigma^{-1} sigma_d of the naive estimator
    kbar    : sigma_delta^2 sigma^{-1}, the residual attenuation weight
    """

    sigma: np.ndarray
    sigma_d: np.ndarray
    k: np.ndarray
    kbar: np.ndarray
    n_design: int

    @property
    def p(self) -> int:
        return self.sigma.shape[0]

    @property
    def sigma_k(self) -> np.ndarray:
        """sigma @ k, the symmetric PD scale of the corrected estimator."""
        return self.sigma_d


def population(cfg: ModelConfig, n: int | None = None) -> PopulationModel:
    """Population quantities at the configured design (finite-n M'M/n)."""
    n = cfg.n if n is None else n
    m = cfg.design(n)
    mm = sym(m.T @ m) / n
    sigma = mm + (cfg.sigma_psi2 + cfg.sigma_delta2) * np.eye(cfg.p)
    ch_min, ch_max = eig_extremes(sigma)
    # same relative floor as the plug-in attenuation estimate
    if ch_min - cfg.sigma_delta2 <= 1e-8 * ch_max:
        raise NotPD(
            f"sigma_delta2={cfg.sigma_delta2} reaches ch_min(sigma)={ch_min:.3e}; "
            "the corrected estimator's limit scale is not positive definite")
    sigma_d = sigma - cfg.sigma_delta2 * np.eye(cfg.p)
    k = np.linalg.solve(sigma, sigma_d)
    kbar = cfg.sigma_delta2 * np.linalg.inv(sigma)
    return PopulationModel(sigma=sigma, sigma_d=sigma_d, k=k, kbar=kbar, n_design=n)


@dataclass(frozen=True)
class ScoreCov:
    """Monte Carlo estimate of the limiting score covariance (pq-by-pq)."""

    cov: np.ndarray
    reps: int
    n_used: int
    standard_error: float

    @property
    def dim(self) -> int:
        return self.cov.shape[0]


def score_sample(cfg: ModelConfig, B: np.ndarray, rng: np.random.Generator,
                 n: int | None = None, pm: PopulationModel | None = None,
                 include_design_term: bool = False) -> np.ndarray:
    """One flattened draw of the centered score at sample size n.

    With `include_design_term` the design-fluctuation contribution
    H kbar B, H = n^{-1/2}(X'X - n sigma), is added; that variant matches the
    infeasible estimator built from population weights, not the plug-in one.
    """
    n = cfg.n if n is None else n
    ds = generate(cfg, B, rng, keep_latent=True, n=n)
    lat = ds.latent
    h = (ds.X.T @ (lat.E - lat.Delta @ B)) / math.sqrt(n) \
        + math.sqrt(n) * cfg.sigma_delta2 * B
    if include_design_term:
        if pm is None:
            pm = population(cfg, n)
        H = ds.X.T @ ds.X / math.sqrt(n) - math.sqrt(n) * pm.sigma
        h = h + H @ pm.kbar @ B
    return rvec(h)


def estimate_score_cov(cfg: ModelConfig, B: np.ndarray, reps: int, seed: int,
                       n: int | None = None,
                       include_design_term: bool = False) -> ScoreCov:
    """Average of flattened-score outer products over `reps` replications.

    Replication r uses the generator seeded by (seed, 1, r), so results do not
    depend on evaluation order or worker count.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    n = cfg.n if n is None else n
    B = np.asarray(B, dtype=float)
    pm = population(cfg, n) if include_design_term else None
    k = cfg.p * cfg.q
    draws = np.empty((reps, k))
    for r in range(reps):
        rng = np.random.default_rng([seed, 1, r])
        draws[r] = score_sample(cfg, B, rng, n=n, pm=pm,
                                include_design_term=include_design_term)
    cov = sym(draws.T @ draws) / reps
    # entrywise Monte Carlo SE of the averaged outer products
    prods = draws[:, :, None] * draws[:, None, :]
    se = np.sqrt(np.var(prods, axis=0, ddof=1) / reps)
    return ScoreCov(cov=cov, reps=reps, n_used=n, standard_error=float(se.max()))


def projector_cols(r2: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column space of R2."""
    return r2 @ np.linalg.solve(r2.T @ r2, r2.T)


def constraint_gain(q0: np.ndarray, r1: np.ndarray) -> np.ndarray:
    """Q0^{-1} R1' (R1 Q0^{-1} R1')^{-1}, the weighted gain of the projection."""
    q0_r1t = np.linalg.solve(q0, r1.T)
    return q0_r1t @ np.linalg.inv(r1 @ q0_r1t)


def named_weight_limit(pm: PopulationModel, which: str) -> np.ndarray:
    """Limit of weight/n for the named restricted estimators."""
    if which == "B2":
        return pm.sigma_k
    if which == "B3":
        return pm.sigma
    if which == "B4":
        return np.eye(pm.p)
    raise ShapeMismatch(f"unknown named weight limit {which!r}")


def limit_map(pm: PopulationModel, q: int, restr: Restriction | None = None,
              which: str = "UE", q0: np.ndarray | None = None) -> np.ndarray:
    """Linear map from the flattened score limit to a flattened estimator limit.

    which="UE" gives kron(sigma_k^{-1}, I_q); restricted variants subtract the
    constraint projection kron(gain @ R1 @ sigma_k^{-1}, proj(R2)) with the
    weight limit Q0 (named or explicit).
    """
    a1 = kron(np.linalg.inv(pm.sigma_k), np.eye(q))
    if which == "UE":
        return a1
    if restr is None:
        raise DimMismatch("restricted limit maps need the restriction")
    if which == "generic":
        if q0 is None:
            raise DimMismatch("generic limit map needs an explicit weight limit")
    elif which in NAMED_WEIGHT_LIMITS:
        q0 = named_weight_limit(pm, which)
    else:
        raise ShapeMismatch(f"unknown estimator label {which!r}")
    gain = constraint_gain(q0, restr.R1)
    correction = kron(gain @ restr.R1 @ np.linalg.inv(pm.sigma_k),
                      projector_cols(restr.R2))
    return a1 - correction


def mean_shift(restr: Restriction, q0: np.ndarray) -> np.ndarray:
    """Limit mean of a restricted estimator under the drifting restriction.

    -gain(Q0) @ theta0 @ (R2'R2)^{-1} R2'; satisfies R1 @ mu @ R2 = -theta0.
    """
    gain = constraint_gain(q0, restr.R1)
    c4 = np.linalg.solve(restr.R2.T @ restr.R2, restr.R2.T)
    return -gain @ restr.theta0 @ c4


@dataclass(frozen=True)
class AsymptoticLaw:
    """Joint limit law of a stack of estimators: labels, flattening shape,
    per-estimator mean matrices, and the grid of covariance blocks."""

    labels: tuple[str, ...]
    p: int
    q: int
    means: tuple[np.ndarray, ...]
    cov_blocks: dict[tuple[int, int], np.ndarray]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError as exc:
            raise ShapeMismatch(f"law has no estimator {label!r}") from exc

    def block(self, i: int | str, j: int | str) -> np.ndarray:
        if isinstance(i, str):
            i = self.index(i)
        if isinstance(j, str):
            j = self.index(j)
        return self.cov_blocks[(i, j)]

    def mean(self, label: str) -> np.ndarray:
        return self.means[self.index(label)]

    def full_cov(self) -> np.ndarray:
        k = self.p * self.q
        m = len(self.labels)
        out = np.empty((m * k, m * k))
        for i in range(m):
            for j in range(m):
                out[i * k:(i + 1) * k, j * k:(j + 1) * k] = self.cov_blocks[(i, j)]
        return out

    def full_mean(self) -> np.ndarray:
        return np.concatenate([rvec(mu) for mu in self.means])


def joint_law(pm: PopulationModel, score: ScoreCov, restr: Restriction,
              estimators: tuple[str, ...] = ("UE", "B2", "B3", "B4"),
              theta0: np.ndarray | None = None,
              q0: np.ndarray | None = None, q: int | None = None) -> AsymptoticLaw:
    """Joint law of the requested estimators.

    `estimators` may contain "UE", the named restricted labels, and "generic"
    (which requires the explicit weight limit `q0`).  `theta0` overrides the
    restriction's local-alternative direction; zero means the exact restriction.
    """
    if q is None:
        q = score.dim // pm.p
    if pm.p * q != score.dim:
        raise ShapeMismatch("score covariance does not factor as p*q")
    if theta0 is not None:
        restr = restr.with_theta0(theta0)
    maps = []
    means = []
    for label in estimators:
        a = limit_map(pm, q, restr, which=label, q0=q0)
        maps.append(a)
        if label == "UE":
            means.append(np.zeros((pm.p, q)))
        else:
            w0 = q0 if label == "generic" else named_weight_limit(pm, label)
            means.append(mean_shift(restr, w0))
    blocks = {}
    for i, ai in enumerate(maps):
        for j, aj in enumerate(maps):
            blocks[(i, j)] = ai @ score.cov @ aj.T
    return AsymptoticLaw(labels=tuple(estimators), p=pm.p, q=q,
                         means=tuple(means), cov_blocks=blocks)
