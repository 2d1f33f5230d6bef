"""Unrestricted and restricted estimators of the coefficient matrix.

The naive least-squares estimator is inconsistent under measurement error; the
attenuation-corrected estimator divides it by the plug-in reliability matrix
built from X'X/n and the known measurement-error variance.  Restricted
estimators project the corrected estimator onto the constraint set with a
configurable positive definite weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimMismatch, NearSingular, NotPD, RankDeficient, SingularDesign
from .linalg import COND_LIMIT, eig_extremes, is_symmetric, sym
from .model import Restriction

RESTRICTION_TOL = 1e-8


@dataclass(frozen=True)
class Attenuation:
    """Plug-in reliability pieces: sigma_x = X'X/n, sigma_d = sigma_x - s2_delta I,
    and kx = sigma_x^{-1} sigma_d (the multiplicative attenuation to undo)."""

    sigma_x: np.ndarray
    sigma_d: np.ndarray
    kx: np.ndarray
    n: int


def lse(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Naive least squares (X'X)^{-1} X'Z."""
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.shape[0] != Z.shape[0]:
        raise DimMismatch("X and Z must have the same number of rows")
    xtx = sym(X.T @ X)
    ch_min, ch_max = eig_extremes(xtx)
    if ch_min <= 0 or ch_max / ch_min > COND_LIMIT:
        raise SingularDesign("X'X is numerically singular")
    return np.linalg.solve(xtx, X.T @ Z)


def build_kx(X: np.ndarray, sigma_delta2: float, n: int | None = None) -> Attenuation:
    """Plug-in attenuation estimate from the observed design."""
    X = np.asarray(X, dtype=float)
    if sigma_delta2 < 0:
        raise ValueError("sigma_delta2 must be nonnegative")
    n = X.shape[0] if n is None else n
    sigma_x = sym(X.T @ X) / n
    sigma_d = sigma_x - sigma_delta2 * np.eye(X.shape[1])
    _, x_max = eig_extremes(sigma_x)
    d_min, _ = eig_extremes(sigma_d)
    if d_min < 1e-8 * x_max:
        raise NearSingular(
            f"attenuation correction breaks down: ch_min(sigma_d)={d_min:.3e}")
    kx = np.linalg.solve(sigma_x, sigma_d)
    return Attenuation(sigma_x=sigma_x, sigma_d=sigma_d, kx=kx, n=n)


def corrected_lse(X: np.ndarray, Z: np.ndarray, sigma_delta2: float) -> np.ndarray:
    """Attenuation-corrected estimator kx^{-1} (X'X)^{-1} X'Z = (X'X - n s2 I)^{-1} X'Z."""
    att = build_kx(X, sigma_delta2)
    return np.linalg.solve(att.n * att.sigma_d, np.asarray(X, dtype=float).T @ Z)


def restricted(b1: np.ndarray, sigma_hat: np.ndarray, restr: Restriction) -> np.ndarray:
    """Weighted projection of b1 onto {B : R1 B R2 = theta}.

    b_tilde = b1 - S^{-1} R1' [R1 S^{-1} R1']^{-1} (R1 b1 R2 - theta)
              (R2'R2)^{-1} R2', for a symmetric positive definite weight S.
    The output satisfies the restriction exactly (up to solve roundoff) and is
    invariant to rescaling the weight.
    """
    b1 = np.asarray(b1, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if not is_symmetric(sigma_hat):
        raise NotPD("weight must be symmetric positive definite")
    ch_min, ch_max = eig_extremes(sigma_hat)
    if ch_min <= 0:
        raise NotPD(f"weight is not positive definite (ch_min={ch_min:.3e})")
    if ch_max / ch_min > COND_LIMIT:
        raise NearSingular("weight matrix is too ill-conditioned")
    sinv_r1t = np.linalg.solve(sigma_hat, restr.R1.T)
    gram = restr.R1 @ sinv_r1t
    if np.linalg.cond(gram) > COND_LIMIT:
        raise RankDeficient("R1 S^{-1} R1' is numerically singular")
    gap = restr.R1 @ b1 @ restr.R2 - restr.theta
    r2tr2 = restr.R2.T @ restr.R2
    if np.linalg.cond(r2tr2) > COND_LIMIT:
        raise RankDeficient("R2'R2 is numerically singular")
    return b1 - sinv_r1t @ np.linalg.solve(gram, gap) @ np.linalg.solve(r2tr2, restr.R2.T)


@dataclass(frozen=True)
class EstimateSet:
    """All estimators for one dataset (b_tilde only when a generic weight is given)."""

    b_lse: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    b_tilde: np.ndarray | None = None


def estimate_all(X: np.ndarray, Z: np.ndarray, sigma_delta2: float,
                 restr: Restriction,
                 generic_weight: np.ndarray | None = None) -> EstimateSet:
    """Naive, corrected, and the three named restricted estimators.

    The restricted estimators reuse the corrected estimator with weights
    X'X kx (== n sigma_d, built in the exactly symmetric form), X'X, and n I.
    """
    X = np.asarray(X, dtype=float)
    att = build_kx(X, sigma_delta2)
    xtx = att.n * att.sigma_x
    b_lse = np.linalg.solve(xtx, X.T @ Z)
    b1 = np.linalg.solve(att.n * att.sigma_d, X.T @ Z)
    b2 = restricted(b1, att.n * att.sigma_d, restr)
    b3 = restricted(b1, xtx, restr)
    b4 = restricted(b1, float(att.n) * np.eye(X.shape[1]), restr)
    b_tilde = (restricted(b1, np.asarray(generic_weight, dtype=float), restr)
               if generic_weight is not None else None)
    tol = RESTRICTION_TOL * (1.0 + np.linalg.norm(restr.theta))
    for b in (b2, b3, b4) + ((b_tilde,) if b_tilde is not None else ()):
        if restr.gap(b) > tol:
            raise NearSingular("restricted estimate failed to satisfy the restriction")
    return EstimateSet(b_lse=b_lse, b1=b1, b2=b2, b3=b3, b4=b4, b_tilde=b_tilde)


@dataclass(frozen=True)
class ObjectiveValue:
    """Two evaluations of the corrected least-squares objective.

    `direct` is tr((Z-XB)'(Z-XB)) - tr(B'(X'X)(I-kx)B); `quadratic` is
    tr(Z'Z) + tr((b1-B)'(X'X kx)(b1-B)).  They differ by the B-independent
    `anchor` tr(b1'(X'X kx) b1): quadratic - direct == anchor.
    """

    direct: float
    quadratic: float
    anchor: float


def corrected_objective(B: np.ndarray, X: np.ndarray, Z: np.ndarray,
                        att: Attenuation, b1: np.ndarray) -> ObjectiveValue:
    B = np.asarray(B, dtype=float)
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    resid = Z - X @ B
    n = att.n
    penalty = n * (att.sigma_x @ (np.eye(X.shape[1]) - att.kx))
    direct = float(np.trace(resid.T @ resid) - np.trace(B.T @ penalty @ B))
    w = n * att.sigma_d
    dev = b1 - B
    quadratic = float(np.trace(Z.T @ Z) + np.trace(dev.T @ w @ dev))
    anchor = float(np.trace(b1.T @ w @ b1))
    return ObjectiveValue(direct=direct, quadratic=quadratic, anchor=anchor)
