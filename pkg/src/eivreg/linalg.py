"""Matrix utilities: vec/Kronecker algebra, eigenvalue extremes, matrix-normal
sampling, and covariance blocks of affine transforms of a matrix-normal variable.

Stacking convention used throughout the package: matrix-valued random variables
are flattened row-major (`rvec`, equal to the classical column-stacking vec of
the *transpose*).  All pq-by-pq covariance objects refer to that flattening.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimMismatch, NonSymmetric, NotPSD

SYM_RTOL = 1e-10
PSD_CLIP_RTOL = 1e-10
COND_LIMIT = 1e12


def vec(m: np.ndarray) -> np.ndarray:
    """Column-stacking vec operator."""
    return np.asarray(m, dtype=float).ravel(order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of `vec` for a known shape."""
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise DimMismatch(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape((cols, rows)).T


def rvec(m: np.ndarray) -> np.ndarray:
    """Row-major flattening; equals vec of the transposed matrix."""
    return np.asarray(m, dtype=float).ravel(order="C")


def unrvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of `rvec` for a known shape."""
    v = np.asarray(v, dtype=float)
    if v.size != rows * cols:
        raise DimMismatch(f"cannot reshape length {v.size} into {rows}x{cols}")
    return v.reshape((rows, cols))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def sym(s: np.ndarray) -> np.ndarray:
    """Symmetrize: (S + S') / 2."""
    s = np.asarray(s, dtype=float)
    return 0.5 * (s + s.T)


def is_symmetric(s: np.ndarray, rtol: float = SYM_RTOL) -> bool:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        return False
    return np.linalg.norm(s - s.T) <= rtol * max(1.0, np.linalg.norm(s))


def eig_extremes(s: np.ndarray, rtol: float = SYM_RTOL) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix.

    The input is symmetrized before the eigensolve; asymmetry beyond
    ``rtol * ||s||`` raises NonSymmetric.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {s.shape}")
    if not is_symmetric(s, rtol):
        raise NonSymmetric(
            f"asymmetry {np.linalg.norm(s - s.T):.3e} exceeds tolerance"
        )
    w = np.linalg.eigvalsh(sym(s))
    return float(w[0]), float(w[-1])


def psd_factor(cov: np.ndarray, rtol: float = PSD_CLIP_RTOL) -> np.ndarray:
    """Symmetric factor F with F @ F.T = cov for a PSD matrix.

    Eigenvalues in [-rtol * ch_max, 0) are clipped to zero (covariances
    estimated by Monte Carlo can be slightly indefinite); anything more
    negative raises NotPSD.
    """
    cov = np.asarray(cov, dtype=float)
    if not is_symmetric(cov):
        raise NonSymmetric("covariance must be symmetric")
    w, v = np.linalg.eigh(sym(cov))
    ch_max = max(float(w[-1]), 0.0)
    floor = -rtol * ch_max
    if np.any(w < floor):
        raise NotPSD(
            f"smallest eigenvalue {w[0]:.3e} below PSD tolerance {floor:.3e}"
        )
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


@dataclass(frozen=True)
class MatrixNormal:
    """Normal law on p-by-q matrices.

    `cov` is the pq-by-pq covariance of `rvec(Y)` (row-major flattening).
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_2d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        k = mean.shape[0] * mean.shape[1]
        if cov.shape != (k, k):
            raise DimMismatch(
                f"cov shape {cov.shape} does not match mean {mean.shape}"
            )
        if not is_symmetric(cov):
            raise NonSymmetric("cov must be symmetric")

    @property
    def rows(self) -> int:
        return self.mean.shape[0]

    @property
    def cols(self) -> int:
        return self.mean.shape[1]


def sample_matrix_normal(law: MatrixNormal, rng: np.random.Generator,
                         size: int | None = None) -> np.ndarray:
    """Draw from a matrix-normal law.

    Returns a (rows, cols) array, or (size, rows, cols) when `size` is given.
    Sampling goes through a symmetric PSD factorization of `cov`; a zero
    covariance returns the mean exactly.
    """
    factor = psd_factor(law.cov)
    p, q = law.rows, law.cols
    if size is None:
        z = rng.standard_normal(factor.shape[1])
        return law.mean + unrvec(factor @ z, p, q)
    z = rng.standard_normal((size, factor.shape[1]))
    flat = z @ factor.T + rvec(law.mean)
    return flat.reshape(size, p, q)


@dataclass(frozen=True)
class AffineTransform:
    """The map Y -> kappa @ Y @ iota + alpha @ Y @ beta + rho on p-by-q matrices."""

    kappa: np.ndarray
    iota: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        for name in ("kappa", "iota", "alpha", "beta", "rho"):
            object.__setattr__(self, name,
                               np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if self.kappa.shape != self.alpha.shape:
            raise DimMismatch("kappa and alpha must have the same shape")
        if self.iota.shape != self.beta.shape:
            raise DimMismatch("iota and beta must have the same shape")
        if self.rho.shape != (self.kappa.shape[0], self.iota.shape[1]):
            raise DimMismatch("rho does not conform to kappa @ Y @ iota")

    @classmethod
    def identity(cls, p: int, q: int) -> "AffineTransform":
        return cls(np.eye(p), np.eye(q), np.zeros((p, p)), np.zeros((q, q)),
                   np.zeros((p, q)))

    @property
    def in_shape(self) -> tuple[int, int]:
        return self.kappa.shape[1], self.iota.shape[0]

    @property
    def out_shape(self) -> tuple[int, int]:
        return self.kappa.shape[0], self.iota.shape[1]

    def apply(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != self.in_shape:
            raise DimMismatch(f"expected input shape {self.in_shape}, got {y.shape}")
        return self.kappa @ y @ self.iota + self.alpha @ y @ self.beta + self.rho

    def lift(self) -> np.ndarray:
        """Linear map taking rvec(Y) to rvec(kappa Y iota + alpha Y beta)."""
        return kron(self.kappa, self.iota.T) + kron(self.alpha, self.beta.T)


def transform_cov_block(ti: AffineTransform, tj: AffineTransform,
                        lam: np.ndarray) -> np.ndarray:
    """Cross-covariance of two affine transforms of one matrix-normal variable.

    For Y with Cov(rvec Y) = lam, returns Cov(rvec ti(Y), rvec tj(Y)) =
    L_i @ lam @ L_j.T where L_k is the transform's lift.  The block grid built
    from a family of transforms is symmetric: block(j,i) = block(i,j).T.
    """
    if ti.in_shape != tj.in_shape:
        raise DimMismatch("transforms act on different input shapes")
    k = ti.in_shape[0] * ti.in_shape[1]
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (k, k):
        raise DimMismatch(f"lam shape {lam.shape} does not match input size {k}")
    li = ti.lift()
    lj = tj.lift()
    return li @ lam @ lj.T
