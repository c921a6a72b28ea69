"""Dense linear algebra and random variates.

Thin, checked wrappers over LAPACK (via numpy/scipy) plus a seedable random
stream with named, non-interleaving child streams.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import betaincinv, ndtri

from .errors import BadParameter, NonFiniteInput, NotPositiveDefinite, SingularMatrix

PIVOT_RTOL = 1e-13
PINV_RTOL = 1e-10


def lu_solve(A, B):
    """Solve ``A X = B`` by LU with partial pivoting.

    Raises SingularMatrix when a pivot falls below ``1e-13 * ||A||_inf``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"lu_solve needs a square matrix, got {A.shape}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise NonFiniteInput("lu_solve input contains NaN or inf")
    norm = np.abs(A).sum(axis=1).max() if A.size else 0.0
    if norm == 0.0:
        raise SingularMatrix(0)
    with warnings.catch_warnings():
        # exact-zero pivots are reported below as SingularMatrix
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    small = np.flatnonzero(np.abs(np.diag(lu)) <= PIVOT_RTOL * norm)
    if small.size:
        raise SingularMatrix(int(small[0]))
    return sla.lu_solve((lu, piv), B, check_finite=False)


def inv(A):
    """Inverse through :func:`lu_solve` against the identity."""
    A = np.asarray(A, dtype=float)
    return lu_solve(A, np.eye(A.shape[0]))


def pinv(A, rtol: float = PINV_RTOL):
    """Moore-Penrose pseudo-inverse; singular values below ``rtol * s_max`` are dropped."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("pinv input contains NaN or inf")
    m, n = A.shape
    if A.size == 0:
        return np.zeros((n, m))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, m))
    keep = s >= rtol * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def cholesky(A):
    """Lower-triangular ``L`` with ``L L^T = A``."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NonFiniteInput("cholesky input contains NaN or inf")
    if A.shape[0] == 0:
        return A.copy()
    L, info = sla.lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf rejected argument {-info}")
    return L


def nearest_correlation_factor(C, jitter: float = 1e-10):
    """Cholesky factor of ``C``, repairing it by eigenvalue clipping if it is not PD."""
    C = np.asarray(C, dtype=float)
    try:
        return cholesky(C)
    except NotPositiveDefinite:
        pass
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    w = np.clip(w, jitter, None)
    repaired = (V * w) @ V.T
    d = np.sqrt(np.diag(repaired))
    repaired = repaired / np.outer(d, d)
    return cholesky(repaired + jitter * np.eye(len(C)))


# --- random variates -------------------------------------------------------


@dataclass(frozen=True)
class StdNormal:
    pass


@dataclass(frozen=True)
class Weibull:
    k: float
    lam: float


@dataclass(frozen=True)
class Beta:
    a: float
    b: float


@dataclass(frozen=True)
class Bernoulli:
    p: float


def _check(dist):
    if isinstance(dist, Weibull) and not (dist.k > 0 and dist.lam > 0):
        raise BadParameter(f"Weibull needs k, lambda > 0, got {dist}")
    if isinstance(dist, Beta) and not (dist.a > 0 and dist.b > 0):
        raise BadParameter(f"Beta needs alpha, beta > 0, got {dist}")
    if isinstance(dist, Bernoulli) and not (0.0 <= dist.p <= 1.0):
        raise BadParameter(f"Bernoulli needs 0 <= p <= 1, got {dist}")


def normal_icdf(u):
    return ndtri(u)


def weibull_icdf(u, k: float, lam: float):
    return lam * (-np.log1p(-np.asarray(u))) ** (1.0 / k)


def beta_icdf(u, a: float, b: float):
    return betaincinv(a, b, u)


def bernoulli_threshold(u, p: float):
    return (np.asarray(u) < p).astype(float)


class Rng:
    """Seeded random stream.

    ``child(name)`` derives an independent stream by mixing the parent seed
    with a stable hash of ``name``; siblings never share state.
    """

    def __init__(self, seed: int, *, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._path = _path
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, *_path])
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, name: str | int) -> "Rng":
        tag = zlib.crc32(str(name).encode()) if not isinstance(name, int) else int(name)
        return Rng(self.seed, _path=self._path + (tag,))

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1)."""
        # random() can return exactly 0; the inverse-CDF transforms need (0, 1)
        u = np.maximum(self._gen.random(size), np.finfo(float).tiny)
        return float(u) if size is None else u

    def gamma(self, shape: float, size=None):
        return self._gen.standard_gamma(shape, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def normal(self, size=None):
        return normal_icdf(self.uniform(size))


def sample(rng: Rng, dist, size=None):
    """Draw from ``dist``; a scalar when ``size`` is None, else an array."""
    _check(dist)
    if isinstance(dist, StdNormal):
        return normal_icdf(rng.uniform(size))
    if isinstance(dist, Weibull):
        return weibull_icdf(rng.uniform(size), dist.k, dist.lam)
    if isinstance(dist, Beta):
        # X/(X+Y) with X ~ Gamma(a), Y ~ Gamma(b); numpy's gamma is Marsaglia-Tsang
        x = rng.gamma(dist.a, size)
        y = rng.gamma(dist.b, size)
        return x / (x + y)
    if isinstance(dist, Bernoulli):
        return bernoulli_threshold(rng.uniform(size), dist.p)
    raise BadParameter(f"unknown distribution {dist!r}")
