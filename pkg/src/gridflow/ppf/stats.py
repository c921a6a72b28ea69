"""Accuracy metrics, density estimation, and limit-violation risk statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import AllTargetsNearZero, DegenerateSamples, NoSamples, ShapeMismatch

MAPE_EPS = 1e-6
Z95 = 1.959963984540054


def _pair(Yhat, Y):
    Yhat = np.asarray(Yhat, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Yhat.shape != Y.shape:
        raise ShapeMismatch(f"{Yhat.shape} vs {Y.shape}")
    if Y.ndim == 1:
        Yhat, Y = Yhat[:, None], Y[:, None]
    return Yhat, Y


def armse(Yhat, Y) -> float:
    """Column RMSE averaged over columns."""
    Yhat, Y = _pair(Yhat, Y)
    return float(np.mean(np.sqrt(np.mean((Yhat - Y) ** 2, axis=0))))


def mape(Yhat, Y, eps: float = MAPE_EPS):
    """Per-column mean absolute percentage error, in percent.

    Entries with ``|target| < eps`` are left out. Returns ``(mape, excluded)``,
    where ``excluded`` counts the dropped entries per column.
    """
    Yhat, Y = _pair(Yhat, Y)
    keep = np.abs(Y) >= eps
    if not keep.any():
        raise AllTargetsNearZero(f"every target is below {eps}")
    ratio = np.where(keep, np.abs(Yhat - Y) / np.where(keep, np.abs(Y), 1.0), 0.0)
    counts = keep.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 100.0 * ratio.sum(axis=0) / counts
    return np.where(counts > 0, out, np.nan), (~keep).sum(axis=0)


def wasserstein_1d(a, b) -> float:
    """W1 between two empirical distributions of equal size: mean |sorted difference|."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.shape != b.shape:
        raise ShapeMismatch(f"W1 needs equal sample counts, got {a.size} and {b.size}")
    return float(np.mean(np.abs(a - b)))


def awd(Yhat, Y) -> float:
    """Column-wise W1 distances averaged over columns."""
    Yhat, Y = _pair(Yhat, Y)
    return float(np.mean(np.mean(np.abs(np.sort(Yhat, axis=0) - np.sort(Y, axis=0)), axis=0)))


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float).ravel()
    sigma = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sigma, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sigma
    return 0.9 * spread * x.size ** (-0.2)


def kde(samples, grid, bandwidth: float | None = None, chunk: int = 2048) -> np.ndarray:
    """Gaussian-kernel density of ``samples`` on ``grid`` (Silverman bandwidth by default)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2 or np.all(x == x[0]):
        raise DegenerateSamples(float(x[0]) if x.size else float("nan"))
    h = bandwidth or silverman_bandwidth(x)
    g = np.asarray(grid, dtype=float)
    dens = np.zeros(g.shape)
    norm = 1.0 / (x.size * h * np.sqrt(2.0 * np.pi))
    for i in range(0, x.size, chunk):
        u = (g[..., None] - x[i:i + chunk]) / h
        dens += np.exp(-0.5 * u * u).sum(axis=-1)
    return dens * norm


def kde_curve(samples, n_points: int = 512, pad: float = 5.0):
    """``(grid, density)`` on a grid reaching ``pad`` bandwidths past the sample range."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2 or np.all(x == x[0]):
        raise DegenerateSamples(float(x[0]) if x.size else float("nan"))
    h = silverman_bandwidth(x)
    grid = np.linspace(x.min() - pad * h, x.max() + pad * h, n_points)
    return grid, kde(x, grid, h)


@dataclass(frozen=True)
class Limit:
    quantity: str
    bound: float
    kind: str = "lower"  # "lower": violated below bound; "upper": above


@dataclass(frozen=True)
class ViolationRecord:
    quantity: str
    kind: str
    limit: float
    n: int
    probability: float
    ci: tuple[float, float]
    mean_depth: float
    depth_ci: tuple[float, float]
    variance_coefficient: float | None  # None when no sample violates
    converged: bool
    estimable: bool

    def to_dict(self) -> dict:
        return asdict(self)


STOP_COEFFICIENT = 0.01


def violation_record(samples, limit: Limit) -> ViolationRecord:
    v = np.asarray(samples, dtype=float).ravel()
    n = v.size
    if n == 0:
        raise NoSamples(f"no samples for {limit.quantity}")
    if limit.kind == "lower":
        depth = limit.bound - v
    elif limit.kind == "upper":
        depth = v - limit.bound
    else:
        raise ValueError(f"limit kind must be 'lower' or 'upper', got {limit.kind!r}")
    hit = depth > 0
    k = int(hit.sum())
    p = k / n
    half = Z95 * np.sqrt(p * (1.0 - p) / n)
    ci = (max(0.0, p - half), min(1.0, p + half))
    if k == 0:
        return ViolationRecord(limit.quantity, limit.kind, limit.bound, n, 0.0, (0.0, 0.0),
                               0.0, (0.0, 0.0), None, False, False)
    d = depth[hit]
    mean_depth = float(d.mean())
    d_half = Z95 * d.std(ddof=1) / np.sqrt(k) if k > 1 else 0.0
    coeff = float(np.sqrt((1.0 - p) / (n * p)))
    return ViolationRecord(limit.quantity, limit.kind, limit.bound, n, p, ci, mean_depth,
                           (mean_depth - d_half, mean_depth + d_half), coeff,
                           coeff < STOP_COEFFICIENT, True)


def risk_assess(samples: dict, limits) -> list[ViolationRecord]:
    """One record per limit; ``samples`` maps quantity name to its sample vector."""
    if not samples:
        raise NoSamples("no output samples given")
    return [violation_record(samples[lim.quantity], lim) for lim in limits]


def mean_variance_coefficient(samples, eps: float = MAPE_EPS) -> float:
    """Std. error of the sample mean relative to |mean|, averaged over columns with |mean| > eps."""
    S = np.asarray(samples, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    m = len(S)
    mean = S.mean(axis=0)
    keep = np.abs(mean) > eps
    if not keep.any() or m < 2:
        return 0.0
    K = S[:, keep]
    # constant columns get exactly zero spread (std can leave rounding residue)
    se = np.where(np.ptp(K, axis=0) == 0, 0.0, K.std(axis=0, ddof=1)) / np.sqrt(m)
    return float(np.mean(se / np.abs(mean[keep])))


def variance_coefficient_scan(samples, counts, eps: float = MAPE_EPS) -> list[tuple[int, float]]:
    """Variance coefficient of the mean estimator using the first ``c`` samples, per count."""
    S = np.asarray(samples, dtype=float)
    counts = [int(c) for c in counts]
    if counts != sorted(counts) or (counts and counts[-1] > len(S)):
        raise ValueError("counts must be ascending and not exceed the sample count")
    return [(c, mean_variance_coefficient(S[:c], eps)) for c in counts]
