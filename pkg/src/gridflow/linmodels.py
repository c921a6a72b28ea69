"""Affine approximations of the inverse power-flow map ``y = Ws x + bs``.

Three constructors produce the shortcut-layer initializations: the decoupled
linear power flow (pseudo-inverse of its coefficient matrix), the Newton
Jacobian at the base operating point, and a closed-form ridge fit on data.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import acpf, numerics
from .case_io import Network
from .errors import DimensionMismatch, SingularJacobian, SingularMatrix, SingularSystem


class Provenance(str, Enum):
    LINEARIZED_PF = "linearized_pf"
    JACOBIAN = "jacobian"
    RIDGE = "ridge"
    RANDOM = "random"


@dataclass(frozen=True)
class AffineModel:
    Ws: np.ndarray
    bs: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        if self.Ws.ndim != 2 or self.bs.shape != (self.Ws.shape[0],):
            raise DimensionMismatch(f"Ws {self.Ws.shape} and bs {self.bs.shape} disagree")
        if not (np.all(np.isfinite(self.Ws)) and np.all(np.isfinite(self.bs))):
            raise ValueError("affine model has non-finite entries")


@dataclass(frozen=True)
class DlpfBlocks:
    E: np.ndarray
    F: np.ndarray
    c: np.ndarray


def dlpf_blocks(net: Network) -> DlpfBlocks:
    """Blocks of ``x = E c + F y`` for the decoupled linear power flow.

    Active-power rows use ``-B'`` against angles and ``G`` against
    magnitudes; reactive rows use ``-G`` and ``-B`` of the full admittance.
    """
    G = net.Y.real
    B = net.Y.imag
    Bp = net.Bprime
    pvpq, pq, pv, s = net.pvpq, net.pq, net.pv, net.slack
    # coefficient rows over [theta of all buses, V of all buses]
    P_rows = np.hstack([-Bp[pvpq], G[pvpq]])
    Q_rows = np.hstack([-G[pq], -B[pq]])
    M = np.vstack([P_rows, Q_rows])
    n = net.n_bus
    y_cols = np.concatenate([pvpq, n + pq])
    c_cols = np.concatenate([[s, n + s], n + pv]).astype(int)
    c = np.concatenate([[net.va_slack, net.vm_set[s]], net.vm_set[pv]])
    return DlpfBlocks(E=M[:, c_cols], F=M[:, y_cols], c=c)


def init_linearized_pf(net: Network) -> AffineModel:
    blocks = dlpf_blocks(net)
    Ws = numerics.pinv(blocks.F)
    bs = -Ws @ (blocks.E @ blocks.c)
    return AffineModel(Ws, bs, Provenance.LINEARIZED_PF)


def init_jacobian(net: Network, tol: float = 1e-8) -> AffineModel:
    """First-order Taylor model of the inverse map around the base-case solution."""
    s0, x0, y0 = acpf.solve_base(net, tol=tol)
    J = acpf.jacobian(net, s0)
    try:
        Ws = numerics.inv(J)
    except SingularMatrix as exc:
        raise SingularJacobian("Jacobian at the base operating point is singular") from exc
    bs = y0 - Ws @ x0
    return AffineModel(Ws, bs, Provenance.JACOBIAN)


def default_lambda(n: int, per_sample: float = 1e-7) -> float:
    return per_sample * n


def ridge_fit(X, Y, lam: float | None = None) -> AffineModel:
    """Closed-form ridge regression with an unpenalized intercept, all outputs at once.

    Centering X and Y is algebraically the same as eliminating the bias with
    ``H = 11^T / n``; one LU factorization serves every output column.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, d = X.shape
    if Y.shape[0] != n:
        raise DimensionMismatch(f"X has {n} rows but Y has {Y.shape[0]}")
    if n < 2:
        raise ValueError("ridge_fit needs at least two samples")
    if lam is None:
        lam = default_lambda(n)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    A = Xc.T @ Xc + lam * np.eye(d)
    rhs = Xc.T @ Yc
    try:
        W = numerics.lu_solve(A, rhs)  # d x outputs
    except SingularMatrix as exc:
        raise SingularSystem("centered X^T X is singular; use lambda > 0") from exc
    b = y_mean - x_mean @ W
    return AffineModel(np.ascontiguousarray(W.T), b, Provenance.RIDGE)


def random_affine(d_in: int, d_out: int, rng: numerics.Rng) -> AffineModel:
    bound = 1.0 / np.sqrt(d_in)
    Ws = (2.0 * rng.uniform((d_out, d_in)) - 1.0) * bound
    bs = (2.0 * rng.uniform(d_out) - 1.0) * bound
    return AffineModel(Ws, bs, Provenance.RANDOM)


def predict(model: AffineModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.Ws.shape[1]:
        raise DimensionMismatch(f"input width {X.shape[-1]} != model width {model.Ws.shape[1]}")
    return X @ model.Ws.T + model.bs
