"""Monte Carlo propagation of injection samples through a power-flow solver.

The solver is Newton-Raphson, a trained ResidualNet, or a standalone affine
model. Every path returns the unknowns plus branch flows computed on the full
state (slack phasor and PV magnitudes spliced back in).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import acpf, linmodels
from ..acpf import BranchFlows
from ..case_io import Network
from ..linmodels import AffineModel
from ..resnet import ResidualNet
from .dataset import solve_many
from .scenarios import ScenarioSpec, sample_injections

WARMUP_ROWS = 32


@dataclass
class McsResult:
    solver: str
    X: np.ndarray
    Y: np.ndarray
    ok: np.ndarray
    flows: BranchFlows
    seconds: float

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def s_from(self) -> np.ndarray:
        """Apparent power at the from end, p.u."""
        return np.hypot(self.flows.p_from, self.flows.q_from)


def solver_name(solver) -> str:
    if isinstance(solver, str):
        return solver
    if isinstance(solver, ResidualNet):
        return f"resnet:{solver.provenance.value}"
    if isinstance(solver, AffineModel):
        return f"affine:{solver.provenance.value}"
    raise TypeError(f"unsupported solver {type(solver).__name__}")


def _predictor(solver):
    if isinstance(solver, ResidualNet):
        return solver.predict
    if isinstance(solver, AffineModel):
        return lambda X: linmodels.predict(solver, X)
    raise TypeError(f"unsupported solver {type(solver).__name__}")


def run_mcs(net: Network, samples, solver="nr", *, tol: float = 1e-8,
            threads: int | None = None) -> McsResult:
    """Evaluate ``solver`` on every injection sample.

    ``samples`` is a ScenarioSpec or an (n, dim) injection matrix. Wall-clock
    time excludes one warm-up call on the first rows. NR rows that fail to
    converge come back NaN with ``ok`` False.
    """
    X = sample_injections(net, samples) if isinstance(samples, ScenarioSpec) \
        else np.asarray(samples, dtype=float)
    name = solver_name(solver)
    if isinstance(solver, str):
        if solver != "nr":
            raise ValueError(f"unknown solver {solver!r}")
        solve_many(net, X[:1], tol=tol, threads=1)
        t0 = time.perf_counter()
        Y, ok = solve_many(net, X, tol=tol, threads=threads)
        seconds = time.perf_counter() - t0
    else:
        predict = _predictor(solver)
        predict(X[:WARMUP_ROWS])
        t0 = time.perf_counter()
        Y = predict(X)
        seconds = time.perf_counter() - t0
        ok = np.all(np.isfinite(Y), axis=1)
    flows = acpf.branch_flows(net, acpf.state_from_y(net, Y))
    return McsResult(name, X, Y, ok, flows, seconds)
