"""AC power flow in polar coordinates.

Vector conventions used throughout the package::

    x = [P at PV buses; P at PQ buses; Q at PQ buses]      (net injections, p.u.)
    y = [theta at PV buses; theta at PQ buses; V at PQ buses]

Buses inside each group are in ascending internal index order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .case_io import Network, branch_admittances
from .errors import Diverged, DimensionMismatch, SingularJacobian, SingularMatrix


@dataclass(frozen=True)
class PfState:
    theta: np.ndarray
    vm: np.ndarray

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.theta)


@dataclass(frozen=True)
class BranchFlows:
    """Flows of in-service branches, p.u. unless noted. Leading axes may index samples."""

    p_from: np.ndarray
    q_from: np.ndarray
    p_to: np.ndarray
    q_to: np.ndarray
    base_mva: float

    @property
    def s_from(self) -> np.ndarray:
        """Apparent flow at the from end, MVA."""
        return np.hypot(self.p_from, self.q_from) * self.base_mva

    @property
    def s_to(self) -> np.ndarray:
        return np.hypot(self.p_to, self.q_to) * self.base_mva

    @property
    def losses_p(self) -> np.ndarray:
        return self.p_from + self.p_to

    @property
    def losses_q(self) -> np.ndarray:
        return self.q_from + self.q_to


def flat_start(net: Network) -> PfState:
    theta = np.full(net.n_bus, net.va_slack)
    vm = np.ones(net.n_bus)
    gen_buses = np.concatenate([[net.slack], net.pv]).astype(int)
    vm[gen_buses] = net.vm_set[gen_buses]
    return PfState(theta, vm)


def state_from_y(net: Network, y) -> PfState:
    """Full state from unknowns; slack phasor and PV magnitudes come from the case.

    Accepts a single vector or an (n, dim) batch.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != net.dim:
        raise DimensionMismatch(f"y has {y.shape[-1]} entries, network needs {net.dim}")
    lead = y.shape[:-1]
    npvpq = net.n_pv + net.n_pq
    theta = np.full(lead + (net.n_bus,), net.va_slack)
    vm = np.broadcast_to(net.vm_set, lead + (net.n_bus,)).copy()
    theta[..., net.pvpq] = y[..., :npvpq]
    vm[..., net.pq] = y[..., npvpq:]
    return PfState(theta, vm)


def y_from_state(net: Network, s: PfState) -> np.ndarray:
    return np.concatenate([s.theta[..., net.pvpq], s.vm[..., net.pq]], axis=-1)


def x_from_injections(net: Network, P, Q) -> np.ndarray:
    return np.concatenate([P[..., net.pvpq], Q[..., net.pq]], axis=-1)


def base_injection(net: Network) -> np.ndarray:
    """Scheduled net injections of the case file as an x vector."""
    P = net.pg - net.pd
    Q = net.qg - net.qd
    return x_from_injections(net, P, Q)


def injection_labels(net: Network) -> list[str]:
    ids = net.bus_ids
    return ([f"P_{ids[i]}" for i in net.pv] + [f"P_{ids[i]}" for i in net.pq]
            + [f"Q_{ids[i]}" for i in net.pq])


def unknown_labels(net: Network) -> list[str]:
    ids = net.bus_ids
    return ([f"theta_{ids[i]}" for i in net.pv] + [f"theta_{ids[i]}" for i in net.pq]
            + [f"vm_{ids[i]}" for i in net.pq])


def power_injections(net: Network, s: PfState):
    """Active and reactive injections at every bus. Works on batched states too."""
    V = s.voltage
    S = V * np.conj(V @ net.Y.T)
    return S.real, S.imag


def mismatch(net: Network, s: PfState, x) -> np.ndarray:
    P, Q = power_injections(net, s)
    return x_from_injections(net, P, Q) - x


def jacobian(net: Network, s: PfState) -> np.ndarray:
    """d[P_pv; P_pq; Q_pq] / d[theta_pv; theta_pq; V_pq] at state ``s``."""
    V = s.voltage
    Y = net.Y
    Ibus = Y @ V
    dS_dVa = 1j * V[:, None] * np.conj(np.diag(Ibus) - Y * V[None, :])
    Vnorm = V / s.vm
    dS_dVm = V[:, None] * np.conj(Y * Vnorm[None, :]) + np.diag(np.conj(Ibus) * Vnorm)
    pvpq, pq = net.pvpq, net.pq
    J11 = dS_dVa.real[np.ix_(pvpq, pvpq)]
    J12 = dS_dVm.real[np.ix_(pvpq, pq)]
    J21 = dS_dVa.imag[np.ix_(pq, pvpq)]
    J22 = dS_dVm.imag[np.ix_(pq, pq)]
    return np.block([[J11, J12], [J21, J22]])


def newton_raphson(net: Network, x, start: PfState | None = None, tol: float = 1e-8,
                   max_iter: int = 20):
    """Solve for the state whose injections equal ``x``.

    Returns ``(state, iterations)``. Slack phasor and PV magnitudes are held
    at the values in ``start`` (flat start by default). Raises Diverged when
    ``max_iter`` is hit or the mismatch grows three iterations in a row.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (net.dim,):
        raise DimensionMismatch(f"x has shape {x.shape}, network needs ({net.dim},)")
    s = start or flat_start(net)
    theta = np.array(s.theta, dtype=float)
    vm = np.array(s.vm, dtype=float)
    pvpq, pq = net.pvpq, net.pq
    npvpq = len(pvpq)

    F = mismatch(net, PfState(theta, vm), x)
    norm = np.max(np.abs(F)) if F.size else 0.0
    grew = 0
    it = 0
    while norm > tol:
        if it >= max_iter or not np.isfinite(norm):
            raise Diverged(it, float(norm))
        J = jacobian(net, PfState(theta, vm))
        try:
            dy = numerics.lu_solve(J, -F)
        except SingularMatrix as exc:
            raise SingularJacobian(f"Jacobian singular at iteration {it}") from exc
        theta[pvpq] += dy[:npvpq]
        vm[pq] += dy[npvpq:]
        it += 1
        F = mismatch(net, PfState(theta, vm), x)
        new_norm = np.max(np.abs(F))
        grew = grew + 1 if new_norm > norm else 0
        norm = new_norm
        if grew >= 3:
            raise Diverged(it, float(norm))
    return PfState(theta, vm), it


def solve_base(net: Network, tol: float = 1e-8):
    """NR solution of the case's scheduled injections: ``(state, x0, y0)``."""
    x0 = base_injection(net)
    s, _ = newton_raphson(net, x0, tol=tol)
    return s, x0, y_from_state(net, s)


def branch_flows(net: Network, s: PfState) -> BranchFlows:
    """Per-branch flows at both ends; taps and phase shifts are included."""
    f, t, yff, yft, ytf, ytt = _branch_model(net)
    V = s.voltage
    Vf, Vt = V[..., f], V[..., t]
    Sf = Vf * np.conj(yff * Vf + yft * Vt)
    St = Vt * np.conj(ytf * Vf + ytt * Vt)
    return BranchFlows(Sf.real, Sf.imag, St.real, St.imag, net.base_mva)


def _branch_model(net: Network):
    return net._cached("branch_model", lambda: branch_admittances(net.branches, net.n_bus))


def branch_labels(net: Network) -> list[str]:
    ids = net.bus_ids
    return [f"{ids[br.f]}-{ids[br.t]}" for br in net.branches if br.status > 0]
