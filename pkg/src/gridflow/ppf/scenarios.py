"""Stochastic injection scenarios.

Every random quantity is driven by one column of a uniform matrix. Monte
Carlo fills it from a seeded stream; quasi-Monte Carlo uses a Halton
sequence. Marginals then come from inverse CDFs, so both samplers share the
same transform path (Beta under MC is the exception: two Gamma variates).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .. import numerics
from ..acpf import x_from_injections
from ..case_io import Network
from ..errors import BadSpec, CovarianceNotPSD, NotPositiveDefinite

HALTON_SKIP = 409
PSD_TOLERANCE = 1e-8


@dataclass
class GaussianGroup:
    """Correlated Gaussian perturbation of generation or load around the case values.

    ``quantity`` is ``"pg"`` (active generation at PV buses) or ``"load"``
    (P and Q demand). ``buses`` is ``"pv"``, ``"loads"`` (buses with nonzero
    demand) or an explicit list of external bus ids.
    """

    quantity: str
    buses: str | list[int] = "pv"
    ratio: float = 0.1
    correlation: float = 0.2
    pq_correlation: float = 0.8


@dataclass
class WeibullUnit:
    bus: int
    k: float = 2.0
    lam: float = 1.0
    scale: float = 10.0  # MW per unit of the Weibull variate


@dataclass
class BetaUnit:
    bus: int
    a: float = 2.0
    b: float = 2.0
    capacity: float = 10.0  # MW


@dataclass
class OutageUnit:
    bus: int
    probability: float = 0.05


@dataclass
class ScenarioSpec:
    gaussian: list[GaussianGroup] = field(default_factory=list)
    weibull: list[WeibullUnit] = field(default_factory=list)
    beta: list[BetaUnit] = field(default_factory=list)
    outages: list[OutageUnit] = field(default_factory=list)
    sampler: str = "mc"
    seed: int = 0
    n: int = 1000

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        known = {"gaussian", "weibull", "beta", "outages", "sampler", "seed", "n"}
        unknown = set(d) - known
        if unknown:
            raise BadSpec(f"unknown scenario keys: {sorted(unknown)}")
        try:
            return cls(
                gaussian=[GaussianGroup(**g) for g in d.pop("gaussian", [])],
                weibull=[WeibullUnit(**w) for w in d.pop("weibull", [])],
                beta=[BetaUnit(**b) for b in d.pop("beta", [])],
                outages=[OutageUnit(**o) for o in d.pop("outages", [])],
                **d,
            )
        except TypeError as exc:
            raise BadSpec(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ScenarioDraw:
    """Sampled components in p.u.; ``pg`` is per-bus scheduled generation after outages."""

    pg: np.ndarray
    pd: np.ndarray
    qd: np.ndarray
    renewable: np.ndarray
    x: np.ndarray


def _resolve_buses(net: Network, buses, quantity: str) -> np.ndarray:
    if buses == "pv":
        return np.asarray(net.pv, dtype=int)
    if buses == "loads":
        return np.flatnonzero((net.pd != 0) | (net.qd != 0))
    if isinstance(buses, str):
        raise BadSpec(f"unknown bus selector {buses!r} for {quantity} group")
    try:
        return np.array([net.index_of(b) for b in buses], dtype=int)
    except KeyError as exc:
        raise BadSpec(f"unknown bus id {exc.args[0]}") from None


def _group_correlation(group: GaussianGroup, m: int) -> np.ndarray:
    rho = group.correlation
    if group.quantity == "pg":
        return rho * np.ones((m, m)) + (1.0 - rho) * np.eye(m)
    pair = np.kron(np.ones((2, 2)), np.eye(m))
    return rho * np.ones((2 * m, 2 * m)) + (group.pq_correlation - rho) * pair \
        + (1.0 - group.pq_correlation) * np.eye(2 * m)


def _correlation_factor(C: np.ndarray) -> np.ndarray:
    if C.size == 0:
        return C
    w = np.linalg.eigvalsh(C)
    if w.min() < -PSD_TOLERANCE:
        raise CovarianceNotPSD(f"correlation matrix has eigenvalue {w.min():.3e}")
    try:
        return numerics.nearest_correlation_factor(C)
    except NotPositiveDefinite as exc:
        raise CovarianceNotPSD(str(exc)) from None


def validate(net: Network, spec: ScenarioSpec) -> None:
    if spec.sampler not in ("mc", "qmc"):
        raise BadSpec(f"sampler must be 'mc' or 'qmc', got {spec.sampler!r}")
    if spec.n < 1:
        raise BadSpec("sample count must be positive")
    for g in spec.gaussian:
        if g.quantity not in ("pg", "load"):
            raise BadSpec(f"gaussian quantity must be 'pg' or 'load', got {g.quantity!r}")
        if g.ratio < 0:
            raise BadSpec("std/mean ratio must be non-negative")
        if not (-1 <= g.correlation <= 1 and -1 <= g.pq_correlation <= 1):
            raise BadSpec("correlations must lie in [-1, 1]")
        _resolve_buses(net, g.buses, g.quantity)
    for w in spec.weibull:
        if not (w.k > 0 and w.lam > 0 and w.scale >= 0):
            raise BadSpec(f"bad Weibull unit {w}")
    for b in spec.beta:
        if not (b.a > 0 and b.b > 0 and b.capacity >= 0):
            raise BadSpec(f"bad Beta unit {b}")
    for o in spec.outages:
        if not 0 <= o.probability <= 1:
            raise BadSpec(f"outage probability must be in [0, 1], got {o.probability}")
    for unit in [*spec.weibull, *spec.beta, *spec.outages]:
        if unit.bus not in set(net.bus_ids.tolist()):
            raise BadSpec(f"unknown bus id {unit.bus}")
        if unit.bus == net.buses[net.slack].id:
            raise BadSpec(f"bus {unit.bus} is the slack bus; its injection is not an input")


def uniform_columns(net: Network, spec: ScenarioSpec) -> int:
    d = 0
    for g in spec.gaussian:
        m = len(_resolve_buses(net, g.buses, g.quantity))
        d += m if g.quantity == "pg" else 2 * m
    return d + len(spec.weibull) + len(spec.beta) + len(spec.outages)


def halton(n: int, d: int, skip: int = HALTON_SKIP) -> np.ndarray:
    """Unscrambled Halton points on the first ``d`` primes, skipping ``skip`` leading points."""
    engine = qmc.Halton(d, scramble=False)
    engine.fast_forward(skip)
    return engine.random(n)


def uniforms(net: Network, spec: ScenarioSpec) -> np.ndarray:
    d = uniform_columns(net, spec)
    if spec.sampler == "qmc":
        return halton(spec.n, d) if d else np.zeros((spec.n, 0))
    return numerics.Rng(spec.seed).child("scenario-uniforms").uniform((spec.n, d))


def sample_components(net: Network, spec: ScenarioSpec) -> ScenarioDraw:
    validate(net, spec)
    n = spec.n
    U = uniforms(net, spec)
    col = 0
    pg = np.tile(net.pg, (n, 1))
    pd = np.tile(net.pd, (n, 1))
    qd = np.tile(net.qd, (n, 1))
    for g in spec.gaussian:
        idx = _resolve_buses(net, g.buses, g.quantity)
        if g.quantity == "pg":
            mean = net.pg[idx]
        else:
            mean = np.concatenate([net.pd[idx], net.qd[idx]])
        m = len(mean)
        L = _correlation_factor(_group_correlation(g, len(idx)))
        z = numerics.normal_icdf(U[:, col:col + m]) @ L.T
        col += m
        vals = mean + g.ratio * np.abs(mean) * z
        if g.quantity == "pg":
            pg[:, idx] = vals
        else:
            pd[:, idx] = vals[:, :len(idx)]
            qd[:, idx] = vals[:, len(idx):]

    renewable = np.zeros((n, net.n_bus))
    base = net.base_mva
    for w in spec.weibull:
        draw = numerics.weibull_icdf(U[:, col], w.k, w.lam)
        renewable[:, net.index_of(w.bus)] += w.scale * draw / base
        col += 1
    beta_rng = numerics.Rng(spec.seed).child("scenario-beta")
    for k, b in enumerate(spec.beta):
        if spec.sampler == "qmc":
            draw = numerics.beta_icdf(U[:, col], b.a, b.b)
        else:
            draw = numerics.sample(beta_rng.child(k), numerics.Beta(b.a, b.b), size=n)
        renewable[:, net.index_of(b.bus)] += b.capacity * draw / base
        col += 1
    for o in spec.outages:
        survive = numerics.bernoulli_threshold(U[:, col], 1.0 - o.probability)
        i = net.index_of(o.bus)
        pg[:, i] *= survive
        col += 1

    P = pg + renewable - pd
    Q = net.qg - qd
    return ScenarioDraw(pg=pg, pd=pd, qd=qd, renewable=renewable, x=x_from_injections(net, P, Q))


def sample_injections(net: Network, spec: ScenarioSpec) -> np.ndarray:
    """(n, dim) matrix of injection vectors drawn from ``spec``."""
    return sample_components(net, spec).x
