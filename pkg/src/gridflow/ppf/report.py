"""PPF report: accuracy against a reference run, densities, risk, convergence table.

``report.json`` holds only quantities that are a deterministic function of the
inputs; wall-clock timings go to a separate ``timing.json``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .. import acpf
from ..case_io import Network
from ..errors import AllTargetsNearZero, DegenerateSamples
from .mcs import McsResult
from .stats import (
    Limit,
    armse,
    awd,
    kde_curve,
    kde,
    mape,
    risk_assess,
    variance_coefficient_scan,
)

DEFAULT_COUNTS = (100, 200, 500, 1000, 2000, 5000, 10000, 20000, 50000)


@dataclass
class ReportOptions:
    kde: list[str] | None = None  # quantity names; None picks three representative ones
    vm_percentile: float | None = 4.0  # lower Vm limit at this percentile of the reference
    branch_limits: bool = True  # |S_from| against rateA
    variance_counts: list[int] | None = None
    kde_points: int = 512

    @classmethod
    def from_dict(cls, d: dict) -> "ReportOptions":
        return cls(**d)


def flow_names(net: Network) -> list[str]:
    """``S_f-t`` per in-service branch; parallel circuits get ``#2``, ``#3`` suffixes."""
    seen: dict[str, int] = {}
    out = []
    for lab in acpf.branch_labels(net):
        seen[lab] = seen.get(lab, 0) + 1
        out.append(f"S_{lab}" if seen[lab] == 1 else f"S_{lab}#{seen[lab]}")
    return out


def output_samples(net: Network, res: McsResult, rows=None) -> dict[str, np.ndarray]:
    """Per-quantity sample vectors: unknowns plus from-end apparent power (p.u.)."""
    rows = np.flatnonzero(res.ok) if rows is None else rows
    out = {name: res.Y[rows, j] for j, name in enumerate(acpf.unknown_labels(net))}
    S = res.s_from[rows]
    out.update({name: S[:, j] for j, name in enumerate(flow_names(net))})
    return out


def default_limits(net: Network, ref: dict[str, np.ndarray], opts: ReportOptions) -> list[Limit]:
    limits = []
    if opts.vm_percentile is not None:
        for i in net.pq:
            q = f"vm_{net.bus_ids[i]}"
            limits.append(Limit(q, float(np.percentile(ref[q], opts.vm_percentile)), "lower"))
    if opts.branch_limits:
        for name, rate in zip(flow_names(net), net.rate_a):
            if rate > 0:
                limits.append(Limit(name, float(rate) / net.base_mva, "upper"))
    return limits


def _default_kde(net: Network, samples: dict[str, np.ndarray]) -> list[str]:
    vm = [f"vm_{net.bus_ids[i]}" for i in net.pq]
    th = [f"theta_{net.bus_ids[i]}" for i in net.pvpq]
    fl = flow_names(net)
    picks = []
    if vm:
        picks.append(min(vm, key=lambda q: samples[q].mean()))
    if th:
        picks.append(max(th, key=lambda q: abs(samples[q].mean())))
    if fl:
        picks.append(max(fl, key=lambda q: samples[q].mean()))
    return picks


def _safe_mape(Yh, Y):
    try:
        return mape(Yh, Y)
    except AllTargetsNearZero:
        return np.full(Y.shape[1], np.nan), np.full(Y.shape[1], len(Y))


def _accuracy(net: Network, res: McsResult, ref: McsResult, rows) -> dict:
    na = net.n_pv + net.n_pq
    Yh, Y = res.Y[rows], ref.Y[rows]
    Sh, S = res.s_from[rows], ref.s_from[rows]
    base = net.base_mva
    mape_a, exc_a = _safe_mape(Yh[:, :na], Y[:, :na])
    mape_v, exc_v = _safe_mape(Yh[:, na:], Y[:, na:])
    return {
        "n_paired": int(len(rows)),
        "armse_angle": armse(Yh[:, :na], Y[:, :na]),
        "armse_vm": armse(Yh[:, na:], Y[:, na:]),
        "armse_branch": armse(Sh, S),
        "armse_branch_mva": armse(Sh * base, S * base),
        "awd_angle": awd(Yh[:, :na], Y[:, :na]),
        "awd_vm": awd(Yh[:, na:], Y[:, na:]),
        "awd_branch": awd(Sh, S),
        "awd_branch_mva": awd(Sh * base, S * base),
        "mape_angle": mape_a.tolist(),
        "mape_vm": mape_v.tolist(),
        "mape_excluded": int(exc_a.sum() + exc_v.sum()),
    }


@dataclass
class PpfReport:
    case: str
    solver: str
    n: int
    n_failed: int
    reference: str | None
    accuracy: dict | None
    kde: dict = field(default_factory=dict)
    risk: list = field(default_factory=list)
    reference_risk: list | None = None
    risk_deltas: dict | None = None
    variance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))


def build_report(net: Network, res: McsResult, ref: McsResult | None = None,
                 opts: ReportOptions | None = None):
    """Returns ``(PpfReport, curves)``; ``curves`` maps name to (grid, density, ref_density)."""
    opts = opts or ReportOptions()
    if ref is not None and ref.n != res.n:
        raise ValueError("reference run must use the same samples")
    rows = np.flatnonzero(res.ok & (ref.ok if ref is not None else True))
    own = output_samples(net, res, rows)
    base = output_samples(net, ref, rows) if ref is not None else own

    limits = default_limits(net, base, opts)
    risk = risk_assess(own, limits)
    ref_risk = risk_assess(base, limits) if ref is not None else None
    deltas = None
    if ref_risk is not None:
        diffs = [a.probability - b.probability for a, b in zip(risk, ref_risk)]
        inside = [b.depth_ci[0] <= a.mean_depth <= b.depth_ci[1]
                  for a, b in zip(risk, ref_risk) if a.estimable and b.estimable]
        deltas = {
            "max_abs_probability_delta": max((abs(d) for d in diffs), default=0.0),
            "probability_delta": dict(zip([lim.quantity for lim in limits], diffs)),
            "depth_inside_reference_ci": int(sum(inside)),
            "depth_compared": len(inside),
        }

    curves = {}
    kde_info = {}
    for q in opts.kde or _default_kde(net, own):
        try:
            grid, dens = kde_curve(own[q], opts.kde_points)
        except DegenerateSamples as exc:
            kde_info[q] = {"point_mass": exc.value}
            continue
        ref_dens = None
        if ref is not None:
            try:
                ref_dens = kde(base[q], grid)
            except DegenerateSamples:
                pass
        curves[q] = (grid, dens, ref_dens)
        kde_info[q] = {"file": f"kde_{q}.csv", "integral": float(np.trapezoid(dens, grid))}

    na = net.n_pv + net.n_pq
    m = len(rows)
    counts = opts.variance_counts or [c for c in DEFAULT_COUNTS if c < m] + [m]
    counts = [c for c in counts if c <= m]
    Y = res.Y[rows]
    variance = {
        "counts": counts,
        "angle": [v for _, v in variance_coefficient_scan(Y[:, :na], counts)],
        "vm": [v for _, v in variance_coefficient_scan(Y[:, na:], counts)],
    }
    report = PpfReport(
        case=net.name, solver=res.solver, n=res.n, n_failed=int(res.n - len(rows)),
        reference=ref.solver if ref is not None else None,
        accuracy=_accuracy(net, res, ref, rows) if ref is not None else None,
        kde=kde_info,
        risk=[r.to_dict() for r in risk],
        reference_risk=[r.to_dict() for r in ref_risk] if ref_risk is not None else None,
        risk_deltas=deltas, variance=variance,
    )
    return report, curves


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, tuples to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


_NUM = {"type": ["number", "null"]}
_RECORD = {
    "type": "object",
    "required": ["quantity", "kind", "limit", "n", "probability", "ci", "mean_depth",
                 "depth_ci", "variance_coefficient", "converged", "estimable"],
    "properties": {
        "quantity": {"type": "string"},
        "kind": {"enum": ["lower", "upper"]},
        "probability": {"type": "number", "minimum": 0, "maximum": 1},
        "ci": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
               "minItems": 2, "maxItems": 2},
        "variance_coefficient": _NUM,
    },
}
REPORT_SCHEMA = {
    "type": "object",
    "required": ["case", "solver", "n", "n_failed", "reference", "accuracy", "kde", "risk",
                 "reference_risk", "risk_deltas", "variance"],
    "additionalProperties": False,
    "properties": {
        "case": {"type": "string"},
        "solver": {"type": "string"},
        "n": {"type": "integer", "minimum": 0},
        "n_failed": {"type": "integer", "minimum": 0},
        "reference": {"type": ["string", "null"]},
        "accuracy": {
            "type": ["object", "null"],
            "properties": {k: _NUM for k in ("armse_angle", "armse_vm", "awd_angle",
                                              "awd_vm", "awd_branch")},
        },
        "kde": {"type": "object"},
        "risk": {"type": "array", "items": _RECORD},
        "reference_risk": {"type": ["array", "null"], "items": _RECORD},
        "risk_deltas": {"type": ["object", "null"]},
        "variance": {
            "type": "object",
            "required": ["counts", "angle", "vm"],
            "properties": {"counts": {"type": "array", "items": {"type": "integer"}}},
        },
    },
}


def validate_report(d: dict) -> None:
    jsonschema.validate(d, REPORT_SCHEMA)


def dumps(d: dict) -> str:
    return json.dumps(_clean(d), indent=2, sort_keys=True) + "\n"


def write_report(out, report: PpfReport, curves, timing: dict | None = None) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    d = report.to_dict()
    validate_report(d)
    (out / "report.json").write_text(dumps(d))
    for name, (grid, dens, ref_dens) in curves.items():
        cols = [grid, dens] + ([ref_dens] if ref_dens is not None else [])
        header = "grid,density" + (",reference_density" if ref_dens is not None else "")
        lines = [header] + [",".join(repr(float(v)) for v in row) for row in zip(*cols)]
        (out / f"kde_{name}.csv").write_text("\n".join(lines) + "\n")
    if timing is not None:
        (out / "timing.json").write_text(dumps(timing))
    return out
