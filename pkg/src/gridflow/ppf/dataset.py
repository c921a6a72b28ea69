"""Input/output datasets built by solving every scenario with Newton-Raphson."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import acpf
from ..case_io import Network
from ..errors import Diverged, SingularJacobian, TooManyDivergences
from .scenarios import ScenarioSpec, sample_injections

log = logging.getLogger(__name__)

MAX_DROP_FRACTION = 0.01


def default_threads() -> int:
    return max(1, int(os.environ.get("GRIDFLOW_THREADS", "1")))


def solve_many(net: Network, X, *, tol: float = 1e-8, max_iter: int = 20,
               threads: int | None = None):
    """Solve each row of ``X`` from flat start.

    Returns ``(Y, ok)``; rows that failed to converge are NaN with ``ok`` False.
    Row order never depends on the thread count.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    Y = np.full((n, net.dim), np.nan)
    ok = np.zeros(n, dtype=bool)
    start = acpf.flat_start(net)

    def work(rows):
        for i in rows:
            try:
                s, _ = acpf.newton_raphson(net, X[i], start, tol=tol, max_iter=max_iter)
            except (Diverged, SingularJacobian) as exc:
                log.info("sample %d dropped: %s", i, exc)
                continue
            Y[i] = acpf.y_from_state(net, s)
            ok[i] = True

    threads = threads or default_threads()
    if threads <= 1 or n < 2:
        work(range(n))
    else:
        chunks = np.array_split(np.arange(n), threads)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, chunks))
    return Y, ok


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    splits: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def part(self, name: str):
        idx = self.splits[name]
        return self.X[idx], self.Y[idx]

    @property
    def train(self):
        return self.part("train")

    @property
    def val(self):
        return self.part("val")

    @property
    def test(self):
        return self.part("test")


def generate_dataset(net: Network, spec: ScenarioSpec, splits=(12000, 4000, 4000), *,
                     tol: float = 1e-8, threads: int | None = None) -> Dataset:
    """Sample ``sum(splits)`` scenarios, solve them, and split train/val/test in order.

    Diverged samples are dropped (the test split absorbs the shortfall); more
    than 1% dropped raises TooManyDivergences.
    """
    splits = tuple(int(s) for s in splits)
    n_req = sum(splits)
    if spec.n != n_req:
        spec = ScenarioSpec(**{**spec.__dict__, "n": n_req})
    X = sample_injections(net, spec)
    Y, ok = solve_many(net, X, tol=tol, threads=threads)
    dropped = int((~ok).sum())
    if dropped > MAX_DROP_FRACTION * n_req:
        raise TooManyDivergences(dropped, n_req)
    if dropped:
        log.warning("%d of %d samples did not converge and were dropped", dropped, n_req)
    X, Y = X[ok], Y[ok]
    n = len(X)
    bounds = np.minimum(np.cumsum((0,) + splits), n)
    names = ("train", "val", "test")
    split_idx = {name: np.arange(bounds[k], bounds[k + 1]) for k, name in enumerate(names)}
    meta = {
        "case": net.name,
        "spec_hash": spec.digest(),
        "spec": spec.to_dict(),
        "requested": n_req,
        "dropped": dropped,
        "nr_tol": tol,
        "splits": {k: int(len(v)) for k, v in split_idx.items()},
        "requested_splits": list(splits),
        "x_columns": acpf.injection_labels(net),
        "y_columns": acpf.unknown_labels(net),
    }
    return Dataset(X, Y, split_idx, meta)


def _write_csv(path: Path, header, M) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_dataset(ds: Dataset, out: Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    xcols = ds.meta.get("x_columns") or [f"x{j}" for j in range(ds.X.shape[1])]
    ycols = ds.meta.get("y_columns") or [f"y{j}" for j in range(ds.Y.shape[1])]
    _write_csv(out / "X.csv", xcols, ds.X)
    _write_csv(out / "Y.csv", ycols, ds.Y)
    (out / "meta.json").write_text(json.dumps(ds.meta, indent=2, sort_keys=True) + "\n")


def load_dataset(path: Path) -> Dataset:
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    X = np.loadtxt(path / "X.csv", delimiter=",", skiprows=1, ndmin=2)
    Y = np.loadtxt(path / "Y.csv", delimiter=",", skiprows=1, ndmin=2)
    sizes = [meta["splits"][k] for k in ("train", "val", "test")]
    bounds = np.cumsum([0] + sizes)
    splits = {k: np.arange(bounds[i], bounds[i + 1])
              for i, k in enumerate(("train", "val", "test"))}
    return Dataset(X, Y, splits, meta)
