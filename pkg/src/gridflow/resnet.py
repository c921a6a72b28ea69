"""Residual surrogate: ReLU MLP trunk plus a fully connected linear shortcut.

``y = trunk(x) + Ws x + bs``. Only the shortcut is physics-initialized; the
trunk always starts from fan-in scaled uniform weights (the default of
``torch.nn.Linear``). Training is mini-batch Adam on the element-mean MSE
with early stopping on validation loss.
"""

from __future__ import annotations

import json
import struct
import time
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import linmodels
from .errors import (
    CorruptCheckpoint,
    DimensionMismatch,
    MissingContext,
    NonFiniteLoss,
    VersionMismatch,
)
from .linmodels import AffineModel, Provenance
from .numerics import Rng

SCHEMES = {
    "random": Provenance.RANDOM,
    "data": Provenance.RIDGE,
    "lpf": Provenance.LINEARIZED_PF,
    "jac": Provenance.JACOBIAN,
}


@dataclass(frozen=True)
class NetSpec:
    layer_sizes: tuple[int, ...]
    shortcut: bool = True

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ValueError("need at least one hidden layer")
        if sizes[0] != sizes[-1]:
            raise ValueError(f"input and output widths differ: {sizes[0]} vs {sizes[-1]}")

    @classmethod
    def for_dim(cls, dim: int, hidden=(100, 100), shortcut=True) -> "NetSpec":
        return cls((dim, *hidden, dim), shortcut)

    @property
    def dim(self) -> int:
        return self.layer_sizes[0]


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 300
    patience: int = 20
    min_delta: float = 0.0
    lr_stages: int = 1  # >1: on a plateau, restart from the best weights at lr * lr_decay
    lr_decay: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (self.learning_rate > 0 and self.eps > 0):
            raise ValueError("learning rate and epsilon must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.lr_stages < 1 or not 0 < self.lr_decay < 1:
            raise ValueError("lr_stages must be >= 1 and lr_decay in (0, 1)")


@dataclass
class TrainTrace:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def epochs(self) -> int:
        return len(self.train_mse)


class ResidualNet:
    """Parameters live in one flat float64 buffer; the tensors are views into it.

    Tensor order (also the checkpoint order): W1, b1, ..., WL, bL, Ws, bs.
    Weights are (out, in), so a layer computes ``x @ W.T + b`` on row batches.
    """

    def __init__(self, spec: NetSpec, provenance: Provenance = Provenance.RANDOM,
                 seed: int = 0):
        self.spec = spec
        self.provenance = Provenance(provenance)
        self.seed = int(seed)
        self.shapes = []
        sizes = spec.layer_sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.shapes += [(fan_out, fan_in), (fan_out,)]
        self.shapes += [(spec.dim, spec.dim), (spec.dim,)]
        self.flat = np.zeros(sum(int(np.prod(s)) for s in self.shapes))
        self.tensors = _views(self.flat, self.shapes)

    @property
    def n_layers(self) -> int:
        return len(self.spec.layer_sizes) - 1

    @property
    def trunk(self) -> list[tuple[np.ndarray, np.ndarray]]:
        t = self.tensors
        return [(t[2 * i], t[2 * i + 1]) for i in range(self.n_layers)]

    @property
    def Ws(self) -> np.ndarray:
        return self.tensors[-2]

    @property
    def bs(self) -> np.ndarray:
        return self.tensors[-1]

    @property
    def shortcut(self) -> AffineModel:
        return AffineModel(self.Ws.copy(), self.bs.copy(), self.provenance)

    def copy(self) -> "ResidualNet":
        other = ResidualNet(self.spec, self.provenance, self.seed)
        other.flat[:] = self.flat
        return other

    def predict(self, X, chunk: int = 65536) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if len(X) <= chunk:
            return forward(self, X)[0]
        return np.vstack([forward(self, X[i:i + chunk])[0] for i in range(0, len(X), chunk)])

    def trunk_output(self, X) -> np.ndarray:
        h = np.asarray(X, dtype=float)
        layers = self.trunk
        for i, (W, b) in enumerate(layers):
            h = h @ W.T + b
            if i < len(layers) - 1:
                h = np.maximum(h, 0.0)
        return h


def _views(flat, shapes):
    out, k = [], 0
    for s in shapes:
        size = int(np.prod(s))
        out.append(flat[k:k + size].reshape(s))
        k += size
    return out


def init_net(spec: NetSpec, scheme: str = "random", *, net=None, data=None,
             seed: int = 0, ridge_lambda: float | None = None,
             zero_last: bool = False) -> ResidualNet:
    """Build a ResidualNet whose shortcut follows ``scheme``.

    ``scheme`` is one of ``random``, ``data`` (ridge fit on ``data=(X, Y)``),
    ``lpf`` (decoupled linear power flow, needs ``net``) or ``jac`` (Jacobian
    at the base case, needs ``net``). ``zero_last`` zeroes the trunk's output
    layer so the network starts exactly at its shortcut.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    rng = Rng(seed).child("init")
    if scheme == "random":
        shortcut = linmodels.random_affine(spec.dim, spec.dim, rng.child("shortcut"))
    elif scheme == "data":
        if data is None:
            raise MissingContext(scheme, "training data (X, Y)")
        shortcut = linmodels.ridge_fit(data[0], data[1], ridge_lambda)
    else:
        if net is None:
            raise MissingContext(scheme, "network parameters")
        if scheme == "lpf":
            shortcut = linmodels.init_linearized_pf(net)
        else:
            shortcut = linmodels.init_jacobian(net)
    if shortcut.Ws.shape != (spec.dim, spec.dim):
        raise DimensionMismatch(f"shortcut is {shortcut.Ws.shape}, net width is {spec.dim}")

    model = ResidualNet(spec, shortcut.provenance, seed)
    trunk_rng = rng.child("trunk")
    for W, b in model.trunk:
        bound = 1.0 / np.sqrt(W.shape[1])
        W[:] = (2.0 * trunk_rng.uniform(W.shape) - 1.0) * bound
        b[:] = (2.0 * trunk_rng.uniform(b.shape) - 1.0) * bound
    if zero_last:
        W, b = model.trunk[-1]
        W[:] = 0.0
        b[:] = 0.0
    if spec.shortcut:
        model.Ws[:] = shortcut.Ws
        model.bs[:] = shortcut.bs
    return model


def forward(model: ResidualNet, X):
    """Return ``(Y, cache)``; the cache holds the input and post-activations."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.spec.dim:
        raise DimensionMismatch(f"input shape {X.shape}, expected (n, {model.spec.dim})")
    acts = [X]
    h = X
    layers = model.trunk
    for i, (W, b) in enumerate(layers):
        h = h @ W.T + b
        if i < len(layers) - 1:
            h = np.maximum(h, 0.0)
        acts.append(h)
    Y = h
    if model.spec.shortcut:
        Y = Y + (X @ model.Ws.T + model.bs)  # shortcut summed as one branch
    return Y, acts


def backward(model: ResidualNet, cache, dY) -> np.ndarray:
    """Flat gradient (same layout as ``model.flat``) given ``dY = dLoss/dY``."""
    grad = np.zeros_like(model.flat)
    g = _views(grad, model.shapes)
    acts = cache
    X = acts[0]
    dY = np.asarray(dY, dtype=float)
    if model.spec.shortcut:
        g[-2][:] = dY.T @ X
        g[-1][:] = dY.sum(axis=0)
    delta = dY
    layers = model.trunk
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in = acts[i]
        g[2 * i][:] = delta.T @ a_in
        g[2 * i + 1][:] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ W) * (a_in > 0.0)
    return grad


def mse(model: ResidualNet, X, Y, chunk: int = 8192) -> float:
    total = 0.0
    for i in range(0, len(X), chunk):
        diff = forward(model, X[i:i + chunk])[0] - Y[i:i + chunk]
        total += float(np.sum(diff * diff))
    return total / (len(X) * Y.shape[1])


def mse_grad(model: ResidualNet, X, Y):
    """Element-mean MSE and its flat gradient on one batch."""
    out, cache = forward(model, X)
    diff = out - Y
    loss = float(np.mean(diff * diff))
    dY = (2.0 / diff.size) * diff
    return loss, backward(model, cache, dY)


def train(model: ResidualNet, train_data, val_data, cfg: TrainConfig | None = None,
          *, callback=None):
    """Train ``model`` in place with Adam; returns ``(best_model, trace)``.

    After every epoch the full training and validation MSE are recorded.
    Training stops once validation MSE has not improved by ``min_delta`` for
    ``patience`` epochs, and the best-validation parameters are returned. With
    ``lr_stages > 1`` a plateau instead restarts Adam from the best parameters
    at a learning rate scaled by ``lr_decay``, until the stages run out.
    """
    cfg = cfg or TrainConfig()
    Xtr, Ytr = (np.asarray(a, dtype=float) for a in train_data)
    Xva, Yva = (np.asarray(a, dtype=float) for a in val_data)
    m = np.zeros_like(model.flat)
    v = np.zeros_like(model.flat)
    step = 0
    trace = TrainTrace()
    best = model.copy()
    best_val = np.inf
    stale = 0
    shuffle_rng = Rng(cfg.seed).child("shuffle")
    n = len(Xtr)
    lr = cfg.learning_rate
    stage = 1
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.child(epoch).permutation(n)
        for batch, k in enumerate(range(0, n, cfg.batch_size)):
            idx = order[k:k + cfg.batch_size]
            loss, grad = mse_grad(model, Xtr[idx], Ytr[idx])
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise NonFiniteLoss(epoch, batch)
            step += 1
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * grad
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * grad * grad
            m_hat = m / (1.0 - cfg.beta1 ** step)
            v_hat = v / (1.0 - cfg.beta2 ** step)
            model.flat -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        tr = mse(model, Xtr, Ytr)
        va = mse(model, Xva, Yva)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise NonFiniteLoss(epoch, -1)
        trace.train_mse.append(tr)
        trace.val_mse.append(va)
        trace.seconds.append(time.perf_counter() - t0)
        if va < best_val - cfg.min_delta:
            best_val = va
            best = model.copy()
            trace.best_epoch = epoch
            stale = 0
        else:
            if va < best_val:
                best_val = va
                best = model.copy()
                trace.best_epoch = epoch
            stale += 1
        if callback is not None:
            callback(epoch, tr, va)
        if stale >= cfg.patience:
            if stage >= cfg.lr_stages:
                break
            stage += 1
            lr *= cfg.lr_decay
            model.flat[:] = best.flat
            m[:] = 0.0
            v[:] = 0.0
            step = 0
            stale = 0
    return best, trace


# --- checkpoints -----------------------------------------------------------

MAGIC = b"GFLWCKPT"
VERSION = 1
_HEAD = struct.Struct("<8sII")


def save_checkpoint(model: ResidualNet, path, extra: dict | None = None) -> None:
    """Write a versioned binary checkpoint.

    Layout: 8-byte magic, uint32 version, uint32 header length, UTF-8 JSON
    header, then every tensor as little-endian float64 in row-major order.
    """
    payload = model.flat.astype("<f8").tobytes()
    header = {
        "spec": {"layer_sizes": list(model.spec.layer_sizes), "shortcut": model.spec.shortcut},
        "provenance": model.provenance.value,
        "seed": model.seed,
        "tensors": [list(s) for s in model.shapes],
        "crc32": zlib.crc32(payload),
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    Path(path).write_bytes(_HEAD.pack(MAGIC, VERSION, len(blob)) + blob + payload)


def load_checkpoint(path) -> ResidualNet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEAD.size:
        raise CorruptCheckpoint(f"{path}: file too short")
    magic, version, hlen = _HEAD.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic")
    if version != VERSION:
        raise VersionMismatch(f"{path}: checkpoint version {version}, expected {VERSION}")
    try:
        header = json.loads(raw[_HEAD.size:_HEAD.size + hlen].decode())
        spec = NetSpec(tuple(header["spec"]["layer_sizes"]), bool(header["spec"]["shortcut"]))
        model = ResidualNet(spec, Provenance(header["provenance"]), header["seed"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable header ({exc})") from None
    payload = raw[_HEAD.size + hlen:]
    if len(payload) != model.flat.size * 8:
        raise CorruptCheckpoint(f"{path}: expected {model.flat.size * 8} payload bytes, "
                                f"found {len(payload)}")
    if zlib.crc32(payload) != header.get("crc32"):
        raise CorruptCheckpoint(f"{path}: payload checksum mismatch")
    model.flat[:] = np.frombuffer(payload, dtype="<f8")
    return model


def checkpoint_extra(path) -> dict:
    raw = Path(path).read_bytes()
    _, _, hlen = _HEAD.unpack_from(raw)
    return json.loads(raw[_HEAD.size:_HEAD.size + hlen].decode()).get("extra", {})


def trace_dict(trace: TrainTrace) -> dict:
    return asdict(trace)
