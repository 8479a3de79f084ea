"""Single-layer LSTM sequence labeler trained with backpropagation through time.

Every step emits a 2-vector; the first component scores "segment boundary"
and the second "segment body". Training minimises the summed squared error
against targets ``(omega, 0)`` at boundaries and ``(0, 1)`` elsewhere.

Gate rows in the stacked weight matrix ``W`` are ordered input, forget,
output, candidate. ``W`` has shape ``(4H, D + H)`` and acts on ``[x_t, h_{t-1}]``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import DatasetStats

log = logging.getLogger(__name__)

FORMAT_NAME = "eventseg-lstm"
FORMAT_VERSION = 1
GATES = ("i", "f", "o", "g")
PARAM_NAMES = ("W", "b", "Wy", "by")


class TrainingDiverged(RuntimeError):
    pass


def compute_target_weight(stats: DatasetStats) -> float:
    """Boundary target weight sqrt((e_total - e_boundary) / e_boundary)."""
    if stats.e_boundary == 0:
        raise ZeroDivisionError("no boundary events; supply omega explicitly")
    return math.sqrt((stats.e_total - stats.e_boundary) / stats.e_boundary)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmModel:
    W: np.ndarray
    b: np.ndarray
    Wy: np.ndarray
    by: np.ndarray
    time_steps: int = 60
    omega: float | None = None
    augmentation: str = ""

    def __post_init__(self):
        H4, DH = self.W.shape
        if H4 % 4:
            raise ValueError("W must have 4H rows")
        H = H4 // 4
        if DH <= H or self.b.shape != (H4,) or self.Wy.shape != (2, H) or self.by.shape != (2,):
            raise ValueError("inconsistent LSTM parameter shapes")
        if self.time_steps < 1:
            raise ValueError("time_steps must be >= 1")

    @property
    def hidden_width(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_width(self) -> int:
        return self.W.shape[1] - self.hidden_width

    @classmethod
    def init(
        cls,
        input_width: int,
        hidden_width: int = 64,
        time_steps: int = 60,
        seed: int = 0,
        forget_bias: float = 1.0,
        augmentation: str = "",
    ) -> "LstmModel":
        rng = np.random.default_rng(seed)
        D, H = input_width, hidden_width
        a = 1.0 / math.sqrt(D + H)
        W = rng.uniform(-a, a, size=(4 * H, D + H))
        b = np.zeros(4 * H)
        b[H:2 * H] = forget_bias
        a = 1.0 / math.sqrt(H)
        Wy = rng.uniform(-a, a, size=(2, H))
        by = np.zeros(2)
        return cls(W, b, Wy, by, time_steps, None, augmentation)

    @classmethod
    def zeros(cls, input_width: int, hidden_width: int, time_steps: int = 60) -> "LstmModel":
        H = hidden_width
        return cls(np.zeros((4 * H, input_width + H)), np.zeros(4 * H), np.zeros((2, H)), np.zeros(2), time_steps)

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> "LstmModel":
        return LstmModel(
            self.W.copy(), self.b.copy(), self.Wy.copy(), self.by.copy(),
            self.time_steps, self.omega, self.augmentation,
        )

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        H = self.hidden_width
        weights = {}
        for k, gate in enumerate(GATES):
            weights[f"W_{gate}"] = self.W[k * H:(k + 1) * H].tolist()
            weights[f"b_{gate}"] = self.b[k * H:(k + 1) * H].tolist()
        weights["W_y"] = self.Wy.tolist()
        weights["b_y"] = self.by.tolist()
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "input_width": self.input_width,
            "hidden_width": H,
            "time_steps": self.time_steps,
            "omega": self.omega,
            "augmentation": self.augmentation,
            "weights": weights,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LstmModel":
        if d.get("format") != FORMAT_NAME:
            raise ValueError("not an eventseg LSTM model file")
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        w = d["weights"]
        W = np.concatenate([np.asarray(w[f"W_{g}"], dtype=float) for g in GATES])
        b = np.concatenate([np.asarray(w[f"b_{g}"], dtype=float) for g in GATES])
        model = cls(W, b, np.asarray(w["W_y"], dtype=float), np.asarray(w["b_y"], dtype=float),
                    int(d["time_steps"]), d.get("omega"), d.get("augmentation", ""))
        if model.input_width != d["input_width"] or model.hidden_width != d["hidden_width"]:
            raise ValueError("declared dimensions do not match weight shapes")
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LstmModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class WindowBatch:
    """A stack of windows: inputs (N, L, D), targets (N, L, 2), mask (N, L)."""

    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def __getitem__(self, idx) -> "WindowBatch":
        if isinstance(idx, (int, np.integer)):
            idx = [idx]
        return WindowBatch(self.inputs[idx], self.targets[idx], self.mask[idx])


def make_targets(is_boundary: np.ndarray, omega: float) -> np.ndarray:
    """(omega, 0) at boundary positions and (0, 1) elsewhere."""
    is_boundary = np.asarray(is_boundary, dtype=bool)
    t = np.zeros(is_boundary.shape + (2,))
    t[..., 0] = np.where(is_boundary, omega, 0.0)
    t[..., 1] = np.where(is_boundary, 0.0, 1.0)
    return t


def _as3d(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[None] if x.ndim == 2 else x


def forward(model: LstmModel, inputs: np.ndarray, return_cache: bool = False):
    """Run the recurrence from zero state.

    ``inputs`` is (L, D) or (N, L, D); outputs have the same leading shape
    with a trailing dimension of 2.
    """
    single = np.ndim(inputs) == 2
    X = _as3d(inputs)
    if X.shape[-1] != model.input_width:
        raise ValueError(f"input width {X.shape[-1]} != model input width {model.input_width}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input")
    N, L, D = X.shape
    H = model.hidden_width
    Wx, Wh = model.W[:, :D], model.W[:, D:]
    Zx = X @ Wx.T + model.b
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    hs = np.empty((N, L, H))
    if return_cache:
        gates = np.empty((N, L, 4 * H))
        cs = np.empty((N, L, H))
    for t in range(L):
        z = Zx[:, t] + h @ Wh.T
        g_ifo = sigmoid(z[:, :3 * H])
        g = np.tanh(z[:, 3 * H:])
        c = g_ifo[:, H:2 * H] * c + g_ifo[:, :H] * g
        h = g_ifo[:, 2 * H:] * np.tanh(c)
        hs[:, t] = h
        if return_cache:
            gates[:, t, :3 * H] = g_ifo
            gates[:, t, 3 * H:] = g
            cs[:, t] = c
    Y = hs @ model.Wy.T + model.by
    if single:
        Y = Y[0]
    if return_cache:
        return Y, {"X": X, "hs": hs, "cs": cs, "gates": gates}
    return Y


def loss(outputs: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    """Sum over unmasked steps of the squared distance to the target."""
    diff = (np.asarray(outputs) - np.asarray(targets)) * np.asarray(mask, dtype=float)[..., None]
    return float(np.sum(diff * diff))


def backward(model: LstmModel, inputs, targets, mask, cache=None) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and its exact gradient with respect to every parameter."""
    if cache is None:
        Y, cache = forward(model, _as3d(inputs), return_cache=True)
    else:
        Y = cache.get("Y")
        if Y is None:
            Y = cache["hs"] @ model.Wy.T + model.by
    T = _as3d(np.asarray(targets, dtype=float)) if np.ndim(targets) == 2 else np.asarray(targets, dtype=float)
    M = np.asarray(mask, dtype=float)
    M = M[None] if M.ndim == 1 else M
    X, hs, cs, gates = cache["X"], cache["hs"], cache["cs"], cache["gates"]
    N, L, D = X.shape
    H = model.hidden_width

    dY = 2.0 * (Y - T) * M[..., None]
    value = 0.25 * float(np.sum(dY * dY))
    dWy = np.einsum("nlk,nlh->kh", dY, hs)
    dby = dY.sum(axis=(0, 1))
    dH = dY @ model.Wy

    Wh = model.W[:, D:]
    dZ = np.empty((N, L, 4 * H))
    dh_next = np.zeros((N, H))
    dc_next = np.zeros((N, H))
    zeros = np.zeros((N, H))
    for t in range(L - 1, -1, -1):
        i = gates[:, t, :H]
        f = gates[:, t, H:2 * H]
        o = gates[:, t, 2 * H:3 * H]
        g = gates[:, t, 3 * H:]
        c = cs[:, t]
        c_prev = cs[:, t - 1] if t else zeros
        tc = np.tanh(c)
        dh = dH[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = dZ[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = dz @ Wh

    flatZ = dZ.reshape(-1, 4 * H)
    h_prev = np.concatenate([np.zeros((N, 1, H)), hs[:, :-1]], axis=1).reshape(-1, H)
    dW = np.empty_like(model.W)
    dW[:, :D] = flatZ.T @ X.reshape(-1, D)
    dW[:, D:] = flatZ.T @ h_prev
    db = flatZ.sum(axis=0)
    return value, {"W": dW, "b": db, "Wy": dWy, "by": dby}


@dataclass
class TrainingConfig:
    omega: float | None = None
    learning_rate: float = 1e-3
    epochs: int = 30
    seed: int = 0
    patience: int = 5
    optimizer: str = "adam"
    batch_size: int = 32
    hidden_width: int = 64
    clip_norm: float | None = 5.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.omega is not None and self.omega < 0:
            raise ValueError("omega must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainingResult:
    model: LstmModel
    initial_cost: float
    final_cost: float = math.nan
    cost_curve: list[float] = field(default_factory=list)
    val_curve: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False


def mean_cost(model: LstmModel, samples: WindowBatch, batch_size: int = 256) -> float:
    total = 0.0
    for s in range(0, len(samples), batch_size):
        part = samples[np.arange(s, min(s + batch_size, len(samples)))]
        total += loss(forward(model, part.inputs), part.targets, part.mask)
    return total / len(samples)


class _Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainingConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] *= cfg.beta1
            self.m[k] += (1.0 - cfg.beta1) * g
            self.v[k] *= cfg.beta2
            self.v[k] += (1.0 - cfg.beta2) * g * g
            params[k] -= cfg.learning_rate * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + cfg.eps)


class _SGD:
    def __init__(self, params, cfg: TrainingConfig):
        self.cfg = cfg

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.cfg.learning_rate * g


def train(
    model: LstmModel,
    samples: WindowBatch,
    config: TrainingConfig,
    validate: Callable[[LstmModel], float | tuple] | None = None,
) -> TrainingResult:
    """Minibatch training over shuffled windows.

    Each update uses the batch-mean gradient. With ``validate`` the model is
    scored after every epoch (higher is better; a tuple is compared
    lexicographically and its first entry is logged as the validation
    curve); training stops after ``patience`` epochs without improvement
    and the best-scoring parameters are returned. Without it the
    parameters with the lowest epoch cost are returned, so the final cost
    never exceeds the initial cost.
    """
    if len(samples) == 0:
        raise ValueError("no training samples")
    model = model.copy()
    if config.omega is not None:
        model.omega = config.omega
    rng = np.random.default_rng(config.seed)
    params = model.params()
    opt = (_Adam if config.optimizer == "adam" else _SGD)(params, config)
    initial = mean_cost(model, samples)
    result = TrainingResult(model, initial)
    best_params = {k: v.copy() for k, v in params.items()}
    best = -initial if validate is None else None
    stale = 0
    n = len(samples)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            batch = samples[idx]
            value, grads = backward(model, batch.inputs, batch.targets, batch.mask)
            total += value
            scale = 1.0 / len(idx)
            for g in grads.values():
                g *= scale
            if config.clip_norm is not None:
                norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                if norm > config.clip_norm:
                    for g in grads.values():
                        g *= config.clip_norm / norm
            opt.step(params, grads)
        cost = total / n
        if not math.isfinite(cost) or not all(np.all(np.isfinite(p)) for p in params.values()):
            raise TrainingDiverged(f"non-finite cost at epoch {epoch}")
        result.cost_curve.append(cost)
        if validate is not None:
            score = validate(model)
            head = score[0] if isinstance(score, tuple) else score
            result.val_curve.append(head)
            log.info("epoch %d cost %.5f val %.4f", epoch, cost, head)
        else:
            # running cost mixes parameter states; rank epochs by the exact cost
            score = -mean_cost(model, samples)
            log.info("epoch %d cost %.5f", epoch, -score)
        if best is None or score > best:
            best = score
            best_params = {k: v.copy() for k, v in params.items()}
            result.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if validate is not None and stale >= config.patience:
                result.stopped_early = True
                break
    for k, v in best_params.items():
        params[k][...] = v
    result.final_cost = initial if result.best_epoch == 0 else mean_cost(model, samples)
    return result
