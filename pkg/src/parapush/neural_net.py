"""Feed-forward network for one-step slider dynamics, trained from scratch.

The network maps [state vector, action velocity] to the change in the slider
sub-state.  Training minimizes squared prediction error plus a weighted
no-penetration penalty on the predicted slider positions (slider-slider and
pusher-slider), with gradients accumulated by reverse mode through both
terms.  Everything is float64 numpy; no autograd framework.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .core import PUSHER_DIM, SLIDER_DIM, SceneConfig

log = logging.getLogger(__name__)

ACTION_DIM = 2
DEFAULT_HIDDEN = (512, 256, 128, 64)
ADAM_BETA1, ADAM_BETA2, ADAM_EPS = 0.9, 0.999, 1e-8

# training and dataset samples are single-duration; the action interval is
# fixed at 1 s and is not a network input
SAMPLE_DT = 1.0


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True, slots=True)
class Sample:
    """One transition: flat state, action velocity, flat next state."""

    state: np.ndarray
    action: np.ndarray
    next_state_fine: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=np.float64))
        object.__setattr__(self, "action", np.asarray(self.action, dtype=np.float64))
        object.__setattr__(self, "next_state_fine",
                           np.asarray(self.next_state_fine, dtype=np.float64))
        if self.action.shape != (ACTION_DIM,):
            raise ValueError("action must be a 2-vector")
        if self.state.shape != self.next_state_fine.shape:
            raise ValueError("state and next state dimensions differ")


@dataclass(frozen=True, slots=True)
class TrainConfig:
    learning_rate: float = 5e-4
    epochs: int = 100
    batch_size: int = 1024
    penetration_weight: float = 10.0
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.epochs, self.batch_size) <= 0:
            raise ValueError("learning rate, epochs and batch size must be positive")
        if self.penetration_weight <= 0:
            raise ValueError("penetration weight must be positive")


@dataclass(slots=True)
class Layer:
    weights: np.ndarray        # (out, in)
    bias: np.ndarray           # (out,)
    activation: str            # "relu" | "linear"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.activation not in ("relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("layer shape mismatch")


@dataclass(slots=True)
class NetworkModel:
    """Layer stack plus the input/output normalization constants."""

    layers: list[Layer]
    input_dim: int
    output_dim: int
    input_shift: np.ndarray = field(default=None)
    input_scale: np.ndarray = field(default=None)
    output_shift: np.ndarray = field(default=None)
    output_scale: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.input_shift is None:
            self.input_shift = np.zeros(self.input_dim)
        if self.input_scale is None:
            self.input_scale = np.ones(self.input_dim)
        if self.output_shift is None:
            self.output_shift = np.zeros(self.output_dim)
        if self.output_scale is None:
            self.output_scale = np.ones(self.output_dim)
        for name in ("input_shift", "input_scale", "output_shift", "output_scale"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        dims = [self.input_dim] + [layer.weights.shape[0] for layer in self.layers]
        for layer, d_in in zip(self.layers, dims):
            if layer.weights.shape[1] != d_in:
                raise ValueError("consecutive layer dimensions do not chain")
        if dims[-1] != self.output_dim:
            raise ValueError("last layer width must equal output_dim")
        if self.layers and self.layers[-1].activation != "linear":
            raise ValueError("output layer must be linear")


def init_network(input_dim: int, output_dim: int, rng: np.random.Generator,
                 hidden: tuple[int, ...] = DEFAULT_HIDDEN) -> NetworkModel:
    """He-style uniform fan-in initialization, zero biases."""
    sizes = [input_dim, *hidden, output_dim]
    layers = []
    for k in range(len(sizes) - 1):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        limit = np.sqrt(6.0 / fan_in)
        layers.append(Layer(
            weights=rng.uniform(-limit, limit, size=(fan_out, fan_in)),
            bias=np.zeros(fan_out),
            activation="linear" if k == len(sizes) - 2 else "relu",
        ))
    return NetworkModel(layers=layers, input_dim=input_dim, output_dim=output_dim)


def _forward_batch(m: NetworkModel, x: np.ndarray):
    """Batched forward returning denormalized output and per-layer caches."""
    z = (x - m.input_shift) / m.input_scale
    pre_acts, posts = [], [z]
    for layer in m.layers:
        a = z @ layer.weights.T + layer.bias
        pre_acts.append(a)
        z = np.maximum(a, 0.0) if layer.activation == "relu" else a
        posts.append(z)
    return z * m.output_scale + m.output_shift, pre_acts, posts


def forward(m: NetworkModel, x: np.ndarray) -> np.ndarray:
    """Single forward pass: normalize, affine+activation chain, denormalize."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (m.input_dim,):
        raise ValueError(f"expected input of length {m.input_dim}, got shape {x.shape}")
    out, _, _ = _forward_batch(m, x[None, :])
    return out[0]


def _backward_batch(m: NetworkModel, d_out: np.ndarray, pre_acts, posts):
    """Reverse-mode pass from d(loss)/d(denormalized output)."""
    delta = d_out * m.output_scale
    grads = [None] * len(m.layers)
    for k in range(len(m.layers) - 1, -1, -1):
        layer = m.layers[k]
        if layer.activation == "relu":
            delta = delta * (pre_acts[k] > 0.0)
        grads[k] = (delta.T @ posts[k], delta.sum(axis=0))
        if k > 0:
            delta = delta @ layer.weights
    return grads


def _penalty_terms(pred_next: np.ndarray, pusher_next: np.ndarray,
                   cfg: SceneConfig, weight: float):
    """No-penetration penalty and its gradient w.r.t. the predicted 6n-vector.

    ``pred_next`` holds predicted next slider sub-states (B, 6n);
    ``pusher_next`` the kinematic next pusher positions (B, 2).
    """
    batch = pred_next.shape[0]
    n = cfg.num_sliders
    pos = pred_next.reshape(batch, n, SLIDER_DIM)[:, :, 0:2]
    grad_pos = np.zeros_like(pos)
    total = 0.0

    for i in range(n):
        for j in range(i + 1, n):
            diff = pos[:, i, :] - pos[:, j, :]
            dist = np.linalg.norm(diff, axis=1)
            gap = dist - (cfg.slider_radii[i] + cfg.slider_radii[j])
            active = gap < 0.0
            if not active.any():
                continue
            total += weight * float(np.sum(gap[active] ** 2))
            coef = 2.0 * weight * gap / np.maximum(dist, 1e-12)
            g = (coef * active)[:, None] * diff
            grad_pos[:, i, :] += g
            grad_pos[:, j, :] -= g

    for i in range(n):
        diff = pusher_next - pos[:, i, :]
        dist = np.linalg.norm(diff, axis=1)
        gap = dist - (cfg.pusher_radius + cfg.slider_radii[i])
        active = gap < 0.0
        if not active.any():
            continue
        total += weight * float(np.sum(gap[active] ** 2))
        coef = 2.0 * weight * gap / np.maximum(dist, 1e-12)
        grad_pos[:, i, :] -= (coef * active)[:, None] * diff

    grad_flat = np.zeros_like(pred_next)
    grad_flat.reshape(batch, n, SLIDER_DIM)[:, :, 0:2] = grad_pos
    return total, grad_flat


def _loss_and_grad_arrays(m: NetworkModel, x: np.ndarray, cur: np.ndarray,
                          target: np.ndarray, pusher_next: np.ndarray,
                          cfg: SceneConfig, weight: float):
    """Loss and parameter gradients on pre-assembled arrays.

    x: (B, input_dim) network inputs; cur/target: (B, 6n) current and fine
    next slider sub-states; pusher_next: (B, 2) kinematic pusher positions.
    """
    batch = x.shape[0]
    delta_pred, pre_acts, posts = _forward_batch(m, x)
    pred_next = cur + delta_pred

    err = pred_next - target
    mse = float(np.sum(err * err))
    pen, pen_grad = _penalty_terms(pred_next, pusher_next, cfg, weight)

    loss = (mse + pen) / batch
    d_pred = (2.0 * err + pen_grad) / batch
    grads = _backward_batch(m, d_pred, pre_acts, posts)
    return loss, grads


def _assemble(batch: list[Sample], cfg: SceneConfig):
    states = np.stack([s.state for s in batch])
    actions = np.stack([s.action for s in batch])
    nexts = np.stack([s.next_state_fine for s in batch])
    if states.shape[1] != cfg.state_dim:
        raise ValueError(f"sample state dim {states.shape[1]} does not match "
                         f"scene dim {cfg.state_dim}")
    x = np.hstack([states, actions])
    pusher_next = states[:, 0:2] + actions * SAMPLE_DT
    return x, states[:, PUSHER_DIM:], nexts[:, PUSHER_DIM:], pusher_next


def loss_and_gradient(m: NetworkModel, batch: list[Sample], cfg: SceneConfig,
                      tc: TrainConfig):
    """Batch-averaged loss (squared error + penetration penalties) and the
    gradient for every layer, as a list of (dW, db) pairs."""
    if not batch:
        raise ValueError("empty batch")
    x, cur, target, pusher_next = _assemble(batch, cfg)
    if x.shape[1] != m.input_dim:
        raise ValueError(f"network expects input dim {m.input_dim}, got {x.shape[1]}")
    return _loss_and_grad_arrays(m, x, cur, target, pusher_next, cfg,
                                 tc.penetration_weight)


def _normalization(x: np.ndarray, y: np.ndarray):
    in_shift = x.mean(axis=0)
    in_scale = x.std(axis=0)
    in_scale[in_scale < 1e-8] = 1.0
    out_shift = y.mean(axis=0)
    out_scale = y.std(axis=0)
    # constant output dimensions (e.g. parked sliders) collapse to ~zero
    # predictions instead of amplifying raw network noise
    out_scale[out_scale < 1e-8] = 1e-8
    return in_shift, in_scale, out_shift, out_scale


def train(dataset: list[Sample], tc: TrainConfig, cfg: SceneConfig,
          hidden: tuple[int, ...] = DEFAULT_HIDDEN):
    """Mini-batch Adam on the penalized loss; deterministic per rng_seed.

    Returns (model, per-epoch mean training loss).
    """
    if not dataset:
        raise ValueError("empty dataset")
    rng = np.random.default_rng(tc.rng_seed)
    x, cur, target, pusher_next = _assemble(dataset, cfg)
    y = target - cur

    model = init_network(x.shape[1], y.shape[1], rng, hidden)
    (model.input_shift, model.input_scale,
     model.output_shift, model.output_scale) = _normalization(x, y)

    adam_m = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers]
    adam_v = [(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in model.layers]
    t = 0
    n = x.shape[0]
    losses = []
    for epoch in range(tc.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, tc.batch_size):
            idx = order[lo:lo + tc.batch_size]
            loss, grads = _loss_and_grad_arrays(
                model, x[idx], cur[idx], target[idx], pusher_next[idx],
                cfg, tc.penetration_weight)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {lo // tc.batch_size} "
                    f"(lr={tc.learning_rate}, batch_size={tc.batch_size})")
            epoch_loss += loss * len(idx)
            t += 1
            bias1 = 1.0 - ADAM_BETA1 ** t
            bias2 = 1.0 - ADAM_BETA2 ** t
            for layer, (mw, mb), (vw, vb), (gw, gb) in zip(
                    model.layers, adam_m, adam_v, grads):
                mw *= ADAM_BETA1; mw += (1 - ADAM_BETA1) * gw
                mb *= ADAM_BETA1; mb += (1 - ADAM_BETA1) * gb
                vw *= ADAM_BETA2; vw += (1 - ADAM_BETA2) * gw * gw
                vb *= ADAM_BETA2; vb += (1 - ADAM_BETA2) * gb * gb
                layer.weights -= tc.learning_rate * (mw / bias1) / (np.sqrt(vw / bias2) + ADAM_EPS)
                layer.bias -= tc.learning_rate * (mb / bias1) / (np.sqrt(vb / bias2) + ADAM_EPS)
        losses.append(epoch_loss / n)
    if not loss_trend_ok(losses):
        log.warning("training loss trend is not decreasing; run flagged")
    return model, losses


def loss_trend_ok(losses: list[float], window: int = 5) -> bool:
    """True when the median-filtered loss curve trends downward overall."""
    if len(losses) < 2 * window:
        return True
    arr = np.asarray(losses)
    filt = np.array([np.median(arr[max(0, i - window // 2):i + window // 2 + 1])
                     for i in range(len(arr))])
    k = max(1, len(filt) // 10)
    return float(np.median(filt[-k:])) <= float(np.median(filt[:k]))


def save_model(path, m: NetworkModel, metadata: dict | None = None) -> None:
    """Write the weight-file JSON; numbers keep full round-trip precision."""
    doc = {
        "input_dim": m.input_dim,
        "output_dim": m.output_dim,
        "normalization": {
            "input_shift": m.input_shift.tolist(),
            "input_scale": m.input_scale.tolist(),
            "output_shift": m.output_shift.tolist(),
            "output_scale": m.output_scale.tolist(),
        },
        "layers": [
            {
                "rows": int(l.weights.shape[0]),
                "cols": int(l.weights.shape[1]),
                "weights": l.weights.reshape(-1).tolist(),
                "bias": l.bias.tolist(),
                "activation": l.activation,
            }
            for l in m.layers
        ],
    }
    if metadata is not None:
        doc["metadata"] = metadata
    with open(path, "w") as f:
        json.dump(doc, f)


def load_model(path) -> NetworkModel:
    with open(path) as f:
        doc = json.load(f)
    layers = [
        Layer(
            weights=np.asarray(spec["weights"], dtype=np.float64).reshape(
                spec["rows"], spec["cols"]),
            bias=np.asarray(spec["bias"], dtype=np.float64),
            activation=spec["activation"],
        )
        for spec in doc["layers"]
    ]
    norm = doc["normalization"]
    return NetworkModel(
        layers=layers,
        input_dim=int(doc["input_dim"]),
        output_dim=int(doc["output_dim"]),
        input_shift=np.asarray(norm["input_shift"]),
        input_scale=np.asarray(norm["input_scale"]),
        output_shift=np.asarray(norm["output_shift"]),
        output_scale=np.asarray(norm["output_scale"]),
    )
