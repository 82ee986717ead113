"""Small dense-network stack with exact backpropagation and SGD/Adam.

Weights are stored as ``(fan_in, fan_out)`` so a batch ``x`` of shape
``(batch, fan_in)`` maps through ``x @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("relu", "sigmoid", "identity")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError(f"bias {self.bias.shape} does not match weight {self.weight.shape}")


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "sigmoid":
        return expit(z)
    return z


def _activation_grad(z, a, grad, activation):
    if activation == "relu":
        return grad * (z > 0)
    if activation == "sigmoid":
        return grad * a * (1.0 - a)
    return grad


class Mlp:
    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise ValueError("an Mlp needs at least one layer")
        for prev, nxt in zip(layers[:-1], layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ValueError("adjacent layer dimensions do not match")
        self.layers = list(layers)

    @classmethod
    def build(
        cls,
        sizes: Sequence[int],
        rng: np.random.Generator | int,
        hidden_activation: str = "relu",
        output_activation: str = "identity",
    ) -> "Mlp":
        """Glorot-uniform weights and zero biases for layer widths ``sizes``."""
        rng = np.random.default_rng(rng)
        layers = []
        for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            act = output_activation if k == len(sizes) - 2 else hidden_activation
            layers.append(Layer(rng.uniform(-limit, limit, (fan_in, fan_out)), np.zeros(fan_out), act))
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim] + [layer.weight.shape[1] for layer in self.layers]

    @property
    def activations(self) -> list[str]:
        return [layer.activation for layer in self.layers]

    def parameters(self) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            params.extend((layer.weight, layer.bias))
        return params

    def copy(self) -> "Mlp":
        return Mlp([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def _as_batch(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise ValueError(f"expected input width {self.input_dim}, got shape {x.shape}")
        return batch, single

    def forward(self, x) -> np.ndarray:
        a, single = self._as_batch(x)
        for layer in self.layers:
            a = _activate(a @ layer.weight + layer.bias, layer.activation)
        return a[0] if single else a

    __call__ = forward

    def forward_cached(self, x):
        """Forward pass that also returns the per-layer (input, pre-activation, output) cache."""
        a, single = self._as_batch(x)
        cache = []
        for layer in self.layers:
            z = a @ layer.weight + layer.bias
            out = _activate(z, layer.activation)
            cache.append((a, z, out))
            a = out
        return (a[0] if single else a), (cache, single)

    def backward(self, cache, grad_out):
        """Reverse-mode gradients of ``sum(grad_out * output)``.

        Returns ``(grads, grad_input)`` where ``grads`` lists ``(dW, db)`` per
        layer, summed over the batch rows.
        """
        layers_cache, single = cache
        g = np.asarray(grad_out, dtype=np.float64)
        g = g[None, :] if single else g
        if g.shape != layers_cache[-1][2].shape:
            raise ValueError(f"loss gradient shape {g.shape} does not match output")
        grads = []
        for layer, (a_in, z, a_out) in zip(reversed(self.layers), reversed(layers_cache)):
            g = _activation_grad(z, a_out, g, layer.activation)
            grads.append((a_in.T @ g, g.sum(axis=0)))
            g = g @ layer.weight.T
        grads.reverse()
        return grads, (g[0] if single else g)

    def lipschitz_upper_bound(self) -> float:
        """Product of layer spectral norms times the activations' Lipschitz constants."""
        k = 1.0
        for layer in self.layers:
            k *= np.linalg.norm(layer.weight, 2)
            if layer.activation == "sigmoid":
                k *= 0.25
        return float(k)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError(f"expected {offset} parameters, got {flat.size}")


def forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def backward(net: Mlp, x, loss_grad):
    _, cache = net.forward_cached(x)
    grads, _ = net.backward(cache, loss_grad)
    return grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    iterations: int = 10_000
    batch_size: int = 32
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch_size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def replace(self, **changes) -> "TrainConfig":
        return TrainConfig(**{**asdict(self), **changes})


class Sgd:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam:
    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        # lr * (m/c1) / (sqrt(v/c2) + eps), rearranged to act on m and v directly
        step_size = self.learning_rate * np.sqrt(c2) / c1
        eps_hat = self.eps * np.sqrt(c2)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            tmp = np.multiply(g, g)
            tmp *= 1.0 - self.beta2
            v += tmp
            np.sqrt(v, out=tmp)
            tmp += eps_hat
            np.divide(m, tmp, out=tmp)
            tmp *= step_size
            p -= tmp


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return Sgd(cfg.learning_rate)
    return Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)


def flatten_grads(grads) -> list[np.ndarray]:
    out = []
    for dw, db in grads:
        out.extend((dw, db))
    return out


def apply_gradients(net: Mlp, grads, optimizer) -> None:
    flat = flatten_grads(grads)
    if not all(np.all(np.isfinite(g)) for g in flat):
        raise TrainingDivergedError("non-finite gradient")
    optimizer.step(net.parameters(), flat)
    if not net.all_finite():
        raise TrainingDivergedError("non-finite parameter after update")


def train_step(net: Mlp, inputs, loss_grads, optimizer) -> Mlp:
    """One update from the batch-averaged gradient.

    ``loss_grads`` holds d(loss)/d(output) for each input row.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    loss_grads = np.atleast_2d(np.asarray(loss_grads, dtype=np.float64))
    grads = backward(net, inputs, loss_grads)
    batch = inputs.shape[0]
    apply_gradients(net, [(dw / batch, db / batch) for dw, db in grads], optimizer)
    return net


def save_mlp(path, net: Mlp, meta: dict | None = None) -> None:
    """JSON header line followed by little-endian float64 parameters in layer order."""
    header = {"sizes": net.sizes, "activations": net.activations, "meta": meta or {}}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        fh.write(net.flat_parameters().astype("<f8").tobytes())


def load_mlp(path) -> tuple[Mlp, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        flat = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    sizes, acts = header["sizes"], header["activations"]
    layers = [
        Layer(np.zeros((a, b)), np.zeros(b), act) for a, b, act in zip(sizes[:-1], sizes[1:], acts)
    ]
    net = Mlp(layers)
    net.set_flat_parameters(flat)
    return net, header["meta"]

