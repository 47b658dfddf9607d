"""Dense feedforward networks with hand-written backprop, plus Adam.

These back the critics and the deep-actor baseline.  No autograd anywhere:
the forward pass records pre-activations and the backward pass applies the
chain rule explicitly.  The Adam optimizer and the soft target update used by
the off-policy learners also live here since every trainable module shares
them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # each (n_out, n_in)
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ConfigurationError("one weight, bias and activation per layer")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {act!r}")
        for k in range(1, len(self.weights)):
            if self.weights[k].shape[1] != self.weights[k - 1].shape[0]:
                raise ConfigurationError(f"layer {k} width mismatch")

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[1]

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[0]

    def tensor_dict(self) -> dict[str, np.ndarray]:
        tensors = {}
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            tensors[f"{k}.w"] = w
            tensors[f"{k}.b"] = b
        return tensors


def init_mlp(sizes, activations, rng: np.random.Generator) -> MlpParams:
    """Layers over consecutive ``sizes``, weights uniform in +-1/sqrt(fan_in)."""
    if len(activations) != len(sizes) - 1:
        raise ConfigurationError("need one activation per layer")
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
    return MlpParams(weights=weights, biases=biases, activations=list(activations))


@dataclass
class MlpTrace:
    inputs: list[np.ndarray]  # activation entering each layer; inputs[0] is x
    preacts: list[np.ndarray]


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return z


def _apply_prime(act: str, z: np.ndarray) -> np.ndarray:
    if act == "relu":
        # Subgradient 0 at exactly zero input.
        return (z > 0.0).astype(np.float64)
    if act == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpTrace]:
    """Returns the output and the trace needed by :func:`mlp_backward`.

    ``x`` is (..., n_in); leading axes are batch dimensions.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.n_in:
        raise ConfigurationError(
            f"network expects {params.n_in} inputs, got {x.shape[-1]}"
        )
    inputs, preacts = [x], []
    h = x
    for w, b, act in zip(params.weights, params.biases, params.activations):
        z = h @ w.T + b
        preacts.append(z)
        h = _apply(act, z)
        inputs.append(h)
    return h, MlpTrace(inputs=inputs[:-1], preacts=preacts)


@dataclass
class MlpGrads:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def tensor_dict(self) -> dict[str, np.ndarray]:
        tensors = {}
        for k, (w, b) in enumerate(zip(self.d_weights, self.d_biases)):
            tensors[f"{k}.w"] = w
            tensors[f"{k}.b"] = b
        return tensors


def mlp_backward(
    params: MlpParams, trace: MlpTrace, grad_y: np.ndarray
) -> tuple[MlpGrads, np.ndarray]:
    """Exact gradients of the smooth network; parameter grads sum over batch."""
    g = np.asarray(grad_y, dtype=np.float64)
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.weights)
    for k in range(len(params.weights) - 1, -1, -1):
        g = g * _apply_prime(params.activations[k], trace.preacts[k])
        d_weights[k] = np.einsum("...i,...j->ij", g, trace.inputs[k])
        d_biases[k] = np.einsum("...i->i", g)
        g = g @ params.weights[k]
    return MlpGrads(d_weights=d_weights, d_biases=d_biases), g


# ---------------------------------------------------------------------------
# Optimizer and target updates
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_init(tensors: dict[str, np.ndarray], lr: float, **kwargs) -> AdamState:
    state = AdamState(lr=lr, **kwargs)
    for name, t in tensors.items():
        state.m[name] = np.zeros_like(t)
        state.v[name] = np.zeros_like(t)
    return state


def adam_step(
    tensors: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    skip: frozenset[str] = frozenset(),
) -> None:
    """In-place bias-corrected Adam update; tensors in ``skip`` are frozen."""
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for name in sorted(grads):
        if name in skip:
            continue
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        tensors[name] -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def soft_update(
    target: dict[str, np.ndarray], online: dict[str, np.ndarray], tau: float
) -> None:
    """target <- (1 - tau) * target + tau * online, in place."""
    for name in target:
        t = target[name]
        t *= 1.0 - tau
        t += tau * online[name]
