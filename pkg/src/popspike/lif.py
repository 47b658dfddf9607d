"""Current-based leaky integrate-and-fire layers and the multi-step forward pass.

Per timestep a layer integrates presynaptic spikes into a current, the current
into a membrane voltage, and emits a binary spike wherever the voltage strictly
exceeds the threshold.  Spiking hard-resets the membrane: the previous voltage
contributes nothing on the step after a spike.  Spikes reach the next layer
within the same timestep (the one-step-per-layer delay of the deployment
simulator lives in :mod:`popspike.deploy`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

DEFAULT_CURRENT_DECAY = 0.5
DEFAULT_VOLTAGE_DECAY = 0.75
DEFAULT_THRESHOLD = 0.5


@dataclass
class LifLayerParams:
    """Weights, biases and neuron constants of one fully connected LIF layer."""

    weights: np.ndarray  # (n_out, n_in)
    biases: np.ndarray  # (n_out,)
    current_decay: float = DEFAULT_CURRENT_DECAY
    voltage_decay: float = DEFAULT_VOLTAGE_DECAY
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ConfigurationError("layer weights must be a 2-d matrix")
        if self.biases.shape != (self.weights.shape[0],):
            raise ConfigurationError(
                f"bias shape {self.biases.shape} does not match "
                f"{self.weights.shape[0]} output neurons"
            )
        if not 0.0 <= self.current_decay <= 1.0:
            raise ConfigurationError("current_decay must lie in [0, 1]")
        if not 0.0 <= self.voltage_decay <= 1.0:
            raise ConfigurationError("voltage_decay must lie in [0, 1]")
        if not self.threshold > 0.0:
            raise ConfigurationError("threshold must be positive")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


def init_lif_layer(
    n_in: int,
    n_out: int,
    rng: np.random.Generator,
    current_decay: float = DEFAULT_CURRENT_DECAY,
    voltage_decay: float = DEFAULT_VOLTAGE_DECAY,
    threshold: float = DEFAULT_THRESHOLD,
) -> LifLayerParams:
    """Random layer with weights and biases uniform in +-1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(n_in)
    return LifLayerParams(
        weights=rng.uniform(-bound, bound, size=(n_out, n_in)),
        biases=rng.uniform(-bound, bound, size=n_out),
        current_decay=current_decay,
        voltage_decay=voltage_decay,
        threshold=threshold,
    )


@dataclass
class SnnState:
    """Per-layer current, voltage and spike vectors between two timesteps."""

    currents: list = field(default_factory=list)
    voltages: list = field(default_factory=list)
    spikes: list = field(default_factory=list)


def zero_state(layers: list[LifLayerParams], batch_shape: tuple = ()) -> SnnState:
    shapes = [batch_shape + (layer.n_out,) for layer in layers]
    return SnnState(
        currents=[np.zeros(s) for s in shapes],
        voltages=[np.zeros(s) for s in shapes],
        spikes=[np.zeros(s) for s in shapes],
    )


def reset_state(state: SnnState) -> SnnState:
    """Zero every current, voltage and spike vector in place."""
    for arrays in (state.currents, state.voltages, state.spikes):
        for a in arrays:
            a[...] = 0.0
    return state


def lif_layer_step(
    params: LifLayerParams,
    prev_current: np.ndarray,
    prev_voltage: np.ndarray,
    prev_spikes: np.ndarray,
    in_spikes: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One LIF update.

    current  = d_c * current' + W @ in_spikes + b
    voltage  = d_v * voltage' * (1 - spikes') + current      (hard reset)
    spikes   = 1 where voltage > threshold                   (strictly)

    Inputs may carry leading batch dimensions; the neuron axis is last.
    """
    if in_spikes.shape[-1] != params.n_in:
        raise ConfigurationError(
            f"expected {params.n_in} input spikes, got {in_spikes.shape[-1]}"
        )
    if prev_current.shape[-1] != params.n_out:
        raise ConfigurationError(
            f"expected state of width {params.n_out}, got {prev_current.shape[-1]}"
        )
    current = (
        params.current_decay * prev_current
        + in_spikes @ params.weights.T
        + params.biases
    )
    voltage = params.voltage_decay * prev_voltage * (1.0 - prev_spikes) + current
    spikes = (voltage > params.threshold).astype(np.float64)
    return current, voltage, spikes


@dataclass
class SnnTrace:
    """Everything recorded during a forward pass, enough to replay any step.

    All arrays have the timestep axis first: ``inputs`` is (T, ..., n_0) and
    each per-layer array is (T, ..., n_k).
    """

    inputs: np.ndarray
    currents: list[np.ndarray]
    voltages: list[np.ndarray]
    spikes: list[np.ndarray]

    @property
    def n_steps(self) -> int:
        return self.inputs.shape[0]

    def layer_inputs(self, k: int) -> np.ndarray:
        """Spike trains feeding layer ``k`` (0-indexed)."""
        return self.inputs if k == 0 else self.spikes[k - 1]


def snn_forward(layers: list[LifLayerParams], input_spikes: np.ndarray) -> SnnTrace:
    """Run all layers for T timesteps from zero state and record the full trace.

    ``input_spikes`` is (T, ..., n_0); the number of timesteps is its leading
    axis.  The result is a pure function of (layers, input_spikes).
    """
    input_spikes = np.asarray(input_spikes, dtype=np.float64)
    n_steps = input_spikes.shape[0]
    if n_steps < 1:
        raise ConfigurationError("forward pass needs at least one timestep")
    for k in range(1, len(layers)):
        if layers[k].n_in != layers[k - 1].n_out:
            raise ConfigurationError(
                f"layer {k} expects {layers[k].n_in} inputs but layer "
                f"{k - 1} has {layers[k - 1].n_out} neurons"
            )
    if layers and layers[0].n_in != input_spikes.shape[-1]:
        raise ConfigurationError(
            f"layer 0 expects {layers[0].n_in} inputs, got {input_spikes.shape[-1]}"
        )

    batch_shape = input_spikes.shape[1:-1]
    state = zero_state(layers, batch_shape)
    currents = [np.empty((n_steps,) + batch_shape + (l.n_out,)) for l in layers]
    voltages = [np.empty_like(c) for c in currents]
    spikes = [np.empty_like(c) for c in currents]

    for t in range(n_steps):
        feed = input_spikes[t]
        for k, layer in enumerate(layers):
            c, v, o = lif_layer_step(
                layer, state.currents[k], state.voltages[k], state.spikes[k], feed
            )
            state.currents[k], state.voltages[k], state.spikes[k] = c, v, o
            currents[k][t], voltages[k][t], spikes[k][t] = c, v, o
            feed = o

    return SnnTrace(
        inputs=input_spikes, currents=currents, voltages=voltages, spikes=spikes
    )
