"""Population coding: Gaussian receptive-field encoding and firing-rate decoding.

Each observation dimension is represented by a population of neurons with
Gaussian tuning curves.  An observation first becomes a per-neuron stimulation
strength in (0, 1]; spikes are then generated either deterministically (one-step
soft-reset integrate-and-fire accumulation of the stimulation) or
probabilistically (Bernoulli draws at the stimulation rate).  Actions are read
out as an affine map of output-population firing rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

DEFAULT_EPSILON = 1e-3
DETERMINISTIC = "deterministic"
PROBABILISTIC = "probabilistic"
ENCODER_MODES = (DETERMINISTIC, PROBABILISTIC)

# Trainable receptive-field widths never shrink below this floor.
SIGMA_FLOOR = 1e-3


@dataclass
class EncoderParams:
    """Gaussian receptive fields, one population per observation dimension."""

    means: np.ndarray  # (n_obs, pop_size)
    stddevs: np.ndarray  # (n_obs, pop_size), strictly positive
    epsilon: float = DEFAULT_EPSILON
    mode: str = DETERMINISTIC

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stddevs = np.asarray(self.stddevs, dtype=np.float64)
        if self.means.ndim != 2 or self.means.shape != self.stddevs.shape:
            raise ConfigurationError("means and stddevs must share shape (n_obs, pop)")
        if not np.all(self.stddevs > 0):
            raise ConfigurationError("receptive-field stddevs must be positive")
        if not 0.0 < self.epsilon < 0.1:
            raise ConfigurationError("epsilon must lie in (0, 0.1)")
        if self.mode not in ENCODER_MODES:
            raise ConfigurationError(f"unknown encoder mode {self.mode!r}")

    @property
    def n_obs(self) -> int:
        return self.means.shape[0]

    @property
    def pop_size(self) -> int:
        return self.means.shape[1]

    @property
    def n_neurons(self) -> int:
        return self.means.size


@dataclass
class DecoderParams:
    """Affine readout: one weight vector and bias per action dimension."""

    weights: np.ndarray  # (n_act, pop_size)
    biases: np.ndarray  # (n_act,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ConfigurationError("decoder weights must be (n_act, pop)")
        if self.biases.shape != (self.weights.shape[0],):
            raise ConfigurationError("decoder bias count must equal action dims")

    @property
    def n_act(self) -> int:
        return self.weights.shape[0]

    @property
    def pop_size(self) -> int:
        return self.weights.shape[1]


def init_encoder(
    obs_ranges,
    pop_size: int,
    overlap: float = 1.0,
    epsilon: float = DEFAULT_EPSILON,
    mode: str = DETERMINISTIC,
) -> EncoderParams:
    """Evenly spaced means over each (low, high) range, inclusive of endpoints.

    Widths are the mean spacing times ``overlap`` so adjacent receptive fields
    cross at exp(-1/2) by default and the whole range stays active.
    """
    if pop_size < 2:
        raise ConfigurationError("population size must be at least 2")
    means = []
    stddevs = []
    for low, high in obs_ranges:
        if not low < high:
            raise ConfigurationError(f"invalid observation range ({low}, {high})")
        spacing = (high - low) / (pop_size - 1)
        means.append(np.linspace(low, high, pop_size))
        stddevs.append(np.full(pop_size, spacing * overlap))
    return EncoderParams(
        means=np.stack(means),
        stddevs=np.stack(stddevs),
        epsilon=epsilon,
        mode=mode,
    )


def init_decoder(n_act: int, pop_size: int, rng: np.random.Generator) -> DecoderParams:
    bound = 1.0 / np.sqrt(pop_size)
    return DecoderParams(
        weights=rng.uniform(-bound, bound, size=(n_act, pop_size)),
        biases=rng.uniform(-bound, bound, size=n_act),
    )


def compute_stimulation(obs: np.ndarray, enc: EncoderParams) -> np.ndarray:
    """Gaussian response exp(-((s - mu) / sigma)^2 / 2), in (0, 1].

    ``obs`` is (..., n_obs); the result is (..., n_obs, pop_size).
    """
    obs = np.asarray(obs, dtype=np.float64)
    if not np.all(np.isfinite(obs)):
        raise InputError("observation contains non-finite values")
    if obs.shape[-1] != enc.n_obs:
        raise ConfigurationError(
            f"encoder expects {enc.n_obs} observation dims, got {obs.shape[-1]}"
        )
    z = (obs[..., None] - enc.means) / enc.stddevs
    return np.exp(-0.5 * z * z)


def encode_deterministic(
    stimulation: np.ndarray, n_steps: int, epsilon: float = DEFAULT_EPSILON
) -> np.ndarray:
    """One-step soft-reset IF spike generation.

    Each neuron accumulates its stimulation every step and spikes when the
    accumulator strictly exceeds 1 - epsilon, subtracting 1 - epsilon on the
    spike.  Returns a binary array of shape (n_steps,) + stimulation.shape.
    """
    if n_steps < 1:
        raise ConfigurationError("encoding needs at least one timestep")
    stimulation = np.asarray(stimulation, dtype=np.float64)
    threshold = 1.0 - epsilon
    voltage = np.zeros_like(stimulation)
    spikes = np.empty((n_steps,) + stimulation.shape)
    for t in range(n_steps):
        voltage = voltage + stimulation
        fired = (voltage > threshold).astype(np.float64)
        voltage = voltage - fired * threshold
        spikes[t] = fired
    return spikes


def encode_probabilistic(
    stimulation: np.ndarray, n_steps: int, rng: np.random.Generator
) -> np.ndarray:
    """Independent Bernoulli spikes at the stimulation rate, one draw per step."""
    if n_steps < 1:
        raise ConfigurationError("encoding needs at least one timestep")
    stimulation = np.asarray(stimulation, dtype=np.float64)
    draws = rng.random((n_steps,) + stimulation.shape)
    return (draws < stimulation).astype(np.float64)


def firing_rates(out_spikes: np.ndarray, n_act: int, pop_size: int) -> np.ndarray:
    """Spike counts over the window divided by its length, per output neuron.

    ``out_spikes`` is (T, ..., n_act * pop_size); returns (..., n_act, pop_size).
    """
    n_steps = out_spikes.shape[0]
    counts = out_spikes.sum(axis=0)
    return counts.reshape(counts.shape[:-1] + (n_act, pop_size)) / n_steps


def decode(out_spikes: np.ndarray, dec: DecoderParams) -> np.ndarray:
    """Action vector from output-population spike trains.

    a_i = W_i . fr_i + b_i where fr_i are the firing rates of population i.
    """
    rates = firing_rates(out_spikes, dec.n_act, dec.pop_size)
    return decode_rates(rates, dec)


def decode_rates(rates: np.ndarray, dec: DecoderParams) -> np.ndarray:
    """Affine readout of firing rates shaped (..., n_act, pop_size)."""
    return np.einsum("...ap,ap->...a", rates, dec.weights) + dec.biases


def spike_count_encoding(
    observations: np.ndarray, enc: EncoderParams, n_steps: int
) -> np.ndarray:
    """Deterministic spike-count vectors for a batch of observations.

    Used to measure how well an encoder separates observations: the per-neuron
    spike counts over the window, flattened to (batch, n_obs * pop_size).
    """
    stim = compute_stimulation(observations, enc)
    flat = stim.reshape(stim.shape[:-2] + (-1,))
    spikes = encode_deterministic(flat, n_steps, enc.epsilon)
    return spikes.sum(axis=0)


def mean_pairwise_distance(encodings: np.ndarray) -> float:
    """Mean L2 distance between all distinct rows of ``encodings``."""
    n = encodings.shape[0]
    if n < 2:
        raise ConfigurationError("need at least two encodings to compare")
    sq = np.sum((encodings[:, None, :] - encodings[None, :, :]) ** 2, axis=-1)
    dist = np.sqrt(sq)
    iu = np.triu_indices(n, k=1)
    return float(dist[iu].mean())
