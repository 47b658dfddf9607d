"""The full population-coded spiking network: encoder, LIF layers, decoder.

Forward inference runs the encoder for T timesteps, drives the LIF stack from
zero state, and decodes output-population firing rates into an action.  The
returned trace carries everything :mod:`popspike.gradients` needs for the
closed-form backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import popcode
from .errors import ConfigurationError
from .lif import LifLayerParams, SnnTrace, init_lif_layer, snn_forward
from .popcode import DecoderParams, EncoderParams


@dataclass
class PopSpikeParams:
    """All trainable tensors of the spiking actor."""

    encoder: EncoderParams
    layers: list[LifLayerParams]
    decoder: DecoderParams

    def __post_init__(self):
        if not self.layers:
            raise ConfigurationError("network needs at least one LIF layer")
        if self.layers[0].n_in != self.encoder.n_neurons:
            raise ConfigurationError(
                f"first layer expects {self.layers[0].n_in} inputs but the "
                f"encoder provides {self.encoder.n_neurons} neurons"
            )
        out_width = self.decoder.n_act * self.decoder.pop_size
        if self.layers[-1].n_out != out_width:
            raise ConfigurationError(
                f"last layer has {self.layers[-1].n_out} neurons but the "
                f"decoder expects {out_width}"
            )

    @property
    def n_obs(self) -> int:
        return self.encoder.n_obs

    @property
    def n_act(self) -> int:
        return self.decoder.n_act

    def tensor_dict(self) -> dict[str, np.ndarray]:
        """Named views of every trainable array (shared storage, not copies)."""
        tensors = {"enc.mean": self.encoder.means, "enc.std": self.encoder.stddevs}
        for k, layer in enumerate(self.layers):
            tensors[f"snn.{k}.w"] = layer.weights
            tensors[f"snn.{k}.b"] = layer.biases
        tensors["dec.w"] = self.decoder.weights
        tensors["dec.b"] = self.decoder.biases
        return tensors


def init_popspike(
    obs_ranges,
    n_act: int,
    hidden: tuple[int, ...],
    rng: np.random.Generator,
    pop_in: int = 10,
    pop_out: int = 10,
    encoder_mode: str = popcode.DETERMINISTIC,
    epsilon: float = popcode.DEFAULT_EPSILON,
    current_decay: float = 0.5,
    voltage_decay: float = 0.75,
    threshold: float = 0.5,
) -> PopSpikeParams:
    """Build a randomly initialized network for the given task geometry."""
    encoder = popcode.init_encoder(
        obs_ranges, pop_in, epsilon=epsilon, mode=encoder_mode
    )
    widths = [encoder.n_neurons, *hidden, n_act * pop_out]
    layers = [
        init_lif_layer(
            widths[i],
            widths[i + 1],
            rng,
            current_decay=current_decay,
            voltage_decay=voltage_decay,
            threshold=threshold,
        )
        for i in range(len(widths) - 1)
    ]
    decoder = popcode.init_decoder(n_act, pop_out, rng)
    return PopSpikeParams(encoder=encoder, layers=layers, decoder=decoder)


@dataclass
class NetworkTrace:
    """Forward record: observation, stimulation, SNN trace, rates and action."""

    observation: np.ndarray  # (..., n_obs)
    stimulation: np.ndarray  # (..., n_obs, pop_in)
    snn: SnnTrace
    rates: np.ndarray  # (..., n_act, pop_out)
    action: np.ndarray  # (..., n_act)

    @property
    def n_steps(self) -> int:
        return self.snn.n_steps


def popspike_forward(
    params: PopSpikeParams,
    obs: np.ndarray,
    n_steps: int,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, NetworkTrace]:
    """Alg.-style inference: encode, run the LIF stack, decode.

    ``obs`` is (..., n_obs); leading axes are treated as batch dimensions.
    Probabilistic encoding requires the caller to own and pass ``rng``.
    """
    if n_steps < 1:
        raise ConfigurationError("inference needs at least one timestep")
    obs = np.asarray(obs, dtype=np.float64)
    stim = popcode.compute_stimulation(obs, params.encoder)
    flat = stim.reshape(stim.shape[:-2] + (-1,))
    if params.encoder.mode == popcode.DETERMINISTIC:
        input_spikes = popcode.encode_deterministic(
            flat, n_steps, params.encoder.epsilon
        )
    else:
        if rng is None:
            raise ConfigurationError("probabilistic encoding needs a random stream")
        input_spikes = popcode.encode_probabilistic(flat, n_steps, rng)
    snn = snn_forward(params.layers, input_spikes)
    rates = popcode.firing_rates(
        snn.spikes[-1], params.decoder.n_act, params.decoder.pop_size
    )
    action = popcode.decode_rates(rates, params.decoder)
    return action, NetworkTrace(
        observation=obs, stimulation=stim, snn=snn, rates=rates, action=action
    )
