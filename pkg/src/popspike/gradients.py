"""Closed-form backward pass for the population-coded spiking network.

Spikes are non-differentiable, so backpropagation substitutes a rectangular
pseudo-derivative: the voltage passes gradient only while it sits inside a
window around the threshold.  The hard-reset gate (1 - spike) is treated as a
constant of the forward pass, never differentiated.  Three stages compose the
full backward pass:

  decoder   adjoint of the affine readout down to firing rates,
  snn       reverse recursion over timesteps and layers,
  encoder   straight-through from input-spike adjoints to the Gaussian
            receptive-field parameters.

Two independent verifiers live here as well: an unrolled-graph oracle that
reverse-accumulates gradients edge by edge over the explicit computation
graph, and central finite differences for the smooth paths (decoder, and the
stimulation as a function of receptive-field parameters).  Finite differences
through the spiking nonlinearity are meaningless under a pseudo-derivative and
are refused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError, NonSmoothPathError, OracleSizeError
from .lif import SnnTrace
from .network import NetworkTrace, PopSpikeParams
from .popcode import DecoderParams, EncoderParams

# How the current adjoint picks up its voltage term.  SAME_STEP is the
# consistent indexing (voltage depends on the same step's current with unit
# coefficient).  NEXT_STEP takes the voltage adjoint from the following
# timestep instead; it is kept only so the unrolled-graph oracle can
# demonstrate that this alternative indexing is inconsistent.
SAME_STEP = "same_step"
NEXT_STEP = "next_step"

ORACLE_MAX_NEURONS = 64
ORACLE_MAX_STEPS = 10


@dataclass
class SurrogateConfig:
    """Rectangular pseudo-derivative: pass gradient while |v - v_th| < window."""

    window: float = 0.5

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("surrogate window must be positive")


def rect_surrogate(voltage: np.ndarray, threshold: float, window: float) -> np.ndarray:
    """1 where |voltage - threshold| < window, else 0 (strict at the edges)."""
    return (np.abs(voltage - threshold) < window).astype(np.float64)


@dataclass
class PopSpikeGrads:
    """Gradients mirroring :class:`PopSpikeParams` shape for shape."""

    d_means: np.ndarray
    d_stddevs: np.ndarray
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_dec_weights: np.ndarray
    d_dec_biases: np.ndarray

    def tensor_dict(self) -> dict[str, np.ndarray]:
        tensors = {"enc.mean": self.d_means, "enc.std": self.d_stddevs}
        for k, (w, b) in enumerate(zip(self.d_weights, self.d_biases)):
            tensors[f"snn.{k}.w"] = w
            tensors[f"snn.{k}.b"] = b
        tensors["dec.w"] = self.d_dec_weights
        tensors["dec.b"] = self.d_dec_biases
        return tensors


def backward_decoder(
    grad_action: np.ndarray, rates: np.ndarray, dec: DecoderParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain rule through a_i = W_i . fr_i + b_i.

    ``grad_action`` is (..., n_act) and ``rates`` (..., n_act, pop).  Parameter
    gradients are summed over any leading batch axes; the rate gradient keeps
    them.
    """
    grad_action = np.asarray(grad_action, dtype=np.float64)
    d_weights = np.einsum("...a,...ap->ap", grad_action, rates)
    d_biases = np.einsum("...a->a", grad_action)
    d_rates = grad_action[..., None] * dec.weights
    return d_weights, d_biases, d_rates


def backward_snn(
    trace: SnnTrace,
    grad_out_spikes: np.ndarray,
    layers,
    cfg: SurrogateConfig,
    current_grad: str = SAME_STEP,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Reverse recursion over timesteps, deepest layer first.

    ``grad_out_spikes`` holds the loss adjoint of the last layer's spikes per
    timestep, shape (T, ..., n_K).  Returns per-layer weight and bias
    gradients plus the adjoint of the input spike trains, (T, ..., n_0).

    Per layer, walking t = T..1 (no temporal terms at t = T):

      dv[t] = z(v[t]) * do[t] + d_v * (1 - o[t]) * dv[t+1]
      dc[t] = dv[t] + d_c * dc[t+1]
      do_prev[t] = W^T dc[t]

    and the parameter gradients collect every timestep:
      dW = sum_t outer(dc[t], o_prev[t]),   db = sum_t dc[t].
    """
    if current_grad not in (SAME_STEP, NEXT_STEP):
        raise ValueError(f"unknown current-gradient indexing {current_grad!r}")
    n_steps = trace.n_steps
    grad_out = np.asarray(grad_out_spikes, dtype=np.float64)
    if grad_out.shape != trace.spikes[-1].shape:
        raise InternalError(
            f"output-spike adjoint shape {grad_out.shape} does not match the "
            f"trace {trace.spikes[-1].shape}"
        )

    d_weights: list[np.ndarray] = [None] * len(layers)
    d_biases: list[np.ndarray] = [None] * len(layers)
    grad_spikes = grad_out

    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        voltages = trace.voltages[k]
        spikes = trace.spikes[k]
        in_spikes = trace.layer_inputs(k)
        d_w = np.zeros_like(layer.weights)
        d_b = np.zeros_like(layer.biases)
        grad_in = np.empty_like(in_spikes)
        dv_next = None
        dc_next = None
        for t in range(n_steps - 1, -1, -1):
            gate = rect_surrogate(voltages[t], layer.threshold, cfg.window)
            dv = gate * grad_spikes[t]
            if dv_next is not None:
                dv = dv + layer.voltage_decay * (1.0 - spikes[t]) * dv_next
            if current_grad == SAME_STEP:
                dc = dv if dc_next is None else dv + layer.current_decay * dc_next
            else:
                if dc_next is None:
                    dc = np.zeros_like(dv)
                else:
                    dc = dv_next + layer.current_decay * dc_next
            d_w += np.einsum("...i,...j->ij", dc, in_spikes[t])
            d_b += np.einsum("...i->i", dc)
            grad_in[t] = dc @ layer.weights
            dv_next, dc_next = dv, dc
        d_weights[k], d_biases[k] = d_w, d_b
        grad_spikes = grad_in

    return d_weights, d_biases, grad_spikes


def backward_encoder(
    grad_input_spikes: np.ndarray,
    stimulation: np.ndarray,
    obs: np.ndarray,
    enc: EncoderParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Straight-through to the stimulation, then analytic Gaussian factors.

    The spike generator passes its adjoint unchanged to the stimulation at
    every timestep, whether or not a spike occurred, so the stimulation
    adjoint is the sum over timesteps.  From there:

      d_mu    = dA * A * (s - mu) / sigma^2
      d_sigma = dA * A * (s - mu)^2 / sigma^3

    summed over any batch axes.
    """
    grad_stim_flat = np.asarray(grad_input_spikes, dtype=np.float64).sum(axis=0)
    grad_stim = grad_stim_flat.reshape(stimulation.shape)
    diff = obs[..., None] - enc.means
    common = grad_stim * stimulation
    d_means = np.einsum(
        "...np->np", common * diff / (enc.stddevs**2)
    )
    d_stddevs = np.einsum(
        "...np->np", common * diff**2 / (enc.stddevs**3)
    )
    return d_means, d_stddevs


def popspike_backward(
    grad_action: np.ndarray,
    trace: NetworkTrace,
    params: PopSpikeParams,
    cfg: SurrogateConfig,
    current_grad: str = SAME_STEP,
) -> PopSpikeGrads:
    """Full backward pass from an action adjoint to every parameter gradient.

    The firing-rate adjoint divides by T on the way to the spike counts, and
    the count adjoint is replicated to every timestep's output spikes.
    Parameter gradients are summed over any batch axes of ``grad_action``.
    """
    n_steps = trace.n_steps
    d_dec_w, d_dec_b, d_rates = backward_decoder(grad_action, trace.rates, params.decoder)
    d_counts = d_rates / n_steps
    flat = d_counts.reshape(d_counts.shape[:-2] + (-1,))
    grad_out_spikes = np.broadcast_to(flat, (n_steps,) + flat.shape)
    d_w, d_b, grad_inputs = backward_snn(
        trace.snn, grad_out_spikes, params.layers, cfg, current_grad=current_grad
    )
    d_means, d_stddevs = backward_encoder(
        grad_inputs, trace.stimulation, trace.observation, params.encoder
    )
    return PopSpikeGrads(
        d_means=d_means,
        d_stddevs=d_stddevs,
        d_weights=d_w,
        d_biases=d_b,
        d_dec_weights=d_dec_w,
        d_dec_biases=d_dec_b,
    )


# ---------------------------------------------------------------------------
# Unrolled-graph oracle
# ---------------------------------------------------------------------------


def unrolled_graph_backward(
    params: PopSpikeParams,
    input_spikes: np.ndarray,
    obs: np.ndarray,
    grad_action: np.ndarray,
    cfg: SurrogateConfig,
) -> PopSpikeGrads:
    """Reverse accumulation over the explicit, fully unrolled scalar graph.

    Rebuilds the forward computation node by node from (params, input spikes)
    and walks the recorded edges backwards, substituting the rectangular
    pseudo-derivative for the spike step and leaving the reset gate constant.
    Shares no code with the closed-form recursion; small instances only.
    """
    input_spikes = np.asarray(input_spikes, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    grad_action = np.asarray(grad_action, dtype=np.float64)
    if input_spikes.ndim != 2:
        raise OracleSizeError("oracle handles single unbatched instances only")
    n_steps = input_spikes.shape[0]
    total_neurons = sum(layer.n_out for layer in params.layers)
    if total_neurons > ORACLE_MAX_NEURONS or n_steps > ORACLE_MAX_STEPS:
        raise OracleSizeError(
            f"instance too large for the unrolled oracle "
            f"({total_neurons} neurons, {n_steps} steps)"
        )

    values: list[float] = []
    edges: list[list[tuple[int, float]]] = []

    def node(value: float, parents: list[tuple[int, float]]) -> int:
        values.append(value)
        edges.append(parents)
        return len(values) - 1

    layers = params.layers
    n_in0 = layers[0].n_in
    # Input spikes are leaf nodes so their adjoints can be collected.
    x_ids = [[node(input_spikes[t, j], []) for j in range(n_in0)] for t in range(n_steps)]

    c_ids: list[list[list[int]]] = []
    v_ids: list[list[list[int]]] = []
    o_ids: list[list[list[int]]] = []
    c_records: list[tuple[int, int, int, int]] = []  # (node, t, k, j)
    for t in range(n_steps):
        c_ids.append([])
        v_ids.append([])
        o_ids.append([])
        for k, layer in enumerate(layers):
            in_ids = x_ids[t] if k == 0 else o_ids[t][k - 1]
            c_row, v_row, o_row = [], [], []
            for j in range(layer.n_out):
                parents = [(in_ids[i], layer.weights[j, i]) for i in range(layer.n_in)]
                value = layer.biases[j] + sum(
                    layer.weights[j, i] * values[in_ids[i]] for i in range(layer.n_in)
                )
                if t > 0:
                    parents.append((c_ids[t - 1][k][j], layer.current_decay))
                    value += layer.current_decay * values[c_ids[t - 1][k][j]]
                cj = node(value, parents)
                c_records.append((cj, t, k, j))
                c_row.append(cj)

                v_parents = [(cj, 1.0)]
                v_value = values[cj]
                if t > 0:
                    # Reset gate (1 - previous spike) is a forward constant.
                    gate = layer.voltage_decay * (1.0 - values[o_ids[t - 1][k][j]])
                    v_parents.append((v_ids[t - 1][k][j], gate))
                    v_value += gate * values[v_ids[t - 1][k][j]]
                vj = node(v_value, v_parents)
                v_row.append(vj)

                spike = 1.0 if values[vj] > layer.threshold else 0.0
                pseudo = 1.0 if abs(values[vj] - layer.threshold) < cfg.window else 0.0
                o_row.append(node(spike, [(vj, pseudo)]))
            c_ids[t].append(c_row)
            v_ids[t].append(v_row)
            o_ids[t].append(o_row)

    dec = params.decoder
    out_width = dec.n_act * dec.pop_size
    sc_ids = [
        node(
            sum(values[o_ids[t][-1][j]] for t in range(n_steps)),
            [(o_ids[t][-1][j], 1.0) for t in range(n_steps)],
        )
        for j in range(out_width)
    ]
    fr_ids = [
        node(values[sc_ids[j]] / n_steps, [(sc_ids[j], 1.0 / n_steps)])
        for j in range(out_width)
    ]
    a_records = []
    for i in range(dec.n_act):
        fr_slice = fr_ids[i * dec.pop_size : (i + 1) * dec.pop_size]
        parents = [(fid, dec.weights[i, p]) for p, fid in enumerate(fr_slice)]
        value = dec.biases[i] + sum(
            dec.weights[i, p] * values[fid] for p, fid in enumerate(fr_slice)
        )
        a_records.append((node(value, parents), i, fr_slice))

    adjoint = np.zeros(len(values))
    for aid, i, _ in a_records:
        adjoint[aid] = grad_action[i]
    for nid in range(len(values) - 1, -1, -1):
        g = adjoint[nid]
        if g == 0.0:
            continue
        for pid, coeff in edges[nid]:
            adjoint[pid] += g * coeff

    d_weights = [np.zeros_like(l.weights) for l in layers]
    d_biases = [np.zeros_like(l.biases) for l in layers]
    for cid, t, k, j in c_records:
        g = adjoint[cid]
        if g == 0.0:
            continue
        in_ids = x_ids[t] if k == 0 else o_ids[t][k - 1]
        for i, pid in enumerate(in_ids):
            d_weights[k][j, i] += g * values[pid]
        d_biases[k][j] += g

    d_dec_w = np.zeros_like(dec.weights)
    d_dec_b = np.zeros_like(dec.biases)
    for aid, i, fr_slice in a_records:
        g = adjoint[aid]
        for p, fid in enumerate(fr_slice):
            d_dec_w[i, p] += g * values[fid]
        d_dec_b[i] += g

    # Straight-through from input-spike adjoints to the stimulation, then the
    # Gaussian receptive-field factors, derived scalar by scalar.
    enc = params.encoder
    d_means = np.zeros_like(enc.means)
    d_stddevs = np.zeros_like(enc.stddevs)
    for n in range(enc.n_obs):
        for p in range(enc.pop_size):
            flat = n * enc.pop_size + p
            g_stim = sum(adjoint[x_ids[t][flat]] for t in range(n_steps))
            mu, sigma = enc.means[n, p], enc.stddevs[n, p]
            u = (obs[n] - mu) / sigma
            stim = np.exp(-0.5 * u * u)
            d_means[n, p] = g_stim * stim * u / sigma
            d_stddevs[n, p] = g_stim * stim * u * u / sigma
    return PopSpikeGrads(
        d_means=d_means,
        d_stddevs=d_stddevs,
        d_weights=d_weights,
        d_biases=d_biases,
        d_dec_weights=d_dec_w,
        d_dec_biases=d_dec_b,
    )


# ---------------------------------------------------------------------------
# Finite differences (smooth paths only)
# ---------------------------------------------------------------------------

FD_STEP = 1e-5


def central_difference(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function, element by element."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        hi = f(x)
        xf[i] = orig - step
        lo = f(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(approx, exact) -> float:
    """max |a - b| over the joint magnitude scale; 0 when both vanish."""
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    scale = max(np.max(np.abs(approx), initial=0.0), np.max(np.abs(exact), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(approx - exact)) / scale)


def grads_relative_error(a: PopSpikeGrads, b: PopSpikeGrads) -> float:
    """Worst per-tensor relative error between two gradient sets."""
    da, db = a.tensor_dict(), b.tensor_dict()
    return max(relative_error(da[name], db[name]) for name in da)


SMOOTH_TARGETS = ("decoder", "stimulation")


def finite_diff_check(f, x: np.ndarray, analytic: np.ndarray, step: float = FD_STEP) -> float:
    """Relative error between central differences of ``f`` and ``analytic``."""
    return relative_error(central_difference(f, x, step), analytic)


def refuse_non_smooth(target: str) -> None:
    """Finite differences are valid on smooth paths only.

    The spike step has zero derivative almost everywhere and the training
    gradient deliberately substitutes a pseudo-derivative, so a finite
    difference through any spiking layer measures nothing; such requests are
    rejected rather than reported as failures.
    """
    if target not in SMOOTH_TARGETS:
        raise NonSmoothPathError(
            f"finite differences are only meaningful for {SMOOTH_TARGETS}, "
            f"not {target!r}"
        )
