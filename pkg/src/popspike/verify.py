"""Randomized gradient verification: oracle equivalence and finite differences.

The closed-form backward pass is checked two independent ways.  Small random
networks are differentiated by the unrolled-graph oracle and must agree to
near machine precision.  The smooth paths (decoder parameters, and the
stimulation as a function of receptive-field means and widths) are checked
against central finite differences.
"""

from __future__ import annotations

import numpy as np

from . import popcode
from .gradients import (
    NEXT_STEP,
    SurrogateConfig,
    backward_decoder,
    central_difference,
    grads_relative_error,
    popspike_backward,
    relative_error,
    unrolled_graph_backward,
)
from .network import PopSpikeParams, init_popspike, popspike_forward


def random_instance(
    rng: np.random.Generator,
    n_steps: int | None = None,
    mode: str | None = None,
) -> tuple[PopSpikeParams, np.ndarray, np.ndarray, int]:
    """A small random network plus observation and action adjoint.

    Sized to stay inside the unrolled oracle's guard; weights are roughened so
    voltages land on both sides of the surrogate window.
    """
    n_obs = int(rng.integers(1, 3))
    pop_in = int(rng.choice([2, 3]))
    hidden = tuple(int(rng.choice([2, 4, 8])) for _ in range(int(rng.integers(1, 3))))
    n_act = int(rng.integers(1, 3))
    pop_out = int(rng.choice([2, 3]))
    if n_steps is None:
        n_steps = int(rng.choice([1, 3, 5, 10]))
    if mode is None:
        mode = str(rng.choice([popcode.DETERMINISTIC, popcode.PROBABILISTIC]))
    params = init_popspike(
        [(-1.5, 1.5)] * n_obs,
        n_act,
        hidden,
        rng,
        pop_in=pop_in,
        pop_out=pop_out,
        encoder_mode=mode,
    )
    params.encoder.means[...] += rng.normal(0.0, 0.4, params.encoder.means.shape)
    params.encoder.stddevs[...] = rng.uniform(0.5, 2.0, params.encoder.stddevs.shape)
    for layer in params.layers:
        layer.weights *= rng.uniform(0.5, 2.0)
    obs = rng.uniform(-1.5, 1.5, n_obs)
    grad_action = rng.normal(size=n_act)
    return params, obs, grad_action, n_steps


def oracle_suite(
    n_instances: int, seed: int = 0, current_grad: str | None = None
) -> dict:
    """Compare the closed-form backward pass against the unrolled oracle.

    Returns the worst relative error over ``n_instances`` random networks.
    When ``current_grad`` names the alternative (next-step) indexing the same
    comparison is run for it, to document that it diverges from the graph.
    """
    rng = np.random.default_rng(seed)
    cfg = SurrogateConfig()
    worst = 0.0
    divergent = 0
    for _ in range(n_instances):
        params, obs, grad_action, n_steps = random_instance(rng)
        action_rng = np.random.default_rng(rng.integers(2**63))
        _, trace = popspike_forward(params, obs, n_steps, rng=action_rng)
        kwargs = {} if current_grad is None else {"current_grad": current_grad}
        closed = popspike_backward(grad_action, trace, params, cfg, **kwargs)
        oracle = unrolled_graph_backward(
            params, trace.snn.inputs, obs, grad_action, cfg
        )
        err = grads_relative_error(closed, oracle)
        worst = max(worst, err)
        if err > 1e-8:
            divergent += 1
    return {"worst": worst, "divergent": divergent, "instances": n_instances}


def decoder_fd_suite(n_cases: int, seed: int = 0) -> float:
    """Finite-difference check of the decoder parameter and rate gradients."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n_act = int(rng.integers(1, 4))
        pop = int(rng.integers(2, 6))
        dec = popcode.DecoderParams(
            weights=rng.normal(size=(n_act, pop)), biases=rng.normal(size=n_act)
        )
        rates = rng.uniform(0.0, 1.0, size=(n_act, pop))
        grad_action = rng.normal(size=n_act)

        def loss_from(weights=None, biases=None, r=None):
            d = popcode.DecoderParams(
                weights=dec.weights if weights is None else weights,
                biases=dec.biases if biases is None else biases,
            )
            a = popcode.decode_rates(rates if r is None else r, d)
            return float(np.dot(grad_action, a))

        d_w, d_b, d_r = backward_decoder(grad_action, rates, dec)
        worst = max(
            worst,
            relative_error(central_difference(lambda w: loss_from(weights=w), dec.weights.copy()), d_w),
            relative_error(central_difference(lambda b: loss_from(biases=b), dec.biases.copy()), d_b),
            relative_error(central_difference(lambda r: loss_from(r=r), rates.copy()), d_r),
        )
    return worst


def stimulation_fd_suite(n_cases: int, seed: int = 0) -> float:
    """Finite-difference check of the Gaussian receptive-field gradients.

    Checks the smooth map from (means, stddevs) to the stimulation under a
    fixed linear functional, i.e. the spike generator's straight-through rule
    is held fixed on both sides.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        n_obs = int(rng.integers(1, 4))
        pop = int(rng.integers(2, 6))
        means = rng.normal(size=(n_obs, pop))
        stddevs = rng.uniform(0.4, 2.0, size=(n_obs, pop))
        obs = rng.normal(size=n_obs)
        grad_stim = rng.normal(size=(n_obs, pop))

        def loss(mu, sigma):
            z = (obs[:, None] - mu) / sigma
            return float(np.sum(grad_stim * np.exp(-0.5 * z * z)))

        z = (obs[:, None] - means) / stddevs
        stim = np.exp(-0.5 * z * z)
        common = grad_stim * stim
        d_mu = common * (obs[:, None] - means) / stddevs**2
        d_sigma = common * (obs[:, None] - means) ** 2 / stddevs**3
        worst = max(
            worst,
            relative_error(
                central_difference(lambda m: loss(m, stddevs), means.copy()), d_mu
            ),
            relative_error(
                central_difference(lambda s: loss(means, s), stddevs.copy()), d_sigma
            ),
        )
    return worst


def run_gradcheck(
    trials: int = 100,
    seed: int = 0,
    oracle_tol: float = 1e-10,
    fd_tol: float = 1e-6,
) -> dict:
    """The full gradient verification battery; ``ok`` is the overall verdict."""
    oracle = oracle_suite(trials, seed)
    fd_decoder = decoder_fd_suite(trials, seed + 1)
    fd_stimulation = stimulation_fd_suite(trials, seed + 2)
    alt = oracle_suite(max(trials // 4, 10), seed + 3, current_grad=NEXT_STEP)
    return {
        "oracle_worst": oracle["worst"],
        "decoder_fd_worst": fd_decoder,
        "stimulation_fd_worst": fd_stimulation,
        "next_step_variant_divergent": alt["divergent"],
        "next_step_variant_instances": alt["instances"],
        "ok": bool(
            oracle["worst"] < oracle_tol
            and fd_decoder < fd_tol
            and fd_stimulation < fd_tol
        ),
    }
