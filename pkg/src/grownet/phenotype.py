"""Compile a grown graph into a recurrent policy network and run episodes.

The policy is a single weight matrix over all cells-as-neurons: each step the
whole state vector is multiplied through once and observations are injected
additively into the observation neurons. Hidden neurons apply a ReLU;
observation and action neurons are linear (observation cells are input
pass-throughs, rectifying them would erase the sign of every observation,
and actions read out linearly), so actions see inputs with a one-step
latency. Actions are clipped to the environment's bounds by the
caller-supplied limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn_core import Array, ContractError
from .devgraph import DevGraph, ROLE_ACTION, ROLE_OBSERVATION

# Magnitude guard: beyond this the recurrence is declared divergent.
ACTIVATION_LIMIT = 1e6


class PolicyDiverged(RuntimeError):
    """Recurrent activations left the guarded range; the episode is aborted
    and scored with the environment's worst return."""


@dataclass
class Policy:
    weights: Array            # (n, n); weights[i][j] = weight of edge j -> i
    obs_idx: Array            # indices of observation neurons
    act_idx: Array            # indices of action neurons

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def obs_dim(self) -> int:
        return len(self.obs_idx)

    @property
    def act_dim(self) -> int:
        return len(self.act_idx)


def zero_state(policy: Policy) -> Array:
    return np.zeros(policy.n)


def compile_policy(graph: DevGraph) -> Policy:
    """Neuron order is cell creation order; the weight matrix is filled from
    the directed edges (absent edges are zero)."""
    n = graph.n_cells
    weights = np.zeros((n, n))
    for (src, dst), w in graph.edges.items():
        weights[dst, src] = w
    obs_idx = np.asarray(graph.obs_ids(), dtype=np.intp)
    act_idx = np.asarray(graph.act_ids(), dtype=np.intp)
    return Policy(weights=weights, obs_idx=obs_idx, act_idx=act_idx)


def make_policy(weights: Array, obs_dim: int, act_dim: int) -> Policy:
    """Policy over an explicit weight matrix with the standard neuron order:
    observation neurons first, then action neurons, then hidden ones."""
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.shape[0]
    if weights.shape != (n, n):
        raise ContractError(f"weight matrix must be square, got {weights.shape}")
    if obs_dim + act_dim > n:
        raise ContractError("more observation/action neurons than neurons")
    return Policy(
        weights=weights,
        obs_idx=np.arange(obs_dim, dtype=np.intp),
        act_idx=np.arange(obs_dim, obs_dim + act_dim, dtype=np.intp),
    )


def policy_step(
    policy: Policy,
    state: Array,
    obs: Array,
    action_low: Array | None = None,
    action_high: Array | None = None,
) -> tuple[Array, Array]:
    """One recurrence step; returns (action, next state)."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[0] != policy.obs_dim:
        raise ContractError(f"observation length {obs.shape[0]} != {policy.obs_dim}")
    pre = policy.weights @ state
    pre[policy.obs_idx] += obs
    if not np.all(np.isfinite(pre)) or np.max(np.abs(pre), initial=0.0) > ACTIVATION_LIMIT:
        raise PolicyDiverged("activation magnitude guard tripped")
    action = pre[policy.act_idx].copy()
    if action_low is not None:
        action = np.clip(action, action_low, action_high)
    new_state = np.maximum(pre, 0.0)
    new_state[policy.obs_idx] = pre[policy.obs_idx]
    new_state[policy.act_idx] = pre[policy.act_idx]
    return action, new_state


def rollout(policy, env_spec, rng: np.random.Generator, max_steps: int | None = None) -> float:
    """One episode from a fresh reset with a zero recurrent state; returns the
    summed reward. A diverged recurrence scores the environment's worst
    return."""
    from .envs import env_reset, env_step  # local import to avoid a cycle

    if policy.obs_dim != env_spec.obs_dim or policy.act_dim != env_spec.act_dim:
        raise ContractError("policy dimensions do not match environment")
    limit = env_spec.max_steps if max_steps is None else min(max_steps, env_spec.max_steps)
    state, obs = env_reset(env_spec, rng)
    activations = zero_state(policy)
    total = 0.0
    try:
        for _ in range(limit):
            action, activations = policy_step(
                policy, activations, obs, env_spec.action_low, env_spec.action_high
            )
            state, obs, reward, done = env_step(env_spec, state, action)
            total += reward
            if done:
                break
    except PolicyDiverged:
        return float(env_spec.worst_return)
    return float(total)


def policy_to_dict(policy: Policy) -> dict:
    """JSON-serialisable dump: ``{"n", "obs_idx", "act_idx", "weights"}`` with
    weights as dense rows (weights[i][j] = weight of edge j -> i)."""
    return {
        "n": policy.n,
        "obs_idx": [int(i) for i in policy.obs_idx],
        "act_idx": [int(i) for i in policy.act_idx],
        "weights": [[float(v) for v in row] for row in policy.weights],
    }


def policy_from_dict(data: dict) -> Policy:
    weights = np.asarray(data["weights"], dtype=np.float64)
    if weights.shape != (data["n"], data["n"]):
        raise ContractError("weight matrix shape does not match neuron count")
    return Policy(
        weights=weights,
        obs_idx=np.asarray(data["obs_idx"], dtype=np.intp),
        act_idx=np.asarray(data["act_idx"], dtype=np.intp),
    )
