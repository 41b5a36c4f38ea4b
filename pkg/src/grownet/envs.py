"""Desk-scale control environments with a uniform reset/step interface.

Three continuous-action tasks:

* ``cartpole``  -- classic cart-pole balancing with a continuous force in
  [-10, 10] N, Euler integration at dt = 0.02 s, +1 reward for every step the
  post-step state stays upright (|theta| < 12 deg, |x| < 2.4 m), 500 steps.
  Constants: cart mass 1.0 kg, pole mass 0.1 kg, pole half-length 0.5 m,
  g = 9.8 m/s^2.
* ``pendulum``  -- torque-limited swing-up (torque in [-2, 2], dt = 0.05,
  g = 10, m = l = 1, speed clipped to [-8, 8]); per-step reward
  -(theta^2 + 0.1 omega^2 + 0.001 u^2) with theta wrapped to (-pi, pi],
  200 steps, no early termination.
* ``point_reacher`` -- a damped 2D point mass pushed by a force in [-1, 1]^2
  toward a per-episode random target in [-1, 1]^2; reward is minus the
  post-step distance to the target, 100 steps.

The step math is written over batched state arrays; the single-episode
functions call the same kernels with batch size one, so both paths produce
bit-identical trajectories. Dynamics are deterministic: all randomness is
consumed at reset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn_core import Array, ContractError

ENV_NAMES = ("cartpole", "pendulum", "point_reacher")


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    action_low: Array
    action_high: Array
    max_steps: int
    worst_return: float
    params: dict = field(default_factory=dict)


@dataclass
class EnvState:
    vec: Array
    t: int = 0
    done: bool = False


_CARTPOLE_PARAMS = {
    "gravity": 9.8, "mass_cart": 1.0, "mass_pole": 0.1, "half_length": 0.5,
    "force_max": 10.0, "dt": 0.02, "x_limit": 2.4,
    "theta_limit": 12.0 * math.pi / 180.0, "reset_range": 0.05,
}
_PENDULUM_PARAMS = {
    "gravity": 10.0, "mass": 1.0, "length": 1.0, "dt": 0.05,
    "torque_max": 2.0, "speed_max": 8.0,
}
_REACHER_PARAMS = {
    "dt": 0.1, "damping": 0.9, "force_max": 1.0, "pos_limit": 2.0,
    "target_range": 1.0,
}

# Worst-case returns, used as the score for rejected genomes and diverged
# policies. Pendulum: max per-step cost is pi^2 + 0.1*8^2 + 0.001*2^2 over
# 200 steps; reacher: max distance with positions in [-2, 2]^2 and targets
# in [-1, 1]^2 is hypot(3, 3) over 100 steps.
_WORST = {
    "cartpole": 0.0,
    "pendulum": -(math.pi ** 2 + 0.1 * 64.0 + 0.004) * 200.0,
    "point_reacher": -math.hypot(3.0, 3.0) * 100.0,
}


def make_env(name: str) -> EnvSpec:
    if name == "cartpole":
        return EnvSpec(
            name=name, obs_dim=4, act_dim=1,
            action_low=np.array([-10.0]), action_high=np.array([10.0]),
            max_steps=500, worst_return=_WORST[name], params=dict(_CARTPOLE_PARAMS),
        )
    if name == "pendulum":
        return EnvSpec(
            name=name, obs_dim=3, act_dim=1,
            action_low=np.array([-2.0]), action_high=np.array([2.0]),
            max_steps=200, worst_return=_WORST[name], params=dict(_PENDULUM_PARAMS),
        )
    if name == "point_reacher":
        return EnvSpec(
            name=name, obs_dim=4, act_dim=2,
            action_low=np.array([-1.0, -1.0]), action_high=np.array([1.0, 1.0]),
            max_steps=100, worst_return=_WORST[name], params=dict(_REACHER_PARAMS),
        )
    raise ContractError(f"unknown environment {name!r}; choose from {ENV_NAMES}")


def _angle_wrap(theta: Array) -> Array:
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


# --- batched kernels -------------------------------------------------------
# States: cartpole (B, 4) = [x, v, theta, omega]; pendulum (B, 2) =
# [theta, omega]; point_reacher (B, 6) = [px, py, vx, vy, tx, ty].

def reset_batch(spec: EnvSpec, rngs: list[np.random.Generator]):
    """Reset one episode per generator; returns (states, observations)."""
    rows = []
    p = spec.params
    for rng in rngs:
        if spec.name == "cartpole":
            r = p["reset_range"]
            rows.append(rng.uniform(-r, r, size=4))
        elif spec.name == "pendulum":
            theta = rng.uniform(-math.pi, math.pi)
            omega = rng.uniform(-1.0, 1.0)
            rows.append(np.array([theta, omega]))
        else:
            target = rng.uniform(-p["target_range"], p["target_range"], size=2)
            rows.append(np.concatenate([np.zeros(4), target]))
    states = np.stack(rows)
    return states, observe_batch(spec, states)


def observe_batch(spec: EnvSpec, states: Array) -> Array:
    if spec.name == "cartpole":
        return states.copy()
    if spec.name == "pendulum":
        theta, omega = states[:, 0], states[:, 1]
        return np.stack([np.cos(theta), np.sin(theta), omega], axis=1)
    pos, vel, target = states[:, 0:2], states[:, 2:4], states[:, 4:6]
    return np.concatenate([target - pos, vel], axis=1)


def step_batch(spec: EnvSpec, states: Array, actions: Array):
    """Advance every episode one step; returns (states', observations,
    rewards, done flags). Done reflects only the dynamics; the caller
    enforces the step limit."""
    actions = np.asarray(actions, dtype=np.float64)
    if not np.all(np.isfinite(actions)):
        raise ContractError("actions must be finite")
    actions = np.clip(actions, spec.action_low, spec.action_high)
    p = spec.params

    if spec.name == "cartpole":
        x, v, theta, omega = (states[:, i] for i in range(4))
        force = actions[:, 0]
        mc, mp, length, g = (p[k] for k in
                             ("mass_cart", "mass_pole", "half_length", "gravity"))
        sin, cos = np.sin(theta), np.cos(theta)
        temp = (force + mp * length * omega ** 2 * sin) / (mc + mp)
        theta_acc = (g * sin - cos * temp) / (
            length * (4.0 / 3.0 - mp * cos ** 2 / (mc + mp))
        )
        x_acc = temp - mp * length * theta_acc * cos / (mc + mp)
        dt = p["dt"]
        new = np.stack(
            [x + dt * v, v + dt * x_acc, theta + dt * omega, omega + dt * theta_acc],
            axis=1,
        )
        upright = (np.abs(new[:, 0]) < p["x_limit"]) & (
            np.abs(new[:, 2]) < p["theta_limit"]
        )
        reward = np.where(upright, 1.0, 0.0)
        return new, observe_batch(spec, new), reward, ~upright

    if spec.name == "pendulum":
        theta, omega = states[:, 0], states[:, 1]
        torque = actions[:, 0]
        g, m, length, dt = (p[k] for k in ("gravity", "mass", "length", "dt"))
        angle = _angle_wrap(theta)
        cost = angle ** 2 + 0.1 * omega ** 2 + 0.001 * torque ** 2
        new_omega = omega + dt * (
            3.0 * g / (2.0 * length) * np.sin(theta)
            + 3.0 / (m * length ** 2) * torque
        )
        new_omega = np.clip(new_omega, -p["speed_max"], p["speed_max"])
        new_theta = theta + dt * new_omega
        new = np.stack([new_theta, new_omega], axis=1)
        done = np.zeros(len(states), dtype=bool)
        return new, observe_batch(spec, new), -cost, done

    pos, vel, target = states[:, 0:2], states[:, 2:4], states[:, 4:6]
    dt, damping, lim = p["dt"], p["damping"], p["pos_limit"]
    new_vel = damping * vel + dt * actions
    new_pos = np.clip(pos + dt * new_vel, -lim, lim)
    new = np.concatenate([new_pos, new_vel, target], axis=1)
    reward = -np.linalg.norm(target - new_pos, axis=1)
    done = np.zeros(len(states), dtype=bool)
    return new, observe_batch(spec, new), reward, done


# --- single-episode interface ----------------------------------------------

def env_reset(spec: EnvSpec, rng: np.random.Generator) -> tuple[EnvState, Array]:
    states, obs = reset_batch(spec, [rng])
    return EnvState(vec=states[0]), obs[0]


def env_step(spec: EnvSpec, state: EnvState, action: Array):
    """Returns (state', observation, reward, done). Done is absorbing:
    stepping a finished episode changes nothing and yields zero reward."""
    if state.done:
        return state, observe_batch(spec, state.vec[None])[0], 0.0, True
    new, obs, reward, done = step_batch(
        spec, state.vec[None], np.asarray(action, dtype=np.float64)[None]
    )
    t = state.t + 1
    finished = bool(done[0]) or t >= spec.max_steps
    return EnvState(vec=new[0], t=t, done=finished), obs[0], float(reward[0]), finished
