"""Comparison encodings that share the evaluation stack, plus the registry
mapping encoding names to genome sizes and policy builders.

* ``direct``   -- the genome is the policy's full n x n weight matrix.
* ``one_shot`` -- the genome parameterises an edge model that predicts every
  weight of a fixed, fully connected n-neuron network from the one-hot
  identity codes of the two endpoint neurons, in a single pass (no growth,
  no mutable states).
* ``ndp`` / ``ndp_no_intrinsic`` -- the developmental encodings from
  :mod:`grownet.ndp`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .nn_core import (
    Array,
    ContractError,
    MlpSpec,
    glorot_gat_params,
    glorot_mlp_params,
    mlp_param_count,
    mlp_unflatten,
)
from .ndp import GrowthConfig, InfiniteWeight, NdpLayout, develop
from .phenotype import Policy, compile_policy, make_policy

ENCODING_NAMES = ("ndp", "ndp_no_intrinsic", "direct", "one_shot")
DEFAULT_POLICY_NEURONS = 100


def build_direct(genome: Array, obs_dim: int, act_dim: int,
                 n: int = DEFAULT_POLICY_NEURONS) -> Policy:
    """Read the weight matrix row-major from the genome; the first obs_dim
    neurons observe, the next act_dim act."""
    genome = np.asarray(genome, dtype=np.float64)
    if genome.shape != (n * n,):
        raise ContractError(f"direct genome must have length {n * n}")
    return make_policy(genome.reshape(n, n), obs_dim, act_dim)


def one_shot_spec(n: int) -> MlpSpec:
    return MlpSpec((2 * n, 16, 16, 1), hidden_activation="relu",
                   output_activation="linear")


def one_shot_genome_len(n: int) -> int:
    return mlp_param_count(one_shot_spec(n))


def build_one_shot(genome: Array, obs_dim: int, act_dim: int,
                   n: int = DEFAULT_POLICY_NEURONS) -> Policy:
    """W[i][j] = edge_model(onehot(j) ++ onehot(i)) for every ordered pair,
    self-connections included. One-hot inputs let the first layer reduce to
    two column lookups, so the n^2 pairs are filled without materialising
    the one-hot matrix."""
    spec = one_shot_spec(n)
    genome = np.asarray(genome, dtype=np.float64)
    if genome.shape != (mlp_param_count(spec),):
        raise ContractError(f"one_shot genome must have length {mlp_param_count(spec)}")
    if obs_dim + act_dim > n:
        raise ContractError("network smaller than observation plus action size")
    (w1, b1), (w2, b2), (w3, b3) = mlp_unflatten(spec, genome)
    src_part = w1[:, :n].T        # (n, 16), row j: first-layer input for src j
    dst_part = w1[:, n:].T        # (n, 16), row i: first-layer input for dst i
    h1 = np.maximum(src_part[:, None, :] + dst_part[None, :, :] + b1, 0.0)
    h2 = np.maximum(h1 @ w2.T + b2, 0.0)
    out = (h2 @ w3.T + b3)[..., 0]           # out[j, i] = weight of edge j -> i
    if not np.all(np.isfinite(out)):
        raise InfiniteWeight("one_shot edge model produced non-finite weights")
    return make_policy(out.T, obs_dim, act_dim)


@dataclass(frozen=True)
class Encoding:
    """A genome space plus its genotype-to-phenotype map. ``build`` consumes
    a generator only for the developmental encodings (growth starts from
    random extrinsic states); the static encodings ignore it.
    ``initial_mean`` seeds the search: the model-based encodings start from
    small structured weights because their weight maps are degenerate at the
    all-zero genome, while the direct encoding starts from the zero matrix
    (its map is linear, and random square matrices of that size are unstable
    under the ReLU recurrence)."""

    name: str
    genome_length: int
    build: Callable[[Array, np.random.Generator], Policy]
    initial_mean: Callable[[np.random.Generator], Array]


# Initial-mean scales, calibrated so the starting edge model emits policy
# weights of order 0.5 (large enough to steer, small enough that the ReLU
# recurrence stays stable) while growth and differentiation start gently.
INIT_SCALE_STATE = 0.5
INIT_SCALE_EDGE = 1.0


def ndp_initial_mean(layout: NdpLayout, rng: np.random.Generator) -> Array:
    return np.concatenate([
        glorot_gat_params(layout.diff_spec, rng, scale=INIT_SCALE_STATE),
        glorot_mlp_params(layout.gen_spec, rng, scale=INIT_SCALE_STATE),
        glorot_mlp_params(layout.edge_spec, rng, scale=INIT_SCALE_EDGE),
    ])


def make_encoding(name: str, obs_dim: int, act_dim: int, growth: GrowthConfig,
                  n_neurons: int = DEFAULT_POLICY_NEURONS) -> Encoding:
    if name not in ENCODING_NAMES:
        raise ContractError(f"unknown encoding {name!r}; choose from {ENCODING_NAMES}")
    layout = NdpLayout.for_dims(obs_dim, act_dim)
    if name in ("ndp", "ndp_no_intrinsic"):
        cfg = replace(growth, intrinsic_enabled=(name == "ndp"))

        def build(genome: Array, rng: np.random.Generator) -> Policy:
            return compile_policy(develop(genome, obs_dim, act_dim, cfg, rng))

        return Encoding(name=name, genome_length=layout.total_len, build=build,
                        initial_mean=lambda rng: ndp_initial_mean(layout, rng))

    if name == "direct":
        if n_neurons * n_neurons <= layout.total_len:
            raise ContractError(
                f"direct search dimension {n_neurons ** 2} does not exceed the "
                f"developmental genome dimension {layout.total_len}"
            )
        return Encoding(
            name=name,
            genome_length=n_neurons * n_neurons,
            build=lambda genome, rng: build_direct(genome, obs_dim, act_dim, n_neurons),
            initial_mean=lambda rng: np.zeros(n_neurons * n_neurons),
        )

    spec = one_shot_spec(n_neurons)
    return Encoding(
        name=name,
        genome_length=one_shot_genome_len(n_neurons),
        build=lambda genome, rng: build_one_shot(genome, obs_dim, act_dim, n_neurons),
        initial_mean=lambda rng: glorot_mlp_params(spec, rng, scale=INIT_SCALE_STATE),
    )
