"""Black-box evolution strategy over flat genomes: antithetic Gaussian
sampling around a search mean, centered-rank fitness shaping, and a plain
gradient-ascent update of the mean.

Candidate i of a generation is seeded from the tuple (master_seed,
generation, i), so fitness evaluation is bit-reproducible no matter how the
population is split across workers, and training can resume from a
checkpoint without replaying earlier generations.

Checkpoint file layout (little-endian, fixed offsets):

    bytes 0..7    magic ``b"GNCKPT01"``
    bytes 8..39   sha256 of the canonical search config (32 bytes)
    bytes 40..47  generation, uint64
    bytes 48..55  genome length, uint64
    bytes 56..63  sigma, float64
    bytes 64..71  best fitness, float64
    then          mean genome,  genome-length float64 values
    then          best genome,  genome-length float64 values
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from .nn_core import Array, ContractError
from .envs import EnvSpec
from .phenotype import rollout

CHECKPOINT_MAGIC = b"GNCKPT01"

# Sub-stream indices (third entropy word) reserved for non-candidate draws;
# population indices must stay below the smallest of these.
STREAM_PERIODIC_EVAL = 1 << 20
STREAM_DIVERSITY = 1 << 21
STREAM_ASK = 1 << 22
STREAM_INIT = 1 << 23


class CheckpointError(RuntimeError):
    """A checkpoint file is malformed or belongs to a different config."""


@dataclass(frozen=True)
class EsConfig:
    population_size: int = 256
    learning_rate: float = 0.05
    sigma_init: float = 0.1
    sigma_decay: float = 0.999
    generations: int = 300
    eval_episodes: int = 2
    target_return: float | None = None
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2 != 0:
            raise ContractError("population_size must be a positive even number")
        if self.learning_rate <= 0:
            raise ContractError("learning_rate must be positive")
        if self.sigma_init <= 0:
            raise ContractError("sigma_init must be positive")
        if not 0.0 < self.sigma_decay <= 1.0:
            raise ContractError("sigma_decay must be in (0, 1]")
        if self.generations < 1:
            raise ContractError("generations must be >= 1")
        if self.eval_episodes < 1:
            raise ContractError("eval_episodes must be >= 1")
        if self.checkpoint_every < 1:
            raise ContractError("checkpoint_every must be >= 1")


@dataclass
class EsState:
    mean: Array
    sigma: float
    generation: int
    best_fitness: float
    best_genome: Array


def init_es_state(genome_len: int, config: EsConfig,
                  mean: Array | None = None) -> EsState:
    """Fresh search state. Without an explicit mean the search starts at the
    all-zero genome; encodings whose weight maps are degenerate there supply
    a structured starting mean instead."""
    mean = np.zeros(genome_len) if mean is None else np.asarray(mean, dtype=np.float64)
    if mean.shape != (genome_len,):
        raise ContractError(f"mean shape {mean.shape} != ({genome_len},)")
    return EsState(mean=mean, sigma=config.sigma_init, generation=0,
                   best_fitness=-np.inf, best_genome=mean.copy())


def es_ask(state: EsState, config: EsConfig, rng: np.random.Generator) -> Array:
    """Sample the population as antithetic pairs: candidates 2k and 2k+1 are
    mean + sigma*eps_k and mean - sigma*eps_k."""
    half = config.population_size // 2
    eps = rng.standard_normal((half, state.mean.shape[0]))
    cands = np.empty((config.population_size, state.mean.shape[0]))
    cands[0::2] = state.mean + state.sigma * eps
    cands[1::2] = state.mean - state.sigma * eps
    return cands


def centered_ranks(fitnesses: Array) -> Array:
    """Map fitnesses to utilities in [-0.5, 0.5] with ties averaged; the
    utilities always sum to zero. Non-finite fitnesses rank worst."""
    f = np.asarray(fitnesses, dtype=np.float64).copy()
    f[~np.isfinite(f)] = -np.inf
    ranks = rankdata(f, method="average")  # 1..n, best gets n
    return (ranks - 1.0) / (len(f) - 1.0) - 0.5


def es_tell(state: EsState, candidates: Array, fitnesses: Array,
            config: EsConfig) -> EsState:
    """Consume one generation of evaluations: move the mean along the
    rank-weighted perturbation average, decay sigma, track the best."""
    candidates = np.asarray(candidates, dtype=np.float64)
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    n = config.population_size
    if candidates.shape != (n, state.mean.shape[0]) or fitnesses.shape != (n,):
        raise ContractError("candidate/fitness shapes do not match the config")
    utilities = centered_ranks(fitnesses)
    eps = (candidates - state.mean) / state.sigma
    grad = (utilities @ eps) / (n * state.sigma)
    new_mean = state.mean + config.learning_rate * grad

    best_fitness = state.best_fitness
    best_genome = state.best_genome
    finite = np.where(np.isfinite(fitnesses), fitnesses, -np.inf)
    gen_best = int(np.argmax(finite))
    # ties replace the stored best: with a fitness ceiling (e.g. a solved
    # episode cap), later tying candidates come from a better search mean
    # and generalise better than an early lucky draw
    if np.isfinite(finite[gen_best]) and finite[gen_best] >= best_fitness:
        best_fitness = float(finite[gen_best])
        best_genome = candidates[gen_best].copy()
    return EsState(
        mean=new_mean,
        sigma=state.sigma * config.sigma_decay,
        generation=state.generation + 1,
        best_fitness=best_fitness,
        best_genome=best_genome,
    )


def candidate_seed(master_seed: int, generation: int, index: int) -> np.random.SeedSequence:
    """The fixed per-candidate stream: hash of (master seed, generation,
    candidate index)."""
    return np.random.SeedSequence([int(master_seed), int(generation), int(index)])


def episode_rngs(seed: np.random.SeedSequence | int, eval_episodes: int):
    """Derive one build generator plus one generator per episode."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    children = seed.spawn(1 + eval_episodes)
    return (np.random.default_rng(children[0]),
            [np.random.default_rng(c) for c in children[1:]])


def evaluate(genome: Array, encoding, env_spec: EnvSpec, eval_episodes: int,
             seed: np.random.SeedSequence | int) -> float:
    """Build the policy once, then average the return of ``eval_episodes``
    rollouts with per-episode derived seeds. A genome whose build fails
    (non-finite weights, diverged policy) scores the environment's worst
    return."""
    from .ndp import InfiniteWeight
    from .phenotype import PolicyDiverged

    build_rng, ep_rngs = episode_rngs(seed, eval_episodes)
    try:
        policy = encoding.build(np.asarray(genome, dtype=np.float64), build_rng)
    except (InfiniteWeight, PolicyDiverged):
        return float(env_spec.worst_return)
    returns = [rollout(policy, env_spec, rng) for rng in ep_rngs]
    return float(np.mean(returns))


def save_checkpoint(path, state: EsState, config_hash: bytes) -> None:
    if len(config_hash) != 32:
        raise CheckpointError("config hash must be 32 bytes")
    n = state.mean.shape[0]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(config_hash)
        fh.write(struct.pack("<QQdd", state.generation, n,
                             state.sigma, state.best_fitness))
        fh.write(state.mean.astype("<f8").tobytes())
        fh.write(state.best_genome.astype("<f8").tobytes())


def load_checkpoint(path, config_hash: bytes | None = None) -> EsState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 72 or raw[:8] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path} is not a grownet checkpoint")
    stored_hash = raw[8:40]
    if config_hash is not None and stored_hash != config_hash:
        raise CheckpointError(
            "checkpoint belongs to a different configuration; refusing to resume"
        )
    generation, n, sigma, best_fitness = struct.unpack("<QQdd", raw[40:72])
    need = 72 + 2 * 8 * n
    if len(raw) != need:
        raise CheckpointError(f"{path} is truncated (expected {need} bytes)")
    mean = np.frombuffer(raw[72:72 + 8 * n], dtype="<f8").astype(np.float64)
    best = np.frombuffer(raw[72 + 8 * n:], dtype="<f8").astype(np.float64)
    return EsState(mean=mean, sigma=sigma, generation=int(generation),
                   best_fitness=best_fitness, best_genome=best)
