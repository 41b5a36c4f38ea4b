"""Training orchestration: the ES loop with batched candidate evaluation,
periodic evaluation of the best genome, diversity sampling, checkpointing
and CSV logging, plus the trace and paired-diversity experiment drivers.

Candidate evaluation is organised in fixed-size sub-batches whose policies
are rolled out together through vectorised environment kernels. The
sub-batch partition is independent of the worker count, and every random
draw comes from a per-candidate stream keyed by (master_seed, generation,
candidate index), so a training run's fitness trajectory is bit-reproducible
for any ``--workers`` setting.
"""

from __future__ import annotations

import json
import multiprocessing as mp
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import Encoding, make_encoding
from .config import RunConfig, config_hash, config_to_dict, write_snapshot
from .devgraph import graph_snapshot
from .envs import EnvSpec, make_env, reset_batch, step_batch
from .es import (
    STREAM_ASK,
    STREAM_DIVERSITY,
    STREAM_INIT,
    STREAM_PERIODIC_EVAL,
    EsState,
    candidate_seed,
    episode_rngs,
    es_ask,
    es_tell,
    evaluate,
    init_es_state,
    load_checkpoint,
    save_checkpoint,
)
from .metrics import (
    CONTEXT_PER_GENERATION,
    CONTEXT_PER_GROWTH_STEP,
    DiversityUndefined,
    RunLogger,
    neuronal_diversity,
)
from .ndp import InfiniteWeight, develop
from .phenotype import ACTIVATION_LIMIT, PolicyDiverged

# Candidates evaluated per vectorised block. Fixed (not derived from the
# worker count) so fitness bytes do not depend on parallelism.
EVAL_SUBBATCH = 64

# Best-genome evaluation trials run every PERIODIC_EVAL_INTERVAL generations.
PERIODIC_EVAL_INTERVAL = 10
PERIODIC_EVAL_TRIALS = 2

DIVERSITY_K = 10

CHECKPOINT_NAME = "checkpoint.bin"


@dataclass
class EvalContext:
    encoding: Encoding
    env_spec: EnvSpec
    eval_episodes: int
    master_seed: int


def make_context(config: RunConfig) -> EvalContext:
    env_spec = make_env(config.env)
    encoding = make_encoding(config.encoding, env_spec.obs_dim, env_spec.act_dim,
                             config.growth, n_neurons=config.policy_neurons)
    return EvalContext(encoding=encoding, env_spec=env_spec,
                       eval_episodes=config.es.eval_episodes,
                       master_seed=config.master_seed)


def _rollout_block(weight_stack, env_spec: EnvSpec, rngs) -> np.ndarray:
    """Roll out one episode per row of ``weight_stack`` (rows may repeat a
    policy for multiple episodes). Returns per-row episode returns; rows
    whose recurrence trips the activation guard score the worst return."""
    b, n, _ = weight_stack.shape
    obs_cols = np.arange(env_spec.obs_dim)
    act_cols = np.arange(env_spec.obs_dim, env_spec.obs_dim + env_spec.act_dim)
    env_states, obs = reset_batch(env_spec, rngs)
    states = np.zeros((b, n))
    returns = np.zeros(b)
    alive = np.arange(b)  # original row of each still-running episode
    weights = weight_stack
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(env_spec.max_steps):
            pre = np.matmul(weights, states[:, :, None])[:, :, 0]
            pre[:, obs_cols] += obs
            bad = ~np.all(np.isfinite(pre), axis=1) | (
                np.max(np.abs(pre), axis=1) > ACTIVATION_LIMIT
            )
            if np.any(bad):
                returns[alive[bad]] = env_spec.worst_return
            actions = np.clip(pre[:, act_cols], env_spec.action_low,
                              env_spec.action_high)
            actions[bad] = 0.0
            env_states, obs, reward, done = step_batch(env_spec, env_states, actions)
            ok = ~bad
            returns[alive[ok]] += reward[ok]
            states = np.maximum(pre, 0.0)
            states[:, obs_cols] = pre[:, obs_cols]
            states[:, act_cols] = pre[:, act_cols]
            keep = ~(done | bad)
            if not np.all(keep):
                if not np.any(keep):
                    break
                alive = alive[keep]
                weights = weights[keep]
                states = states[keep]
                env_states = env_states[keep]
                obs = obs[keep]
    return returns


def evaluate_block(genomes, indices, generation: int, ctx: EvalContext) -> list[float]:
    """Fitness for one sub-batch of candidates: build each policy, then roll
    out all (candidate, episode) pairs together."""
    episodes = ctx.eval_episodes
    policies = []
    failed = []
    rng_rows = []
    for genome, idx in zip(genomes, indices):
        build_rng, ep = episode_rngs(
            candidate_seed(ctx.master_seed, generation, idx), episodes
        )
        try:
            policies.append(ctx.encoding.build(np.asarray(genome), build_rng))
            failed.append(False)
        except (InfiniteWeight, PolicyDiverged):
            policies.append(None)
            failed.append(True)
        rng_rows.append(ep)

    live = [i for i, f in enumerate(failed) if not f]
    fitness = np.full(len(genomes), ctx.env_spec.worst_return)
    if live:
        n_max = max(policies[i].n for i in live)
        stack = np.zeros((len(live) * episodes, n_max, n_max))
        rngs = []
        for row, i in enumerate(live):
            p = policies[i]
            for e in range(episodes):
                stack[row * episodes + e, : p.n, : p.n] = p.weights
                rngs.append(rng_rows[i][e])
        returns = _rollout_block(stack, ctx.env_spec, rngs)
        per_cand = returns.reshape(len(live), episodes).mean(axis=1)
        fitness[live] = per_cand
    return [float(f) for f in fitness]


# --- worker-pool plumbing ---------------------------------------------------

_WORKER_CTX: EvalContext | None = None


def _worker_init(config_dict: dict) -> None:
    global _WORKER_CTX
    from .config import load_config  # re-validate inside the worker

    cfg = load_config(overrides=config_dict)
    _WORKER_CTX = make_context(cfg)


def _worker_eval(task):
    generation, first_index, block = task
    genomes = np.frombuffer(block["data"], dtype=np.float64).reshape(block["shape"])
    indices = range(first_index, first_index + genomes.shape[0])
    return first_index, evaluate_block(genomes, indices, generation, _WORKER_CTX)


def evaluate_population(candidates, generation: int, ctx: EvalContext,
                        pool=None) -> np.ndarray:
    blocks = []
    for start in range(0, len(candidates), EVAL_SUBBATCH):
        blocks.append((start, candidates[start : start + EVAL_SUBBATCH]))
    fitness = np.empty(len(candidates))
    if pool is None:
        for start, block in blocks:
            fitness[start : start + len(block)] = evaluate_block(
                block, range(start, start + len(block)), generation, ctx
            )
    else:
        tasks = [
            (generation, start, {"data": block.tobytes(), "shape": block.shape})
            for start, block in blocks
        ]
        for start, values in pool.imap_unordered(_worker_eval, tasks):
            fitness[start : start + len(values)] = values
    return fitness


def _periodic_eval(state: EsState, generation: int, ctx: EvalContext) -> tuple[float, float]:
    """Evaluation trials of the best genome so far, on dedicated streams."""
    returns = [
        evaluate(state.best_genome, ctx.encoding, ctx.env_spec, 1,
                 candidate_seed(ctx.master_seed, generation, STREAM_PERIODIC_EVAL + e))
        for e in range(PERIODIC_EVAL_TRIALS)
    ]
    return float(np.mean(returns)), float(np.std(returns))


def _final_extrinsics(graph) -> np.ndarray:
    return np.stack([c.extrinsic for c in graph.cells])


def _sample_diversity(state: EsState, generation: int, config: RunConfig,
                      ctx: EvalContext) -> float | None:
    """Neuronal diversity of the final growth step of the current best
    genome (developmental encodings only)."""
    if config.encoding not in ("ndp", "ndp_no_intrinsic"):
        return None
    growth = replace(config.growth,
                     intrinsic_enabled=(config.encoding == "ndp"))
    rng = np.random.default_rng(
        candidate_seed(ctx.master_seed, generation, STREAM_DIVERSITY)
    )
    graph = develop(state.best_genome, ctx.env_spec.obs_dim, ctx.env_spec.act_dim,
                    growth, rng)
    try:
        return neuronal_diversity(_final_extrinsics(graph), DIVERSITY_K)
    except DiversityUndefined:
        return None


def train(config: RunConfig, resume: bool = False, quiet: bool = False) -> dict:
    """Run (or resume) a full training; returns a summary dict with the
    final state and output paths."""
    ctx = make_context(config)
    run_dir = Path(config.run_dir)
    chash = config_hash(config)
    ckpt_path = run_dir / CHECKPOINT_NAME

    if resume:
        state = load_checkpoint(ckpt_path, chash)
    else:
        init_rng = np.random.default_rng(
            candidate_seed(config.master_seed, 0, STREAM_INIT)
        )
        state = init_es_state(ctx.encoding.genome_length, config.es,
                              mean=ctx.encoding.initial_mean(init_rng))

    logger = RunLogger(run_dir, resume=resume)
    write_snapshot(config)
    pool = None
    if config.workers > 1:
        mp_ctx = mp.get_context("spawn")
        pool = mp_ctx.Pool(config.workers, initializer=_worker_init,
                           args=(config_to_dict(config),))
    stopped_early = False
    last_eval = None
    try:
        for generation in range(state.generation + 1, config.es.generations + 1):
            ask_rng = np.random.default_rng(
                candidate_seed(config.master_seed, generation, STREAM_ASK)
            )
            candidates = es_ask(state, config.es, ask_rng)
            fitness = evaluate_population(candidates, generation, ctx, pool)
            state = es_tell(state, candidates, fitness, config.es)
            logger.log_fitness(generation, float(np.max(fitness)),
                               float(np.mean(fitness)), float(np.std(fitness)))
            at_interval = generation % PERIODIC_EVAL_INTERVAL == 0
            if at_interval or generation == config.es.generations:
                mean_ret, std_ret = _periodic_eval(state, generation, ctx)
                last_eval = mean_ret
                logger.log_eval(generation, mean_ret, std_ret)
                diversity = _sample_diversity(state, generation, config, ctx)
                if diversity is not None:
                    logger.log_diversity(CONTEXT_PER_GENERATION, generation, diversity)
                save_checkpoint(ckpt_path, state, chash)
                if not quiet:
                    print(f"gen {generation:5d}  best {state.best_fitness:9.2f}  "
                          f"eval {mean_ret:9.2f} +- {std_ret:.2f}")
                if (config.es.target_return is not None
                        and mean_ret >= config.es.target_return):
                    stopped_early = True
                    break
        save_checkpoint(ckpt_path, state, chash)
    finally:
        logger.close()
        if pool is not None:
            pool.close()
            pool.join()
    return {
        "run_dir": str(run_dir),
        "checkpoint": str(ckpt_path),
        "generation": state.generation,
        "best_fitness": state.best_fitness,
        "last_eval": last_eval,
        "stopped_early": stopped_early,
    }


def eval_checkpoint(config: RunConfig, episodes: int, seed: int,
                    checkpoint: str | None = None) -> tuple[float, float]:
    """Mean and standard deviation of the stored best genome's return over
    fresh episodes."""
    ctx = make_context(config)
    path = Path(checkpoint) if checkpoint else Path(config.run_dir) / CHECKPOINT_NAME
    state = load_checkpoint(path, config_hash(config))
    base = np.random.SeedSequence([int(seed), STREAM_PERIODIC_EVAL])
    returns = [
        evaluate(state.best_genome, ctx.encoding, ctx.env_spec, 1, child)
        for child in base.spawn(episodes)
    ]
    return float(np.mean(returns)), float(np.std(returns))


def run_trace(config: RunConfig, seed: int, checkpoint: str | None = None) -> list[Path]:
    """Develop a genome (the checkpointed best, or the all-zero search
    origin) and write one JSON graph snapshot per growth step."""
    ctx = make_context(config)
    if config.encoding not in ("ndp", "ndp_no_intrinsic"):
        from .config import ConfigError

        raise ConfigError("trace requires a developmental encoding")
    if checkpoint:
        state = load_checkpoint(checkpoint, config_hash(config))
        genome = state.best_genome
    else:
        ckpt_path = Path(config.run_dir) / CHECKPOINT_NAME
        if ckpt_path.exists():
            genome = load_checkpoint(ckpt_path, config_hash(config)).best_genome
        else:
            genome = np.zeros(ctx.encoding.genome_length)
    trace_dir = Path(config.run_dir) / "trace"
    trace_dir.mkdir(parents=True, exist_ok=True)
    growth = replace(config.growth, intrinsic_enabled=(config.encoding == "ndp"))
    paths = []

    def on_step(step, graph, _trace):
        path = trace_dir / f"step_{step:02d}.json"
        path.write_text(json.dumps(graph_snapshot(graph, step), indent=1) + "\n")
        paths.append(path)

    develop(genome, ctx.env_spec.obs_dim, ctx.env_spec.act_dim, growth,
            np.random.default_rng(np.random.SeedSequence([int(seed)])),
            on_step=on_step)
    return paths


def _growth_step_diversity(config: RunConfig, genome, ctx: EvalContext,
                           logger: RunLogger) -> list[float]:
    """Per-step diversity rows for one development of ``genome``."""
    growth = replace(config.growth,
                     intrinsic_enabled=(config.encoding == "ndp"))
    rng = np.random.default_rng(
        candidate_seed(config.master_seed, 0, STREAM_DIVERSITY)
    )
    values = []

    def on_step(step, graph, _trace):
        try:
            value = neuronal_diversity(_final_extrinsics(graph), DIVERSITY_K)
        except DiversityUndefined:
            return
        values.append(value)
        logger.log_diversity(CONTEXT_PER_GROWTH_STEP, step, value)

    develop(genome, ctx.env_spec.obs_dim, ctx.env_spec.act_dim, growth, rng,
            on_step=on_step)
    return values


def run_diversity(config: RunConfig, quiet: bool = False) -> dict:
    """Train the no-intrinsic encoding twice on the same seed, once with and
    once without lateral inhibition, and emit paired diversity CSVs
    (per-generation samples during training plus per-growth-step curves of
    the final best genome)."""
    from .config import ConfigError

    base = replace(config, encoding="ndp_no_intrinsic",
                   growth=replace(config.growth, intrinsic_enabled=False))
    out = {}
    condition_dicts = {}
    for label, inhibition in (("with_inhibition", True), ("without_inhibition", False)):
        cond = replace(
            base,
            run_dir=str(Path(config.run_dir) / label),
            growth=replace(base.growth, inhibition_enabled=inhibition),
        )
        condition_dicts[label] = config_to_dict(cond)
        summary = train(cond, quiet=quiet)
        ctx = make_context(cond)
        state = load_checkpoint(Path(cond.run_dir) / CHECKPOINT_NAME,
                                config_hash(cond))
        logger = RunLogger(cond.run_dir, resume=True)
        try:
            steps = _growth_step_diversity(cond, state.best_genome, ctx, logger)
        finally:
            logger.close()
        summary["growth_diversity"] = steps
        out[label] = summary

    # The two conditions must differ in the inhibition flag and run_dir only.
    diff = _dict_diff(condition_dicts["with_inhibition"],
                      condition_dicts["without_inhibition"])
    if diff != {"growth.inhibition_enabled", "run_dir"}:
        raise ConfigError(f"paired conditions diverge beyond inhibition: {diff}")
    return out


def _dict_diff(a: dict, b: dict, prefix: str = "") -> set[str]:
    keys = set(a) | set(b)
    out = set()
    for key in keys:
        label = f"{prefix}{key}"
        va, vb = a.get(key), b.get(key)
        if isinstance(va, dict) and isinstance(vb, dict):
            out |= _dict_diff(va, vb, prefix=f"{label}.")
        elif va != vb:
            out.add(label)
    return out
