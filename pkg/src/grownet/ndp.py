"""The neural developmental program: three weight-shared cell models and the
synchronous growth loop that applies them with lateral inhibition.

Per growth step, every cell can (1) differentiate: adopt a new extrinsic
state proposed by an attention pass over its graph neighbourhood, (2) grow:
spawn a child that inherits its intrinsic identity, and (3) refresh the
weights of its outgoing connections. Each phase reads the states frozen at
the start of the step (phase 3 reads post-differentiation states), so the
step is synchronous and independent of cell processing order.

Lateral inhibition: a cell that performs an action emits a refractory signal
of the same action kind to its graph neighbours (never to itself). Signals
emitted during a step take effect from the next step and last for
``inhibition_steps`` steps.

Growth is deterministic given the genome, the dimensions and the seed; the
only randomness is the founder cells' initial extrinsic states.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .nn_core import (
    Array,
    ContractError,
    GatSpec,
    MlpSpec,
    gat_forward_heads,
    gat_param_count,
    gat_unflatten,
    mlp_forward_layers,
    mlp_param_count,
    mlp_unflatten,
)
from .devgraph import (
    DIFFERENTIATE,
    GROW,
    UPDATE_EDGE,
    Cell,
    DevGraph,
    GraphFull,
    add_cell,
    init_graph,
    neighbors,
    set_edge,
    tick_inhibition,
)

EXTRINSIC_LEN = 8


class InfiniteWeight(RuntimeError):
    """A cell model produced a non-finite edge weight; the genome is
    rejected (its fitness becomes the environment's worst return)."""


@dataclass(frozen=True)
class GrowthConfig:
    growth_steps: int = 15
    inhibition_steps: int = 2
    inhibition_enabled: bool = True
    intrinsic_enabled: bool = True
    max_cells: int = 100

    def __post_init__(self):
        if self.growth_steps < 1:
            raise ContractError("growth_steps must be >= 1")
        if self.inhibition_steps < 0:
            raise ContractError("inhibition_steps must be >= 0")
        if self.max_cells < 1:
            raise ContractError("max_cells must be >= 1")


@dataclass(frozen=True)
class NdpLayout:
    """Genome partition for a given founder count.

    The flat genome concatenates the differentiation model (attention), the
    growth model and the edge model, in that order. All three read the same
    per-cell input: intrinsic one-hot (length = founder count) concatenated
    with the extrinsic vector.
    """

    intrinsic_len: int
    extrinsic_len: int = EXTRINSIC_LEN
    attention_heads: int = 1

    @classmethod
    def for_dims(cls, obs_dim: int, act_dim: int, **kw) -> "NdpLayout":
        return cls(intrinsic_len=obs_dim + act_dim, **kw)

    @property
    def cell_input_len(self) -> int:
        return self.intrinsic_len + self.extrinsic_len

    @property
    def diff_spec(self) -> GatSpec:
        return GatSpec(in_dim=self.cell_input_len, out_dim=self.extrinsic_len,
                       heads=self.attention_heads)

    @property
    def gen_spec(self) -> MlpSpec:
        return MlpSpec((self.cell_input_len, 32, 1), hidden_activation="relu",
                       output_activation="tanh")

    @property
    def edge_spec(self) -> MlpSpec:
        return MlpSpec((2 * self.cell_input_len, 16, 16, 1),
                       hidden_activation="relu", output_activation="linear")

    @property
    def diff_len(self) -> int:
        return gat_param_count(self.diff_spec)

    @property
    def gen_len(self) -> int:
        return mlp_param_count(self.gen_spec)

    @property
    def edge_len(self) -> int:
        return mlp_param_count(self.edge_spec)

    @property
    def total_len(self) -> int:
        return self.diff_len + self.gen_len + self.edge_len


def split_genome(layout: NdpLayout, genome: Array) -> tuple[Array, Array, Array]:
    genome = np.asarray(genome, dtype=np.float64)
    if genome.ndim != 1 or genome.shape[0] != layout.total_len:
        raise ContractError(
            f"genome length {genome.shape} does not match layout {layout.total_len}"
        )
    a = layout.diff_len
    b = a + layout.gen_len
    return genome[:a], genome[a:b], genome[b:]


@dataclass
class NdpModels:
    """A genome realised as structured parameters, unflattened once so the
    growth loop avoids repacking per step."""

    layout: NdpLayout
    diff_heads: list
    gen_layers: list
    edge_layers: list


def make_models(layout: NdpLayout, genome: Array) -> NdpModels:
    diff, gen, edge = split_genome(layout, genome)
    if not np.all(np.isfinite(diff)) or not np.all(np.isfinite(gen)) \
            or not np.all(np.isfinite(edge)):
        raise ContractError("genome contains non-finite values")
    return NdpModels(
        layout=layout,
        diff_heads=gat_unflatten(layout.diff_spec, diff),
        gen_layers=mlp_unflatten(layout.gen_spec, gen),
        edge_layers=mlp_unflatten(layout.edge_spec, edge),
    )


def cell_input(cell: Cell, intrinsic_enabled: bool = True) -> Array:
    """Model input for one cell: intrinsic ++ extrinsic. With the intrinsic
    ablation the one-hot part is zeroed so genome shapes stay fixed."""
    if intrinsic_enabled:
        return np.concatenate([cell.intrinsic, cell.extrinsic])
    return np.concatenate([np.zeros_like(cell.intrinsic), cell.extrinsic])


def _input_matrix(graph: DevGraph, intrinsic_enabled: bool) -> Array:
    intr = np.stack([c.intrinsic for c in graph.cells])
    extr = np.stack([c.extrinsic for c in graph.cells])
    if not intrinsic_enabled:
        intr = np.zeros_like(intr)
    return np.concatenate([intr, extr], axis=1)


def gen_decision(models: NdpModels, cell: Cell, intrinsic_enabled: bool = True) -> bool:
    """Grow-or-not: the growth model's tanh output thresholded at zero."""
    out = mlp_forward_layers(models.layout.gen_spec, models.gen_layers,
                             cell_input(cell, intrinsic_enabled))
    return bool(out[0] > 0.0)


def edge_weight(models: NdpModels, src: Cell, dst: Cell,
                intrinsic_enabled: bool = True) -> float:
    """Weight for a src->dst connection from the two endpoint states. The
    input order makes this directional: E(a, b) need not equal E(b, a)."""
    x = np.concatenate([cell_input(src, intrinsic_enabled),
                        cell_input(dst, intrinsic_enabled)])
    out = mlp_forward_layers(models.layout.edge_spec, models.edge_layers, x)
    w = float(out[0])
    if not np.isfinite(w):
        raise InfiniteWeight(f"edge model produced {w}")
    return w


@dataclass
class StepTrace:
    """What happened during one growth step; used by inhibition tests and
    the trace command."""

    step: int
    blocked: dict[str, list[int]] = field(default_factory=dict)
    differentiated: list[int] = field(default_factory=list)
    grew: list[tuple[int, int]] = field(default_factory=list)   # (parent, child)
    edges_updated: list[tuple[int, int]] = field(default_factory=list)


def _batched_edge_weights(models: NdpModels, inputs: Array,
                          src_idx: Array, dst_idx: Array) -> Array:
    if len(src_idx) == 0:
        return np.zeros(0)
    pair_inputs = np.concatenate([inputs[src_idx], inputs[dst_idx]], axis=1)
    w = mlp_forward_layers(models.layout.edge_spec, models.edge_layers,
                           pair_inputs)[:, 0]
    if not np.all(np.isfinite(w)):
        raise InfiniteWeight("edge model produced non-finite weights")
    return w


def grow_step(graph: DevGraph, models: NdpModels, config: GrowthConfig,
              trace: StepTrace | None = None) -> DevGraph:
    """One synchronous growth step: differentiate, grow, refresh edges, then
    advance the inhibition clocks. Mutates and returns ``graph``."""
    layout = models.layout
    n0 = graph.n_cells
    cells0 = graph.cells[:n0]
    snapshot = _input_matrix(graph, config.intrinsic_enabled)  # step-start states
    diff_blocked = [c.inhibition[DIFFERENTIATE] > 0 for c in cells0]
    grow_blocked = [c.inhibition[GROW] > 0 for c in cells0]
    edge_blocked = [c.inhibition[UPDATE_EDGE] > 0 for c in cells0]
    if trace is not None:
        trace.blocked = {
            DIFFERENTIATE: [i for i in range(n0) if diff_blocked[i]],
            GROW: [i for i in range(n0) if grow_blocked[i]],
            UPDATE_EDGE: [i for i in range(n0) if edge_blocked[i]],
        }
    pending: list[tuple[int, str]] = []  # (target cell, action kind)

    def emit(source: int, kind: str) -> None:
        if not config.inhibition_enabled:
            return
        for target in neighbors(graph, source):
            if target != source:
                pending.append((target, kind))

    # Phase 1 -- differentiation: attention over the step-start graph
    # (undirected adjacency plus self-loops) proposes new extrinsic states.
    neigh = [sorted(graph.adj[i] | {i}) for i in range(n0)]
    proposals = np.tanh(
        gat_forward_heads(layout.diff_spec, models.diff_heads, snapshot, neigh)
    )
    for i, cell in enumerate(cells0):
        if diff_blocked[i]:
            continue
        changed = not np.array_equal(proposals[i], cell.extrinsic)
        cell.extrinsic = proposals[i].copy()
        if changed:
            emit(i, DIFFERENTIATE)
            if trace is not None:
                trace.differentiated.append(i)

    # Phase 2 -- neurogenesis: decisions and parent->child weights are taken
    # from the step-start snapshot; cells born here do not act this step.
    gen_out = mlp_forward_layers(layout.gen_spec, models.gen_layers, snapshot)[:, 0]
    grow_ids = [i for i in range(n0) if not grow_blocked[i] and gen_out[i] > 0.0]
    if grow_ids:
        idx = np.asarray(grow_ids, dtype=np.intp)
        child_weights = _batched_edge_weights(models, snapshot, idx, idx)
        for i, w in zip(grow_ids, child_weights):
            if graph.is_full:
                break  # silently truncate remaining growth
            child = add_cell(graph, i, float(w))
            emit(i, GROW)
            if trace is not None:
                trace.grew.append((i, child))

    # Phase 3 -- synaptogenesis: every existing edge whose source is not
    # inhibited is refreshed from the post-differentiation states.
    inputs_now = _input_matrix(graph, config.intrinsic_enabled)
    pairs = [(s, d) for (s, d) in graph.edges if s < n0 and not edge_blocked[s]]
    if pairs:
        src_idx = np.asarray([p[0] for p in pairs], dtype=np.intp)
        dst_idx = np.asarray([p[1] for p in pairs], dtype=np.intp)
        new_w = _batched_edge_weights(models, inputs_now, src_idx, dst_idx)
        for (s, d), w in zip(pairs, new_w):
            set_edge(graph, s, d, float(w))
        for s in sorted({p[0] for p in pairs}):
            emit(s, UPDATE_EDGE)
        if trace is not None:
            trace.edges_updated.extend(pairs)

    # Advance clocks, then arm this step's emissions for the next step.
    tick_inhibition(graph)
    for target, kind in pending:
        cell = graph.cells[target]
        if cell.inhibition[kind] < config.inhibition_steps:
            cell.inhibition[kind] = config.inhibition_steps
    return graph


def develop(
    genome: Array,
    obs_dim: int,
    act_dim: int,
    config: GrowthConfig,
    rng: np.random.Generator,
    on_step=None,
) -> DevGraph:
    """Run the full growth process: founder graph, then ``growth_steps``
    synchronous steps. ``on_step(step, graph, trace)`` is called once for the
    initial graph (step 0, trace None) and once after each step.

    Pure function of (genome, dims, config, seed): same inputs give a
    bit-identical final graph.
    """
    layout = NdpLayout.for_dims(obs_dim, act_dim)
    models = make_models(layout, genome)
    graph = init_graph(obs_dim, act_dim, rng, max_cells=config.max_cells,
                       extrinsic_len=layout.extrinsic_len)
    if on_step is not None:
        on_step(0, graph, None)
    for step in range(1, config.growth_steps + 1):
        trace = StepTrace(step=step) if on_step is not None else None
        grow_step(graph, models, config, trace)
        if on_step is not None:
            on_step(step, graph, trace)
    return graph
