"""The developmental graph: cells with a split hidden state (an immutable
one-hot intrinsic part plus a mutable extrinsic vector), directed weighted
edges, lineage bookkeeping, and per-action lateral-inhibition counters.

A graph starts with one founder cell per observation and action channel.
Founders are seeded fully connected (every ordered pair) so that observation
activity can reach the action cells from the first step; growth afterwards
only ever adds parent->child links, so founder wiring is the sole pathway
between lineages.

A DevGraph is mutated by exactly one owner at a time; there is no internal
locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn_core import Array, ContractError

DIFFERENTIATE = "differentiate"
GROW = "grow"
UPDATE_EDGE = "update_edge"
ACTION_KINDS = (DIFFERENTIATE, GROW, UPDATE_EDGE)

ROLE_OBSERVATION = "observation"
ROLE_ACTION = "action"
ROLE_HIDDEN = "hidden"

DEFAULT_MAX_CELLS = 100


class GraphFull(RuntimeError):
    """Raised by add_cell once the cell cap is reached; growth treats it as
    a silent no-op."""


def _zero_counters() -> dict[str, int]:
    return {kind: 0 for kind in ACTION_KINDS}


@dataclass
class Cell:
    id: int
    intrinsic: Array          # one-hot, length = founder count, fixed for life
    extrinsic: Array          # mutable, entries stay in [-1, 1] after growth
    lineage: int              # founder whose intrinsic identity this cell carries
    role: str
    inhibition: dict[str, int] = field(default_factory=_zero_counters)


@dataclass
class DevGraph:
    cells: list[Cell]
    edges: dict[tuple[int, int], float]
    next_id: int
    max_cells: int = DEFAULT_MAX_CELLS
    # undirected adjacency (in- plus out-neighbours), kept in sync with edges
    adj: dict[int, set[int]] = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def is_full(self) -> bool:
        return len(self.cells) >= self.max_cells

    def cell(self, cell_id: int) -> Cell:
        # ids are dense list indices: cells are never deleted
        return self.cells[cell_id]

    def obs_ids(self) -> list[int]:
        return [c.id for c in self.cells if c.role == ROLE_OBSERVATION]

    def act_ids(self) -> list[int]:
        return [c.id for c in self.cells if c.role == ROLE_ACTION]


def init_graph(
    obs_dim: int,
    act_dim: int,
    rng: np.random.Generator,
    max_cells: int = DEFAULT_MAX_CELLS,
    extrinsic_len: int = 8,
) -> DevGraph:
    """Create the founder graph: obs_dim + act_dim cells, each with a unique
    one-hot intrinsic state and a random extrinsic state drawn uniformly from
    [-1, 1], plus zero-weight edges between every ordered founder pair."""
    if obs_dim < 1 or act_dim < 1:
        raise ContractError("obs_dim and act_dim must be >= 1")
    n = obs_dim + act_dim
    if max_cells < n:
        raise ContractError(f"max_cells {max_cells} below founder count {n}")
    extrinsics = rng.uniform(-1.0, 1.0, size=(n, extrinsic_len))
    cells = []
    for i in range(n):
        intrinsic = np.zeros(n)
        intrinsic[i] = 1.0
        role = ROLE_OBSERVATION if i < obs_dim else ROLE_ACTION
        cells.append(Cell(id=i, intrinsic=intrinsic, extrinsic=extrinsics[i],
                          lineage=i, role=role))
    graph = DevGraph(cells=cells, edges={}, next_id=n, max_cells=max_cells,
                     adj={i: set() for i in range(n)})
    for src in range(n):
        for dst in range(n):
            if src != dst:
                set_edge(graph, src, dst, 0.0)
    return graph


def add_cell(graph: DevGraph, parent_id: int, edge_weight: float) -> int:
    """Divide the parent: the child inherits the parent's intrinsic state,
    lineage and current extrinsic state, gets zeroed inhibition counters, and
    is linked by a parent->child edge with the caller-supplied weight."""
    if parent_id < 0 or parent_id >= len(graph.cells):
        raise ContractError(f"no such parent cell {parent_id}")
    if graph.is_full:
        raise GraphFull(f"graph already holds max_cells={graph.max_cells} cells")
    parent = graph.cells[parent_id]
    child_id = graph.next_id
    child = Cell(
        id=child_id,
        intrinsic=parent.intrinsic.copy(),
        extrinsic=parent.extrinsic.copy(),
        lineage=parent.lineage,
        role=ROLE_HIDDEN,
    )
    graph.cells.append(child)
    graph.next_id += 1
    graph.adj[child_id] = set()
    set_edge(graph, parent_id, child_id, edge_weight)
    return child_id


def set_edge(graph: DevGraph, src: int, dst: int, weight: float) -> None:
    """Upsert the directed edge (src, dst)."""
    if src < 0 or src >= len(graph.cells) or dst < 0 or dst >= len(graph.cells):
        raise ContractError(f"edge ({src}, {dst}) references a missing cell")
    weight = float(weight)
    if not np.isfinite(weight):
        raise ContractError(f"edge ({src}, {dst}) weight {weight} is not finite")
    graph.edges[(src, dst)] = weight
    if src != dst:
        graph.adj[src].add(dst)
        graph.adj[dst].add(src)


def neighbors(graph: DevGraph, cell_id: int) -> set[int]:
    """Union of in- and out-neighbours; this is the locality used both for
    attention message passing and for inhibition signalling."""
    if cell_id < 0 or cell_id >= len(graph.cells):
        raise ContractError(f"no such cell {cell_id}")
    return set(graph.adj[cell_id])


def tick_inhibition(graph: DevGraph) -> None:
    """Decrement every positive inhibition counter by exactly one."""
    for cell in graph.cells:
        for kind, c in cell.inhibition.items():
            if c > 0:
                cell.inhibition[kind] = c - 1


def graph_snapshot(graph: DevGraph, step: int | None = None) -> dict:
    """JSON-serialisable record of the full graph state. Schema:

    ``{"step": int|None, "max_cells": int,
       "cells": [{"id", "role", "lineage", "intrinsic", "extrinsic",
                  "inhibition": {kind: counter}}],
       "edges": [{"src", "dst", "weight"}]  # sorted by (src, dst)}``
    """
    return {
        "step": step,
        "max_cells": graph.max_cells,
        "cells": [
            {
                "id": c.id,
                "role": c.role,
                "lineage": c.lineage,
                "intrinsic": [float(v) for v in c.intrinsic],
                "extrinsic": [float(v) for v in c.extrinsic],
                "inhibition": dict(c.inhibition),
            }
            for c in graph.cells
        ],
        "edges": [
            {"src": s, "dst": d, "weight": float(w)}
            for (s, d), w in sorted(graph.edges.items())
        ],
    }
