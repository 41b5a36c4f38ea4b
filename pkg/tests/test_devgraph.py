import numpy as np
import pytest

from grownet.devgraph import (
    DIFFERENTIATE,
    GROW,
    ROLE_ACTION,
    ROLE_HIDDEN,
    ROLE_OBSERVATION,
    UPDATE_EDGE,
    GraphFull,
    add_cell,
    graph_snapshot,
    init_graph,
    neighbors,
    set_edge,
    tick_inhibition,
)
from grownet.nn_core import ContractError


def test_init_graph_one_hot_intrinsics():
    g = init_graph(2, 1, np.random.default_rng(0))
    assert g.n_cells == 3
    expected = np.eye(3)
    for i, cell in enumerate(g.cells):
        assert np.array_equal(cell.intrinsic, expected[i])
        assert cell.lineage == i
        assert all(v == 0 for v in cell.inhibition.values())


def test_init_graph_cartpole_shape():
    g = init_graph(4, 1, np.random.default_rng(0))
    assert g.n_cells == 5
    assert all(len(c.intrinsic) == 5 for c in g.cells)
    # founders are seeded fully connected (every ordered pair, no self-loops)
    assert len(g.edges) == 5 * 4
    assert all(w == 0.0 for w in g.edges.values())
    assert all(s != d for (s, d) in g.edges)


def test_init_graph_roles_in_construction_order():
    g = init_graph(3, 2, np.random.default_rng(1))
    roles = [c.role for c in g.cells]
    assert roles == [ROLE_OBSERVATION] * 3 + [ROLE_ACTION] * 2


def test_init_graph_deterministic():
    a = init_graph(4, 2, np.random.default_rng(7))
    b = init_graph(4, 2, np.random.default_rng(7))
    for ca, cb in zip(a.cells, b.cells):
        assert np.array_equal(ca.extrinsic, cb.extrinsic)
    assert a.edges == b.edges


def test_init_graph_extrinsic_range_and_length():
    g = init_graph(4, 1, np.random.default_rng(3))
    for c in g.cells:
        assert c.extrinsic.shape == (8,)
        assert np.all(np.abs(c.extrinsic) <= 1.0)


def test_init_graph_rejects_bad_dims():
    with pytest.raises(ContractError):
        init_graph(0, 1, np.random.default_rng(0))
    with pytest.raises(ContractError):
        init_graph(1, 1, np.random.default_rng(0), max_cells=1)


def test_add_cell_inherits_identity():
    g = init_graph(2, 1, np.random.default_rng(0))
    child = add_cell(g, 1, edge_weight=0.25)
    c = g.cell(child)
    assert np.array_equal(c.intrinsic, [0.0, 1.0, 0.0])
    assert np.array_equal(c.extrinsic, g.cell(1).extrinsic)
    assert c.extrinsic is not g.cell(1).extrinsic  # copied, not aliased
    assert c.lineage == 1
    assert c.role == ROLE_HIDDEN
    assert g.edges[(1, child)] == 0.25
    assert all(v == 0 for v in c.inhibition.values())


def test_add_cell_preserves_lineage_multiset():
    g = init_graph(2, 1, np.random.default_rng(0))
    add_cell(g, 0, 0.0)
    grand = add_cell(g, 3, 0.0)
    assert g.cell(grand).lineage == 0
    lineages = sorted(c.lineage for c in g.cells)
    assert lineages == [0, 0, 0, 1, 2]


def test_add_cell_respects_cap():
    g = init_graph(2, 1, np.random.default_rng(0), max_cells=4)
    add_cell(g, 0, 0.0)
    before = graph_snapshot(g)
    with pytest.raises(GraphFull):
        add_cell(g, 0, 0.0)
    assert graph_snapshot(g) == before  # graph unchanged


def test_add_cell_missing_parent():
    g = init_graph(2, 1, np.random.default_rng(0))
    with pytest.raises(ContractError):
        add_cell(g, 99, 0.0)


def test_set_edge_upserts():
    g = init_graph(2, 1, np.random.default_rng(0))
    set_edge(g, 0, 1, 0.5)
    set_edge(g, 0, 1, -0.75)
    assert g.edges[(0, 1)] == -0.75
    with pytest.raises(ContractError):
        set_edge(g, 0, 1, float("nan"))
    with pytest.raises(ContractError):
        set_edge(g, 0, 5, 1.0)


def test_neighbors_union_of_in_and_out():
    g = init_graph(2, 2, np.random.default_rng(0))
    g.edges.clear()
    for s in g.adj.values():
        s.clear()
    set_edge(g, 0, 1, 1.0)
    set_edge(g, 2, 0, 1.0)
    assert neighbors(g, 0) == {1, 2}
    assert neighbors(g, 1) == {0}
    assert neighbors(g, 3) == set()


def test_tick_inhibition_counts_down_and_saturates():
    g = init_graph(2, 1, np.random.default_rng(0))
    g.cell(0).inhibition[GROW] = 2
    tick_inhibition(g)
    assert g.cell(0).inhibition[GROW] == 1
    tick_inhibition(g)
    assert g.cell(0).inhibition[GROW] == 0
    tick_inhibition(g)
    assert g.cell(0).inhibition[GROW] == 0  # stays at zero
    assert g.cell(0).inhibition[DIFFERENTIATE] == 0
    assert g.cell(0).inhibition[UPDATE_EDGE] == 0


def test_random_growth_keeps_invariants():
    # lineage conservation, one-hot integrity, monotone growth, and the cap
    rng = np.random.default_rng(11)
    g = init_graph(3, 2, rng, max_cells=30)
    founders = set(range(5))
    prev_count = g.n_cells
    for _ in range(200):
        parent = int(rng.integers(g.n_cells))
        try:
            add_cell(g, parent, float(rng.normal()))
        except GraphFull:
            pass
        if rng.random() < 0.5:
            s, d = rng.integers(g.n_cells, size=2)
            if s != d:
                set_edge(g, int(s), int(d), float(rng.normal()))
        assert g.n_cells >= prev_count
        prev_count = g.n_cells
        assert g.n_cells <= g.max_cells
    assert g.n_cells == 30
    for c in g.cells:
        assert c.lineage in founders
        one_hot = np.zeros(5)
        one_hot[c.lineage] = 1.0
        assert np.array_equal(c.intrinsic, one_hot)
    # observation/action cells still present, in order
    roles = [c.role for c in g.cells[:5]]
    assert roles == [ROLE_OBSERVATION] * 3 + [ROLE_ACTION] * 2


def test_snapshot_roundtrip_shape():
    g = init_graph(2, 1, np.random.default_rng(5))
    add_cell(g, 0, 0.5)
    snap = graph_snapshot(g, step=3)
    assert snap["step"] == 3
    assert len(snap["cells"]) == 4
    assert {tuple(e[k] for k in ("src", "dst")) for e in snap["edges"]} == set(g.edges)
    edge_keys = [(e["src"], e["dst"]) for e in snap["edges"]]
    assert edge_keys == sorted(edge_keys)
    import json

    json.dumps(snap)  # serialisable
