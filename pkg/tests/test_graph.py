import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasebal.graph import (
    build_graph,
    full_edges,
    is_connected,
    laplacian,
    path_edges,
    ring_edges,
    topology_edges,
)


def _random_graph_strategy():
    return st.integers(min_value=1, max_value=10).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.sets(
                st.tuples(
                    st.integers(0, n - 1), st.integers(0, n - 1)
                ).filter(lambda e: e[0] != e[1]),
                max_size=12,
            ),
        )
    )


def test_path_graph_laplacian_matches_hand_computed():
    g = build_graph(3, [(0, 1), (1, 2)], 1.0)
    expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    assert np.array_equal(laplacian(g), expected)


def test_nine_node_ring_is_connected_with_degree_two():
    g = build_graph(9, ring_edges(9), 1.0)
    assert is_connected(g)
    assert g.max_degree == 2
    assert len(g.edges) == 9


def test_two_components_are_not_connected():
    g = build_graph(4, [(0, 1), (2, 3)], 1.0)
    assert not is_connected(g)


def test_single_node_graph_is_connected():
    assert is_connected(build_graph(1, [], 1.0))


def test_edgeless_multi_node_graph_is_not_connected():
    assert not is_connected(build_graph(3, [], 1.0))


def test_duplicate_and_reversed_edges_collapse():
    g = build_graph(3, [(0, 1), (1, 0), (0, 1), (1, 2)], 1.0)
    assert g.edges == frozenset({(0, 1), (1, 2)})


def test_self_loop_rejected():
    with pytest.raises(ValueError, match="self-loop"):
        build_graph(3, [(1, 1)], 1.0)


def test_out_of_range_edge_rejected():
    with pytest.raises(ValueError, match="out of range"):
        build_graph(3, [(0, 3)], 1.0)


def test_nonpositive_node_count_rejected():
    with pytest.raises(ValueError, match="at least one node"):
        build_graph(0, [], 1.0)


def test_nonpositive_coupling_gain_rejected():
    with pytest.raises(ValueError, match="coupling gain"):
        build_graph(2, [(0, 1)], 0.0)


def test_alpha_scales_adjacency_and_laplacian():
    g1 = build_graph(3, [(0, 1), (1, 2)], 1.0)
    g2 = build_graph(3, [(0, 1), (1, 2)], 2.5)
    assert np.allclose(g2.adjacency, 2.5 * g1.adjacency)
    assert np.allclose(laplacian(g2), 2.5 * laplacian(g1))


def test_csr_neighbors_agree_with_neighbor_lists():
    g = build_graph(5, [(0, 1), (0, 4), (1, 2), (3, 4)], 1.0)
    ptr, idx = g.csr_neighbors
    for i, nbrs in enumerate(g.neighbor_lists):
        assert tuple(idx[ptr[i] : ptr[i + 1]]) == nbrs


def test_named_topologies():
    assert topology_edges("path", 4) == [(0, 1), (1, 2), (2, 3)]
    assert set(topology_edges("ring", 4)) == {(0, 1), (1, 2), (2, 3), (3, 0)}
    assert len(topology_edges("full", 5)) == 10


def test_ring_below_three_nodes_degenerates_to_path():
    assert ring_edges(2) == [(0, 1)]
    assert ring_edges(1) == []


def test_unknown_topology_lists_known_names():
    with pytest.raises(ValueError, match="full, path, ring"):
        topology_edges("torus", 5)


def test_full_topology_connects_everything():
    g = build_graph(6, full_edges(6), 1.0)
    assert g.max_degree == 5
    assert is_connected(g)


@given(_random_graph_strategy())
def test_laplacian_rows_sum_to_zero_and_symmetric(params):
    n, edges = params
    g = build_graph(n, edges, 1.3)
    lap = laplacian(g)
    assert np.allclose(lap.sum(axis=1), 0.0)
    assert np.array_equal(lap, lap.T)


@given(_random_graph_strategy())
def test_laplacian_is_positive_semidefinite(params):
    n, edges = params
    g = build_graph(n, edges, 0.7)
    eigvals = np.linalg.eigvalsh(laplacian(g))
    assert eigvals.min() >= -1e-9
