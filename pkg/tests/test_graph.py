import io
import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trustdiff.graph import (
    DegreeSequence,
    EdgeListError,
    Graph,
    GraphError,
    gen_configuration,
    gen_random_regular,
    lognormal_degree_sequence,
    read_edge_list,
    load_edge_list,
    write_edge_list,
)


def assert_simple(g: Graph):
    adj = g.adjacency
    for i, row in enumerate(adj):
        assert i not in row
        assert len(set(row)) == len(row)
        assert row == sorted(row)
        for j in row:
            assert i in adj[j]
    assert int(g.degrees.sum()) == 2 * g.n_edges


def _stream(text: str):
    return io.BytesIO(text.encode())


class TestEdgeList:
    def test_path_of_three(self):
        g = load_edge_list(_stream("0 1\n1 2\n"))
        assert g.n == 3
        assert g.degrees.tolist() == [1, 2, 1]

    def test_duplicates_and_loops_dropped(self, caplog):
        with caplog.at_level(logging.WARNING):
            rep = read_edge_list(_stream("0 1\n1 0\n2 2\n"))
        assert rep.graph.n_edges == 1
        assert rep.duplicates == 1
        assert rep.self_loops == 1
        assert "dropped 1 duplicate" in caplog.text

    def test_compaction_first_seen(self):
        rep = read_edge_list(_stream("# header\n\n107 5\n5 9000\n"))
        assert rep.vertex_ids == [107, 5, 9000]
        assert rep.graph.edges().tolist() == [[0, 1], [1, 2]]

    def test_tabs_and_comments(self):
        g = load_edge_list(_stream("#c\n0\t1\n  # indented comment\n1   2\n"))
        assert g.n_edges == 2

    @pytest.mark.parametrize("text,line", [("0 1\n1 x\n", 2), ("0 1 2\n", 1), ("0\n", 1), ("-1 2\n", 1)])
    def test_malformed(self, text, line):
        with pytest.raises(EdgeListError) as exc:
            load_edge_list(_stream(text))
        assert exc.value.lineno == line

    def test_empty(self):
        with pytest.raises(EdgeListError):
            load_edge_list(_stream("# nothing\n\n"))

    def test_stream_left_open(self):
        s = _stream("0 1\n")
        load_edge_list(s)
        assert not s.closed

    def test_round_trip(self, tmp_path):
        g = gen_random_regular(30, 4, rng=3)
        path = tmp_path / "g.txt"
        write_edge_list(g, path)
        rep = read_edge_list(path)
        ids = np.array(rep.vertex_ids)
        back = Graph.from_edges(g.n, ids[rep.graph.edges()])
        assert back == g

    def test_ego_facebook_if_present(self):
        import os
        path = os.environ.get("TRUSTDIFF_EGO_FACEBOOK")
        if not path or not os.path.exists(path):
            pytest.skip("ego-Facebook edge list not available")
        g = load_edge_list(path)
        assert (g.n, g.n_edges) == (4039, 88234)


class TestGraph:
    def test_from_edges_rejects(self):
        with pytest.raises(GraphError):
            Graph.from_edges(3, [(0, 0)])
        with pytest.raises(GraphError):
            Graph.from_edges(3, [(0, 1), (1, 0)])
        with pytest.raises(GraphError):
            Graph.from_edges(2, [(0, 2)])

    def test_neighbor_sum_with_isolated(self):
        g = Graph.from_edges(5, [(0, 1), (1, 2)])
        x = np.array([1, 0, 1, 1, 1])
        assert g.neighbor_sum(x).tolist() == [0, 2, 0, 0, 0]

    def test_arrays_read_only(self):
        g = Graph.from_edges(3, [(0, 1)])
        with pytest.raises(ValueError):
            g.indices[0] = 2

    def test_degree_sequence(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (1, 3)])
        ds = g.degree_sequence()
        assert ds.counts == {1: 3, 3: 1}
        assert ds.mean_degree == 1.5


class TestGenerators:
    def test_k4(self):
        g = gen_random_regular(4, 3, rng=0)
        assert g.edges().tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]

    def test_ten_regular_thousand(self):
        g = gen_random_regular(1000, 10, rng=1)
        assert set(g.degrees.tolist()) == {10}
        assert g.n_edges == 5000
        assert_simple(g)

    @pytest.mark.parametrize("n,k", [(3, 3), (5, 3), (4, 5)])
    def test_infeasible_regular(self, n, k):
        with pytest.raises(GraphError):
            gen_random_regular(n, k, rng=0)

    def test_two_classes(self):
        g = gen_configuration({3: 300, 7: 100}, rng=2)
        assert g.n == 400
        assert g.degree_sequence().counts == {3: 300, 7: 100}
        assert g.degree_sequence().mean_degree == 4
        assert g.degrees[:300].tolist() == [3] * 300
        assert_simple(g)

    def test_single_edge(self):
        assert gen_configuration({1: 2}, rng=0).edges().tolist() == [[0, 1]]

    @pytest.mark.parametrize("counts", [{3: 1}, {3: 2}, {4: 2, 1: 1}])
    def test_non_graphical(self, counts):
        with pytest.raises(GraphError):
            gen_configuration(counts, rng=0)

    def test_isolated_vertices_allowed(self):
        g = gen_configuration({0: 3, 2: 3}, rng=0)
        assert g.degrees.tolist() == [0, 0, 0, 2, 2, 2]

    def test_same_seed_same_graph(self):
        a = gen_configuration({3: 30, 7: 10}, rng=5)
        b = gen_configuration({3: 30, 7: 10}, rng=5)
        c = gen_configuration({3: 30, 7: 10}, rng=6)
        assert a.canonical_bytes() == b.canonical_bytes()
        assert a != c

    def test_lognormal_sequence(self):
        s = lognormal_degree_sequence(2000, 40, 1.0, 200, rng=1)
        assert s.n == 2000
        assert s.degree_sum % 2 == 0
        assert max(s.counts) <= 200 and min(s.counts) >= 1
        assert 30 < s.mean_degree < 45

    @given(st.dictionaries(st.integers(1, 6), st.integers(1, 8), min_size=1, max_size=3),
           st.integers(0, 2 ** 32 - 1))
    def test_configuration_property(self, counts, seed):
        seq = DegreeSequence(counts)
        if not seq.is_graphical():
            with pytest.raises(GraphError):
                gen_configuration(seq, rng=seed)
            return
        g = gen_configuration(seq, rng=seed)
        assert g.degree_sequence().counts == seq.counts
        assert_simple(g)


class TestErdosGallai:
    def test_against_networkx(self):
        nx = pytest.importorskip("networkx")
        rng = np.random.default_rng(0)
        for _ in range(300):
            d = rng.integers(0, 7, size=rng.integers(1, 9)).tolist()
            ks, cs = np.unique(d, return_counts=True)
            seq = DegreeSequence(dict(zip(ks.tolist(), cs.tolist())))
            assert seq.is_graphical() == nx.is_graphical(d), d
