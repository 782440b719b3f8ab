import numpy as np
import pytest

import ags.graph as G
import ags.ranking as R
import ags.sampling as SA


def star_graph(d):
    return G.from_edges(d + 1, [0] * d, list(range(1, d + 1)), directed=False)


def star_table(d, kind="uniform", **kw):
    g = star_graph(d)
    x = np.random.default_rng(0).normal(size=(d + 1, 3))
    rt = R.rank_by_similarity(g, x, pmf=R.PmfSpec(kind=kind, **kw))
    return g, rt


class TestRngFor:
    def test_reproducible(self):
        a = SA.rng_for(7, 1, 2).random(5)
        b = SA.rng_for(7, 1, 2).random(5)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = SA.rng_for(7, 0).random(5)
        b = SA.rng_for(7, 1).random(5)
        assert not np.array_equal(a, b)


class TestSampleNeighbors:
    def test_degree_one(self):
        g, rt = star_table(1)
        rng = SA.rng_for(1)
        for replace in (True, False):
            out = SA.sample_neighbors(rt, 0, 1, replace, rng)
            assert out.tolist() == [1]

    def test_zero_k_and_isolated(self):
        g = G.from_edges(3, [0], [1], directed=False)
        x = np.ones((3, 2))
        rt = R.rank_by_similarity(g, x)
        rng = SA.rng_for(2)
        assert SA.sample_neighbors(rt, 0, 0, True, rng).size == 0
        assert SA.sample_neighbors(rt, 2, 5, True, rng).size == 0

    def test_negative_k(self):
        _, rt = star_table(2)
        with pytest.raises(ValueError, match="nonnegative"):
            SA.sample_neighbors(rt, 0, -1, True, SA.rng_for(0))

    def test_uniform_frequencies(self):
        _, rt = star_table(4)
        draws = SA.sample_neighbors(rt, 0, 100_000, True, SA.rng_for(3))
        for leaf in range(1, 5):
            freq = np.mean(draws == leaf)
            assert abs(freq - 0.25) < 0.01

    def test_step_tier_frequencies(self):
        _, rt = star_table(10, kind="step")
        ids, probs = rt.row(0)
        draws = SA.sample_neighbors(rt, 0, 100_000, True, SA.rng_for(4))
        # two tier-1 entries at mass 4/18 each
        for rank in (0, 1):
            freq = np.mean(draws == ids[rank])
            assert probs[rank] == pytest.approx(4 / 18)
            assert abs(freq - 4 / 18) < 0.01

    def test_total_variation_bound(self):
        for kind in ("step", "linear", "exponential", "uniform"):
            _, rt = star_table(6, kind=kind)
            ids, probs = rt.row(0)
            draws = SA.sample_neighbors(
                rt, 0, 100_000, True, SA.rng_for(hash7(kind))
            )
            emp = np.array([np.mean(draws == v) for v in ids])
            tv = 0.5 * np.abs(emp - probs).sum()
            assert tv < 3.0 * np.sqrt(6 / 100_000)

    def test_without_replacement_full_degree_is_permutation(self):
        g, rt = star_table(8, kind="step")
        rng = SA.rng_for(5)
        for _ in range(20):
            out = SA.sample_neighbors(rt, 0, 8, False, rng)
            assert sorted(out.tolist()) == list(range(1, 9))

    def test_without_replacement_distinct_and_weighted(self):
        _, rt = star_table(10, kind="exponential")
        ids, _ = rt.row(0)
        top, bottom = ids[0], ids[-1]
        rng = SA.rng_for(6)
        hits_top = hits_bottom = 0
        for _ in range(4000):
            out = SA.sample_neighbors(rt, 0, 3, False, rng)
            assert len(set(out.tolist())) == 3
            hits_top += top in out
            hits_bottom += bottom in out
        assert hits_top > hits_bottom * 2

    def test_exclude_self(self):
        g = G.from_edges(2, [0, 0], [0, 1], directed=False)
        x = np.ones((2, 2))
        rt = R.rank_by_similarity(g, x)
        rng = SA.rng_for(7)
        out = SA.sample_neighbors(rt, 0, 50, True, rng, exclude_self=True)
        assert np.all(out == 1)


def hash7(s):
    import zlib

    return zlib.crc32(s.encode())


def random_graph(rng, n=15, m=35):
    src = rng.integers(0, n, size=m)
    dst = rng.integers(0, n, size=m)
    return G.from_edges(n, src, dst, directed=False)


class TestNodeSampleKhop:
    def test_empty_seeds(self):
        g, rt = star_table(3)
        with pytest.raises(ValueError, match="empty seed"):
            SA.node_sample_khop(g, rt, [], [2], SA.rng_for(0))

    def test_seed_out_of_range(self):
        g, rt = star_table(3)
        with pytest.raises(ValueError, match="range"):
            SA.node_sample_khop(g, rt, [9], [2], SA.rng_for(0))

    def test_full_fanout_gives_two_hop_egonet(self):
        rng = np.random.default_rng(1)
        g = random_graph(rng)
        x = rng.normal(size=(g.n, 3))
        rt = R.rank_by_similarity(g, x)
        dmax = int(g.degrees().max())
        sub = SA.node_sample_khop(g, rt, [0], [dmax, dmax], SA.rng_for(1))
        # oracle: breadth-first 2-hop ball around the seed
        ball = {0}
        frontier = {0}
        for _ in range(2):
            frontier = {
                int(v) for u in frontier for v in g.neighbors(u)
            }
            ball |= frontier
        assert set(sub.parent_ids.tolist()) == ball

    def test_single_seed_single_fanout(self):
        g, rt = star_table(5)
        sub = SA.node_sample_khop(g, rt, [1], [1], SA.rng_for(2))
        assert sub.n <= 2

    def test_edges_exist_in_parent(self):
        rng = np.random.default_rng(3)
        g = random_graph(rng)
        x = rng.normal(size=(g.n, 3))
        rt = R.rank_by_similarity(g, x)
        sub = SA.node_sample_khop(g, rt, [0, 3, 5], [3, 2], SA.rng_for(3))
        for a, b in sub.graph.edge_array():
            u, v = int(sub.parent_ids[a]), int(sub.parent_ids[b])
            assert g.has_edge(u, v)

    def test_layers_recorded(self):
        rng = np.random.default_rng(4)
        g = random_graph(rng)
        x = rng.normal(size=(g.n, 3))
        rt = R.rank_by_similarity(g, x)
        sub = SA.node_sample_khop(g, rt, [2], [3, 2], SA.rng_for(4))
        assert sub.layers is not None and len(sub.layers) == 2
        for layer in sub.layers:
            assert layer.shape[1] == 2
            assert np.all(layer < sub.n)

    def test_dual_channel_same_seeds(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng)
        x = rng.normal(size=(g.n, 3))
        sim = R.rank_by_similarity(g, x)
        div = R.rank_by_diversity(g, x)
        subs = SA.node_sample_khop(g, [sim, div], [1, 4], [2, 2], SA.rng_for(5))
        assert len(subs) == 2
        for sub in subs:
            assert {1, 4} <= set(sub.parent_ids[sub.seeds_local()].tolist())

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        g = random_graph(rng)
        x = rng.normal(size=(g.n, 3))
        rt = R.rank_by_similarity(g, x)
        a = SA.node_sample_khop(g, rt, [0, 1], [3, 3], SA.rng_for(6))
        b = SA.node_sample_khop(g, rt, [0, 1], [3, 3], SA.rng_for(6))
        assert np.array_equal(a.parent_ids, b.parent_ids)
        assert np.array_equal(a.graph.targets, b.graph.targets)


class TestWeightedRandomWalk:
    def test_path_end_single_step(self):
        g = G.from_edges(3, [0, 1], [1, 2], directed=False)
        x = np.ones((3, 2))
        rt = R.rank_by_similarity(g, x)
        sub = SA.weighted_random_walk(g, rt, [0], 1, SA.rng_for(0))
        assert set(sub.parent_ids.tolist()) == {0, 1}
        assert sub.graph.m >= 1

    def test_zero_steps(self):
        g, rt = star_table(3)
        sub = SA.weighted_random_walk(g, rt, [0, 2], 0, SA.rng_for(1))
        assert set(sub.parent_ids.tolist()) == {0, 2}
        assert sub.graph.m == 0

    def test_dead_end_truncates(self):
        g = G.from_edges(3, [0], [1], directed=False)
        x = np.ones((3, 2))
        rt = R.rank_by_similarity(g, x)
        sub = SA.weighted_random_walk(g, rt, [2], 5, SA.rng_for(2))
        assert sub.parent_ids.tolist() == [2]
        assert sub.graph.m == 0

    def test_negative_steps(self):
        g, rt = star_table(2)
        with pytest.raises(ValueError, match="nonnegative"):
            SA.weighted_random_walk(g, rt, [0], -1, SA.rng_for(3))

    def test_star_leaf_frequencies(self):
        _, rt = star_table(5, kind="step")
        g = star_graph(5)
        ids, probs = rt.row(0)
        rng = SA.rng_for(4)
        counts = dict.fromkeys(ids.tolist(), 0)
        trials = 100_000
        for _ in range(trials):
            sub = SA.weighted_random_walk(g, rt, [0], 1, rng)
            leaf = [p for p in sub.parent_ids.tolist() if p != 0]
            counts[leaf[0]] += 1
        for v, p in zip(ids.tolist(), probs):
            assert abs(counts[v] / trials - p) < 0.01


class TestDisjointDecompose:
    def test_tree_single_forest(self):
        g = G.from_edges(5, [0, 0, 1, 1], [1, 2, 3, 4], directed=False)
        w = np.ones(g.m)
        col = SA.disjoint_decompose(g, w, 1)
        assert col.forest_count == 1
        assert col.part_edges(0).shape[0] == 4
        assert col.part_edges(1).shape[0] == 0  # residual empty
        assert col.flags == []
        assert col.parts[-1][1] == 0.0

    def test_k4_first_forest_is_max_spanning_tree(self):
        # complete graph on 4 vertices with distinct weights
        rng = np.random.default_rng(5)
        edges = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        weights = rng.permutation([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        wmap = {e: w for e, w in zip(edges, weights)}
        src = [e[0] for e in edges]
        dst = [e[1] for e in edges]
        g = G.from_edges(4, src, dst, directed=False)
        w_dir = np.zeros(g.m)
        pairs = g.edge_array()
        for i, (a, b) in enumerate(pairs):
            key = (min(int(a), int(b)), max(int(a), int(b)))
            w_dir[i] = wmap[key]
        col = SA.disjoint_decompose(g, w_dir, 2)

        # oracle: enumerate all 16 spanning trees of K4
        import itertools

        best_w, best_tree = -1.0, None
        for tree in itertools.combinations(edges, 3):
            uf = {v: v for v in range(4)}

            def find(a):
                while uf[a] != a:
                    a = uf[a]
                return a

            ok = True
            for a, b in tree:
                ra, rb = find(a), find(b)
                if ra == rb:
                    ok = False
                    break
                uf[rb] = ra
            if ok:
                tw = sum(wmap[e] for e in tree)
                if tw > best_w:
                    best_w, best_tree = tw, set(tree)
        got = {tuple(e) for e in col.part_edges(0).tolist()}
        assert got == best_tree
        assert col.parts[0][1] == pytest.approx(best_w)

    def test_partition_property(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(3, 15))
            m = int(rng.integers(2, 30))
            g = G.from_edges(
                n, rng.integers(0, n, size=m), rng.integers(0, n, size=m),
                directed=False,
            )
            w = rng.uniform(0.1, 2.0, size=g.m)
            k = int(rng.integers(1, 4))
            col = SA.disjoint_decompose(g, w, k)
            pairs = g.edge_array()
            orig = {
                (min(int(a), int(b)), max(int(a), int(b))) for a, b in pairs
            }
            seen = set()
            for i in range(len(col.parts)):
                part = {tuple(e) for e in col.part_edges(i).tolist()}
                assert not (part & seen)  # pairwise disjoint
                seen |= part
            assert seen == orig

    def test_exhaustion_flag(self):
        g = G.from_edges(3, [0], [1], directed=False)
        col = SA.disjoint_decompose(g, np.ones(g.m), 3)
        assert col.forest_count == 1
        assert any(f.startswith("exhausted_after=1") for f in col.flags)

    def test_self_loops_go_to_residual(self):
        g = G.from_edges(3, [0, 1, 2], [1, 2, 2], directed=False)
        col = SA.disjoint_decompose(g, np.ones(g.m), 1)
        res = {tuple(e) for e in col.part_edges(1).tolist()}
        assert (2, 2) in res

    def test_weight_floor(self):
        g = G.from_edges(2, [0], [1], directed=False)
        col = SA.disjoint_decompose(g, np.full(g.m, 1e-9), 2)
        assert col.parts[0][1] == pytest.approx(2e-3)

    def test_weight_validation(self):
        g = G.from_edges(2, [0], [1], directed=False)
        with pytest.raises(ValueError, match="one weight"):
            SA.disjoint_decompose(g, np.ones(g.m + 1), 1)
        with pytest.raises(ValueError, match="nonnegative"):
            SA.disjoint_decompose(g, -np.ones(g.m), 1)


class TestDisjointSample:
    def manual_collection(self):
        g = G.from_edges(
            6, [0, 2, 4], [1, 3, 5], directed=False
        )  # three disjoint edges
        col = SA.disjoint_decompose(g, np.array([3.0, 3.0, 1.0, 1.0, 2.0, 2.0]), 3)
        return g, col

    def test_full_reunion(self):
        g, col = self.manual_collection()
        sub = SA.disjoint_subgraph_sample(
            col, col.forest_count, 1.0, SA.rng_for(0)
        )
        pairs = g.edge_array()
        orig = {(min(int(a), int(b)), max(int(a), int(b))) for a, b in pairs}
        got = {
            tuple(sorted(sub.parent_ids[list(e)].tolist()))
            for e in sub.graph.edge_array()
        }
        assert got == orig

    def test_single_forest_no_residual(self):
        g = G.from_edges(3, [0, 1], [1, 2], directed=False)
        col = SA.disjoint_decompose(g, np.ones(g.m), 1)
        sub = SA.disjoint_subgraph_sample(col, 1, 0.0, SA.rng_for(1))
        assert {
            tuple(sorted(sub.parent_ids[list(e)].tolist()))
            for e in sub.graph.edge_array()
        } == {(0, 1), (1, 2)}

    def test_weight_proportional_frequency(self):
        # triangle splits into a weight-3 forest and a weight-1 forest
        g = G.from_edges(3, [0, 0, 1], [1, 2, 2], directed=False)
        w = np.zeros(g.m)
        pairs = g.edge_array()
        for i, (a, b) in enumerate(pairs):
            key = (min(int(a), int(b)), max(int(a), int(b)))
            w[i] = {(0, 1): 2.0, (0, 2): 1.0, (1, 2): 1.0}[key]
        col = SA.disjoint_decompose(g, w, 2)
        assert [w for _, w in col.parts[:-1]] == [3.0, 1.0]
        heavy = {tuple(e) for e in col.part_edges(0).tolist()}
        rng = SA.rng_for(2)
        trials = 100_000
        hits = 0
        for _ in range(trials):
            sub = SA.disjoint_subgraph_sample(col, 1, 0.0, rng)
            got = {
                tuple(sorted(sub.parent_ids[list(e)].tolist()))
                for e in sub.graph.edge_array()
            }
            hits += got == heavy
        assert abs(hits / trials - 0.75) < 0.01

    def test_invalid_fraction(self):
        _, col = self.manual_collection()
        with pytest.raises(ValueError, match="fraction"):
            SA.disjoint_subgraph_sample(col, 1, 1.5, SA.rng_for(3))

    def test_k_exceeds_forests(self):
        _, col = self.manual_collection()
        with pytest.raises(ValueError, match="exceeds"):
            SA.disjoint_subgraph_sample(col, 9, 0.0, SA.rng_for(4))


class TestEdgeWeightsFromTable:
    def test_masses_align(self):
        g, rt = star_table(4, kind="step")
        w = SA.edge_weights_from_table(g, rt)
        assert w.shape == (g.m,)
        # center row masses are the pmf values in neighbor order
        ids, probs = rt.row(0)
        lookup = {int(v): float(p) for v, p in zip(ids, probs)}
        for i, v in enumerate(g.neighbors(0)):
            assert w[int(g.offsets[0]) + i] == lookup[int(v)]
