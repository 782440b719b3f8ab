"""Drawing training structures from rank tables.

Samplers never look at raw similarity scores: every draw follows the
PMF a RankTable assigned from rank positions. All routines are
deterministic functions of their inputs and the generator handed in;
stream-splitting helpers let callers hand independent, reproducible
generators to workers, epochs, and batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, RankTable, Subgraph, build_subgraph

RESIDUAL_EDGE_FRAC = 0.05


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Generator for a (seed, stream...) coordinate, e.g. worker/epoch/batch.

    Distinct stream tuples give statistically independent generators;
    the same tuple always reproduces the same draws.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.default_rng(ss)


def sample_neighbors(
    rt: RankTable,
    u: int,
    k: int,
    replace: bool,
    rng: np.random.Generator,
    exclude_self: bool = False,
) -> np.ndarray:
    """Draw k neighbors of u from its rank-table PMF.

    With replacement: k iid draws (inverse-CDF on the cumulative
    masses). Without: min(k, d) distinct neighbors by exponential-key
    order statistics, so inclusion respects the PMF weights. A vertex
    with no neighbors yields an empty draw.
    """
    if k < 0:
        raise ValueError("sample size must be nonnegative")
    ids, probs = rt.row(u)
    if exclude_self:
        keep = ids != u
        ids, probs = ids[keep], probs[keep]
        if probs.shape[0]:
            probs = probs / probs.sum()
    d = ids.shape[0]
    if k == 0 or d == 0:
        return np.zeros(0, dtype=np.int64)
    if replace:
        cum = np.cumsum(probs)
        idx = np.searchsorted(cum, rng.random(k), side="right")
        return ids[np.minimum(idx, d - 1)]
    take = min(k, d)
    keys = -np.log(rng.random(d)) / probs
    return ids[np.argsort(keys, kind="stable")[:take]]


def node_sample_khop(
    g: Graph,
    tables,
    seeds,
    fanouts,
    rng: np.random.Generator,
    replace: bool = False,
):
    """Layered fanout expansion from the seeds, one subgraph per table.

    Each layer samples ``fanouts[i]`` neighbors of every frontier vertex
    (frontier iterated in ascending id order, so draws are reproducible)
    and the next frontier is the set of newly drawn targets. Every
    sampled edge is recorded with its layer. Passing two tables expands
    two channels over the same seed set, one after the other.
    """
    single = isinstance(tables, RankTable)
    tabs = [tables] if single else list(tables)
    if not 1 <= len(tabs) <= 2:
        raise ValueError("expected one or two rank tables")
    seed_arr = np.unique(np.asarray(list(seeds), dtype=np.int64))
    if seed_arr.size == 0:
        raise ValueError("empty seed set")
    if seed_arr.min() < 0 or seed_arr.max() >= g.n:
        raise ValueError("seed id out of range")
    fanouts = [int(f) for f in fanouts]

    outs = []
    for rt in tabs:
        frontier = seed_arr
        edges: list[tuple[int, int]] = []
        layer_arrays = []
        for k in fanouts:
            layer: list[tuple[int, int]] = []
            for u in frontier:
                for v in sample_neighbors(rt, int(u), k, replace, rng):
                    layer.append((int(u), int(v)))
            arr = np.asarray(layer, dtype=np.int64).reshape(-1, 2)
            layer_arrays.append(arr)
            edges.extend(layer)
            frontier = (
                np.unique(arr[:, 1]) if arr.size else np.zeros(0, dtype=np.int64)
            )
        outs.append(build_subgraph(g, seed_arr, edges, layers=layer_arrays))
    return outs[0] if single else outs


def weighted_random_walk(
    g: Graph,
    rt: RankTable,
    seeds,
    steps: int,
    rng: np.random.Generator,
) -> Subgraph:
    """One PMF-weighted walk per seed; the subgraph unions the walk edges.

    A dead end (vertex with no ranked neighbors) truncates that walk.
    steps = 0 returns the seeds with no edges.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    seed_arr = np.asarray(list(seeds), dtype=np.int64)
    if seed_arr.size == 0:
        raise ValueError("empty seed set")
    if seed_arr.min() < 0 or seed_arr.max() >= g.n:
        raise ValueError("seed id out of range")
    edges: list[tuple[int, int]] = []
    for s in seed_arr:
        cur = int(s)
        for _ in range(steps):
            picks = sample_neighbors(rt, cur, 1, True, rng)
            if picks.shape[0] == 0:
                break
            nxt = int(picks[0])
            edges.append((cur, nxt))
            cur = nxt
    return build_subgraph(g, seed_arr, edges)


def edge_weights_from_table(g: Graph, rt: RankTable) -> np.ndarray:
    """Per-directed-edge weights: the PMF mass of each target in its row."""
    w = np.zeros(g.m, dtype=np.float64)
    for u in range(g.n):
        lo, hi = int(g.offsets[u]), int(g.offsets[u + 1])
        if hi == lo:
            continue
        ids, probs = rt.row(u)
        nbrs = g.targets[lo:hi]
        pos = {int(v): i for i, v in enumerate(ids)}
        w[lo:hi] = probs[[pos[int(v)] for v in nbrs]]
    return w


@dataclass
class DisjointCollection:
    """Edge-disjoint forests plus the residual, which is always last.

    Part edge sets partition the parent's undirected edge set (each
    part stores one canonical direction per edge). Forest weights are
    floored at k * 1e-3; the residual weight is exactly 0.
    """

    parent: Graph
    parts: list[tuple[Subgraph, float]]
    flags: list[str]

    @property
    def forest_count(self) -> int:
        return len(self.parts) - 1

    def part_edges(self, i: int) -> np.ndarray:
        """Part i's edges as (m, 2) parent-space canonical pairs."""
        sub = self.parts[i][0]
        local = sub.graph.edge_array()
        return sub.parent_ids[local] if local.size else local


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _canonical_undirected(g: Graph, edge_weights: np.ndarray):
    """Unique (u, v, w) with u <= v; w is the max over both directions."""
    pairs = g.edge_array()
    src, dst = pairs[:, 0], pairs[:, 1]
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * g.n + hi
    uniq, inverse = np.unique(key, return_inverse=True)
    w = np.zeros(uniq.shape[0], dtype=np.float64)
    np.maximum.at(w, inverse, edge_weights)
    return uniq // g.n, uniq % g.n, w


def disjoint_decompose(
    g: Graph,
    edge_weights,
    k_parts: int,
    strategy: str = "max_spanning_tree",
) -> DisjointCollection:
    """Peel k maximum-weight spanning forests off the graph.

    Each round runs Kruskal over the edges no earlier forest took,
    ordering by (weight desc, endpoints asc) so the result is unique.
    Whatever remains, self-loops included, becomes the residual. When
    the edges run out early the collection is shorter and flagged.
    """
    if strategy != "max_spanning_tree":
        raise ValueError(f"unknown strategy: {strategy!r}")
    if k_parts < 1:
        raise ValueError("need at least one forest")
    edge_weights = np.asarray(edge_weights, dtype=np.float64)
    if edge_weights.shape != (g.m,):
        raise ValueError("need one weight per directed edge")
    if not np.all(np.isfinite(edge_weights)) or np.any(edge_weights < 0):
        raise ValueError("edge weights must be finite and nonnegative")

    us, vs, ws = _canonical_undirected(g, edge_weights)
    loops = us == vs
    remaining = np.flatnonzero(~loops)
    flags: list[str] = []
    floor = k_parts * 1e-3

    forest_edge_sets: list[np.ndarray] = []
    forest_weights: list[float] = []
    for _ in range(k_parts):
        if remaining.size == 0:
            flags.append(f"exhausted_after={len(forest_edge_sets)}")
            break
        order = remaining[
            np.lexsort((vs[remaining], us[remaining], -ws[remaining]))
        ]
        uf = _UnionFind(g.n)
        accepted = [int(e) for e in order if uf.union(int(us[e]), int(vs[e]))]
        idx = np.asarray(accepted, dtype=np.int64)
        forest_edge_sets.append(idx)
        forest_weights.append(max(float(ws[idx].sum()), floor))
        mask = np.ones(remaining.shape[0], dtype=bool)
        mask[np.isin(remaining, idx)] = False
        remaining = remaining[mask]

    residual_idx = np.concatenate([remaining, np.flatnonzero(loops)])
    residual_idx.sort()

    parts: list[tuple[Subgraph, float]] = []
    for idx, weight in zip(forest_edge_sets, forest_weights):
        edges = np.stack([us[idx], vs[idx]], axis=1)
        parts.append((build_subgraph(g, [], edges), weight))
    res_edges = np.stack([us[residual_idx], vs[residual_idx]], axis=1)
    parts.append((build_subgraph(g, [], res_edges), 0.0))
    return DisjointCollection(parent=g, parts=parts, flags=flags)


def disjoint_subgraph_sample(
    col: DisjointCollection,
    k: int,
    residual_edge_frac: float,
    rng: np.random.Generator,
) -> Subgraph:
    """Union k weight-proportionally drawn forests plus residual edges.

    Forests are drawn without replacement with probability proportional
    to their stored weights; round(frac * residual size) residual edges
    join uniformly without replacement.
    """
    if not 0.0 <= residual_edge_frac <= 1.0:
        raise ValueError("invalid fraction: must lie in [0, 1]")
    n_forests = col.forest_count
    if k > n_forests:
        raise ValueError(f"k={k} exceeds the {n_forests} non-residual parts")
    weights = np.asarray([w for _, w in col.parts[:-1]], dtype=np.float64)
    chosen: list[int] = []
    if k > 0:
        keys = -np.log(rng.random(n_forests)) / weights
        chosen = np.argsort(keys, kind="stable")[:k].tolist()

    edge_parts = [col.part_edges(i) for i in sorted(chosen)]
    residual = col.part_edges(len(col.parts) - 1)
    take = int(round(residual_edge_frac * residual.shape[0]))
    if take > 0:
        pick = rng.choice(residual.shape[0], size=take, replace=False)
        edge_parts.append(residual[np.sort(pick)])
    edges = (
        np.concatenate(edge_parts)
        if edge_parts
        else np.zeros((0, 2), dtype=np.int64)
    )
    return build_subgraph(col.parent, [], edges)
