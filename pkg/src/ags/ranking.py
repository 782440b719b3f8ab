"""Neighbor ranking and rank-to-probability conversion.

Two ranking modes produce a RankTable: ``similar`` sorts each vertex's
neighbors by feature similarity to the vertex, ``diverse`` orders them
by greedy submodular marginal gain over the egonet. Probabilities are
then assigned from the rank alone (never from raw scores, which can be
arbitrarily skewed), so both modes share the same PMF machinery.

Ranking is local to each vertex: rows are independent and can be built
by any number of workers with bit-identical results.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, RankTable, make_rank_table
from .similarity import SIM_KINDS, SiameseModel, pairwise_kernel, similarity_row

PMF_KINDS = ("step", "linear", "exponential", "uniform")
SUBMODULAR_KINDS = (
    "facility_location",
    "max_coverage",
    "feature_based",
    "graph_cut",
)


@dataclass(frozen=True)
class PmfSpec:
    """How a rank position maps to sampling probability.

    step gives the top floor(k1*d) ranks weight lambda1, the next
    floor(k2*d) ranks lambda2, and the rest lambda3. linear decays as
    d..1, exponential as rate**rank; both get a flat ``eps`` added per
    entry before normalization so no neighbor's mass can underflow to 0.
    """

    kind: str = "step"
    k1: float = 0.2
    k2: float = 0.2
    lambdas: tuple[float, float, float] = (4.0, 2.0, 1.0)
    rate: float = 0.5
    eps: float = 1e-6

    def __post_init__(self) -> None:
        if self.kind not in PMF_KINDS:
            raise ValueError(f"unknown pmf kind: {self.kind!r}")
        if not (0.0 <= self.k1 <= 1.0 and 0.0 <= self.k2 <= 1.0):
            raise ValueError("k1 and k2 must lie in [0, 1]")
        if self.k1 + self.k2 > 1.0:
            raise ValueError("k1 + k2 must not exceed 1")
        l1, l2, l3 = self.lambdas
        if not (l1 > l2 > l3 > 0.0):
            raise ValueError("need lambda1 > lambda2 > lambda3 > 0")
        if not (0.0 < self.rate < 1.0):
            raise ValueError("decay rate must lie in (0, 1)")
        if self.eps < 0.0:
            raise ValueError("floor mass cannot be negative")

    def params(self) -> tuple[float, float, float, float, float, float]:
        return (self.k1, self.k2, *self.lambdas, self.rate)


def pmf_from_ranks(d: int, spec: PmfSpec) -> np.ndarray:
    """Probability for each of ``d`` rank positions, best rank first."""
    if d < 1:
        raise ValueError("need at least one ranked entry")
    if spec.kind == "uniform":
        return np.full(d, 1.0 / d)
    if spec.kind == "step":
        # the 1e-9 nudge keeps floor() from dropping a tier when k*d is
        # mathematically integral but lands just below it in floats
        n1 = int(math.floor(spec.k1 * d + 1e-9))
        n2 = int(math.floor(spec.k2 * d + 1e-9))
        l1, l2, l3 = spec.lambdas
        w = np.full(d, l3)
        w[:n1] = l1
        w[n1 : n1 + n2] = l2
    elif spec.kind == "linear":
        w = np.arange(d, 0, -1, dtype=np.float64) + spec.eps
    else:  # exponential
        w = spec.rate ** np.arange(1, d + 1, dtype=np.float64) + spec.eps
    return w / w.sum()


@dataclass
class SubmodularFn:
    """A set-function family over a fixed candidate universe.

    ``kernel`` (square, symmetric, nonnegative) backs facility_location
    and graph_cut; ``features`` (rows per candidate, nonnegative) backs
    max_coverage and feature_based. ``lam`` is the graph-cut trade-off.
    """

    kind: str
    kernel: np.ndarray | None = None
    features: np.ndarray | None = None
    lam: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in SUBMODULAR_KINDS:
            raise ValueError(f"unknown submodular kind: {self.kind!r}")
        if self.kind in ("facility_location", "graph_cut"):
            k = self.kernel
            if k is None or k.ndim != 2 or k.shape[0] != k.shape[1]:
                raise ValueError(f"{self.kind} requires a square kernel")
            if np.any(k < 0.0):
                raise ValueError(f"{self.kind} requires a nonnegative kernel")
        else:
            f = self.features
            if f is None or f.ndim != 2:
                raise ValueError(f"{self.kind} requires a feature matrix")
            if np.any(f < 0.0):
                raise ValueError(f"{self.kind} requires nonnegative features")

    @property
    def size(self) -> int:
        if self.kernel is not None:
            return int(self.kernel.shape[0])
        return int(self.features.shape[0])


class _FacilityState:
    # best[y] = max over chosen x of kernel[x, y]; empty set scores 0,
    # which makes the first gain a plain row sum on nonneg kernels
    def __init__(self, fn: SubmodularFn) -> None:
        self.k = fn.kernel
        self.best = np.zeros(fn.kernel.shape[0])

    def gain(self, v: int) -> float:
        return float(np.maximum(self.k[v] - self.best, 0.0).sum())

    def add(self, v: int) -> None:
        np.maximum(self.best, self.k[v], out=self.best)


class _CoverageState:
    def __init__(self, fn: SubmodularFn) -> None:
        self.f = fn.features
        self.cov = np.zeros(fn.features.shape[1])

    def gain(self, v: int) -> float:
        before = np.minimum(self.cov, 1.0)
        after = np.minimum(self.cov + self.f[v], 1.0)
        return float((after - before).sum())

    def add(self, v: int) -> None:
        self.cov += self.f[v]


class _FeatureSqrtState:
    def __init__(self, fn: SubmodularFn) -> None:
        self.f = fn.features
        self.sums = np.zeros(fn.features.shape[1])

    def gain(self, v: int) -> float:
        return float((np.sqrt(self.sums + self.f[v]) - np.sqrt(self.sums)).sum())

    def add(self, v: int) -> None:
        self.sums += self.f[v]


class _GraphCutState:
    # f(X) = lam * sum_{v in V} sum_{x in X} K[x,v] - sum_{x,y in X} K[x,y]
    # with the penalty over ordered pairs including the diagonal
    def __init__(self, fn: SubmodularFn) -> None:
        self.k = fn.kernel
        self.lam = fn.lam
        self.row_sums = fn.kernel.sum(axis=1)
        self.cross = np.zeros(fn.kernel.shape[0])  # sum_{x in S} K[x, u]

    def gain(self, v: int) -> float:
        return float(
            self.lam * self.row_sums[v] - 2.0 * self.cross[v] - self.k[v, v]
        )

    def add(self, v: int) -> None:
        self.cross += self.k[v]


_STATES = {
    "facility_location": _FacilityState,
    "max_coverage": _CoverageState,
    "feature_based": _FeatureSqrtState,
    "graph_cut": _GraphCutState,
}


def _make_state(fn: SubmodularFn):
    return _STATES[fn.kind](fn)


def facility_location_gain(
    s: set[int], a, kernel: np.ndarray, v: int
) -> float:
    """Marginal gain of v for f(S, A) = sum over A of the best kernel hit."""
    a = np.asarray(list(a), dtype=np.int64)
    if len(s) == 0:
        return float(kernel[v, a].sum())
    chosen = np.asarray(sorted(s), dtype=np.int64)
    best = kernel[np.ix_(chosen, a)].max(axis=0)
    return float(np.maximum(kernel[v, a] - best, 0.0).sum())


def max_coverage_gain(s: set[int], v: int, features: np.ndarray) -> float:
    if np.any(features < 0.0):
        raise ValueError("max_coverage requires nonnegative features")
    cov = features[sorted(s)].sum(axis=0) if s else np.zeros(features.shape[1])
    return float((np.minimum(cov + features[v], 1.0) - np.minimum(cov, 1.0)).sum())


def feature_based_gain(s: set[int], v: int, features: np.ndarray) -> float:
    if np.any(features < 0.0):
        raise ValueError("feature_based requires nonnegative features")
    sums = features[sorted(s)].sum(axis=0) if s else np.zeros(features.shape[1])
    return float((np.sqrt(sums + features[v]) - np.sqrt(sums)).sum())


def graph_cut_gain(
    s: set[int], v_all, kernel: np.ndarray, v: int, lam: float = 2.0
) -> float:
    v_all = np.asarray(list(v_all), dtype=np.int64)
    cross = (
        kernel[sorted(s), v].sum() if s else 0.0
    )
    return float(lam * kernel[v, v_all].sum() - 2.0 * cross - kernel[v, v])


def lazy_greedy(
    ground, initial, fn: SubmodularFn
) -> tuple[np.ndarray, np.ndarray]:
    """Order ground \\ initial by greedy marginal gain, lazily.

    Stale heap entries are refreshed on pop; a popped candidate is
    accepted only when its fresh gain beats the best remaining stale
    bound, or equals it with a smaller id. That acceptance rule makes
    the output identical to naive greedy under the shared tie-break
    (descending gain, then ascending id), exact ties included.
    Returned gains are the true marginal gains at selection time.
    """
    ground = sorted({int(v) for v in ground})
    if not ground:
        raise ValueError("empty ground set")
    chosen = {int(v) for v in initial}
    if not chosen.issubset(ground):
        raise ValueError("initial set must be contained in the ground set")
    if fn.size < max(ground) + 1:
        raise ValueError("candidate id outside the function's universe")

    state = _make_state(fn)
    for v in sorted(chosen):
        state.add(v)

    heap = [(-state.gain(v), v) for v in ground if v not in chosen]
    heapq.heapify(heap)
    order: list[int] = []
    gains: list[float] = []
    while heap:
        neg_stale, v = heapq.heappop(heap)
        g_cur = state.gain(v)
        if heap:
            top_stale, top_id = -heap[0][0], heap[0][1]
            if g_cur < top_stale or (g_cur == top_stale and top_id < v):
                heapq.heappush(heap, (-g_cur, v))
                continue
        order.append(v)
        gains.append(g_cur)
        state.add(v)
    return np.asarray(order, dtype=np.int64), np.asarray(gains)


def _check_node_features(g: Graph, x) -> np.ndarray:
    if x is None:
        raise ValueError("missing features: ranking needs one row per node")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != g.n:
        raise ValueError("missing features: need one row per node")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature value")
    return x


def _similar_rows(
    g: Graph,
    x: np.ndarray,
    sim: str,
    model: SiameseModel | None,
    lo: int,
    hi: int,
) -> np.ndarray:
    out = np.empty(g.offsets[hi] - g.offsets[lo], dtype=np.int64)
    base = g.offsets[lo]
    for u in range(lo, hi):
        nbrs = g.neighbors(u)
        if nbrs.shape[0] == 0:
            continue
        scores = similarity_row(x[nbrs], x[u], sim, model)
        # primary key: descending score; secondary: ascending node id
        order = np.lexsort((nbrs, -scores))
        s, e = g.offsets[u] - base, g.offsets[u + 1] - base
        out[s:e] = nbrs[order]
    return out


def _diverse_rows(
    g: Graph,
    x: np.ndarray,
    sim: str,
    fn_kind: str,
    model: SiameseModel | None,
    lam: float,
    lo: int,
    hi: int,
) -> np.ndarray:
    out = np.empty(g.offsets[hi] - g.offsets[lo], dtype=np.int64)
    base = g.offsets[lo]
    for u in range(lo, hi):
        nbrs = g.neighbors(u)
        if nbrs.shape[0] == 0:
            continue
        others = nbrs[nbrs != u]  # ascending ids: local index order
        # the ego anchors the selection; a self-loop candidate is part of
        # the initial set already, so it goes last with gain 0
        a_ids = np.concatenate([others, [u]])
        ego_local = others.shape[0]
        if fn_kind in ("facility_location", "graph_cut"):
            kernel = pairwise_kernel(x[a_ids], sim, model)
            fn = SubmodularFn(kind=fn_kind, kernel=kernel, lam=lam)
        else:
            fn = SubmodularFn(kind=fn_kind, features=x[a_ids])
        order, _ = lazy_greedy(range(a_ids.shape[0]), {ego_local}, fn)
        ranked = a_ids[order]
        if others.shape[0] != nbrs.shape[0]:
            ranked = np.concatenate([ranked, [u]])
        s, e = g.offsets[u] - base, g.offsets[u + 1] - base
        out[s:e] = ranked
    return out


def _sim_chunk(args) -> np.ndarray:
    g_args, x, sim, model, lo, hi = args
    return _similar_rows(Graph(*g_args), x, sim, model, lo, hi)


def _div_chunk(args) -> np.ndarray:
    g_args, x, sim, fn_kind, model, lam, lo, hi = args
    return _diverse_rows(Graph(*g_args), x, sim, fn_kind, model, lam, lo, hi)


def _chunk_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, -(-n // max(1, workers)))
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _probs_for(g: Graph, spec: PmfSpec) -> np.ndarray:
    probs = np.empty(g.m, dtype=np.float64)
    for u in range(g.n):
        lo, hi = int(g.offsets[u]), int(g.offsets[u + 1])
        if hi > lo:
            probs[lo:hi] = pmf_from_ranks(hi - lo, spec)
    return probs


def _graph_args(g: Graph):
    return (g.n, g.offsets, g.targets, g.weights, g.directed)


def rank_by_similarity(
    g: Graph,
    x,
    sim: str = "cosine",
    pmf: PmfSpec | None = None,
    model: SiameseModel | None = None,
    workers: int = 1,
) -> RankTable:
    """Rank every vertex's neighbors by similarity to that vertex.

    Rows are sorted by descending similarity with ascending-id
    tie-breaks; probabilities come from the rank positions alone. Output
    is byte-identical for any worker count.
    """
    x = _check_node_features(g, x)
    if sim not in SIM_KINDS:
        raise ValueError(f"unknown similarity kind: {sim!r}")
    if sim == "learned" and model is None:
        raise ValueError("learned similarity requires a model")
    spec = pmf or PmfSpec()
    if workers <= 1 or g.n < 2:
        ranked = _similar_rows(g, x, sim, model, 0, g.n)
    else:
        bounds = _chunk_bounds(g.n, workers)
        args = [(_graph_args(g), x, sim, model, lo, hi) for lo, hi in bounds]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sim_chunk, args))
        ranked = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return make_rank_table(
        "similar", spec.kind, spec.params(), g.offsets, ranked, _probs_for(g, spec)
    )


def rank_by_diversity(
    g: Graph,
    x,
    sim: str = "cosine",
    fn_kind: str = "facility_location",
    pmf: PmfSpec | None = None,
    model: SiameseModel | None = None,
    lam: float = 2.0,
    workers: int = 1,
) -> RankTable:
    """Rank neighbors by greedy submodular gain over each egonet.

    The ego is the initial selection; the candidate universe is its
    neighborhood plus itself, so kernels stay egonet-sized. Kernel-less
    kinds (coverage, feature-based) read the feature rows directly.
    """
    x = _check_node_features(g, x)
    if sim not in SIM_KINDS:
        raise ValueError(f"unknown similarity kind: {sim!r}")
    if fn_kind not in SUBMODULAR_KINDS:
        raise ValueError(f"unknown submodular kind: {fn_kind!r}")
    if sim == "learned" and model is None:
        raise ValueError("learned similarity requires a model")
    if fn_kind in ("max_coverage", "feature_based") and np.any(x < 0.0):
        raise ValueError(f"{fn_kind} requires nonnegative features")
    spec = pmf or PmfSpec()
    if workers <= 1 or g.n < 2:
        ranked = _diverse_rows(g, x, sim, fn_kind, model, lam, 0, g.n)
    else:
        bounds = _chunk_bounds(g.n, workers)
        args = [
            (_graph_args(g), x, sim, fn_kind, model, lam, lo, hi)
            for lo, hi in bounds
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_div_chunk, args))
        ranked = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    return make_rank_table(
        "diverse", spec.kind, spec.params(), g.offsets, ranked, _probs_for(g, spec)
    )


def rank_uniform(g: Graph) -> RankTable:
    """Neighbors in id order, each with probability 1/d(u)."""
    spec = PmfSpec(kind="uniform")
    return make_rank_table(
        "uniform",
        "uniform",
        spec.params(),
        g.offsets,
        g.targets.copy(),
        _probs_for(g, spec),
    )
