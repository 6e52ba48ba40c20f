"""Network topology model: generation, import/export, weights, centrality.

Nodes are dense integers 0..n-1. Graphs are undirected; every edge carries a
symmetric latency in milliseconds and every node carries a weight (stake) used
for originator sampling. A built NetworkGraph is treated as immutable; weight
assignment returns a new graph sharing the topology.
"""

import logging

import networkx as nx
import numpy as np

from .errors import FormatError, GenerationError, ParameterError

log = logging.getLogger(__name__)

# Latencies are floored here after sampling; draws below this are clamped, not
# resampled, so the draw count stays deterministic.
LATENCY_FLOOR_MS = 1.0

_GENERATION_RETRIES = 100


class WeightGeneratorSpec:
    """How to draw node weights and edge latencies.

    node_mode: 'stake' (log-normal) or 'uniform' (all ones).
    edge_mode: 'normal' (truncated normal in ms), 'uniform' (uniform in ms)
               or 'unweighted' (all 1.0 ms).
    """

    NODE_MODES = ("stake", "uniform")
    EDGE_MODES = ("normal", "uniform", "unweighted")

    def __init__(self, node_mode="stake", edge_mode="normal",
                 normal_mean_ms=171.0, normal_std_ms=76.0,
                 uniform_low_ms=95.0, uniform_high_ms=247.0,
                 stake_mu=7.0, stake_sigma=1.5):
        if node_mode not in self.NODE_MODES:
            raise ParameterError(f"unknown node weight mode {node_mode!r}")
        if edge_mode not in self.EDGE_MODES:
            raise ParameterError(f"unknown edge weight mode {edge_mode!r}")
        if normal_mean_ms <= 0 or normal_std_ms < 0 or uniform_high_ms < uniform_low_ms:
            raise ParameterError("degenerate latency distribution parameters")
        self.node_mode = node_mode
        self.edge_mode = edge_mode
        self.normal_mean_ms = normal_mean_ms
        self.normal_std_ms = normal_std_ms
        self.uniform_low_ms = uniform_low_ms
        self.uniform_high_ms = uniform_high_ms
        self.stake_mu = stake_mu
        self.stake_sigma = stake_sigma

    def key(self):
        return (self.node_mode, self.edge_mode, self.normal_mean_ms,
                self.normal_std_ms, self.uniform_low_ms, self.uniform_high_ms,
                self.stake_mu, self.stake_sigma)

    def __repr__(self):
        return (f"WeightGeneratorSpec(node_mode={self.node_mode!r}, "
                f"edge_mode={self.edge_mode!r})")


class NetworkGraph:
    """Undirected weighted graph with dense integer nodes.

    edges are canonicalized as (u, v) with u < v and sorted, which pins the
    iteration order used by weight assignment and export.
    """

    def __init__(self, n, edges, latencies=None, node_weights=None, labels=None,
                 check_connected=True):
        if n < 1:
            raise ParameterError("graph needs at least one node")
        edges = list(edges)
        if latencies is None:
            latencies = [1.0] * len(edges)
        if len(latencies) != len(edges):
            raise ParameterError("latency list does not match edge list")
        seen = set()
        canon = []
        for (u, v), l in zip(edges, latencies):
            if u == v:
                continue
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"edge ({u}, {v}) out of range for n={n}")
            if l < LATENCY_FLOOR_MS:
                raise ParameterError(f"latency {l} below floor {LATENCY_FLOOR_MS}")
            e = (u, v) if u < v else (v, u)
            if e in seen:  # duplicate edge, first latency wins
                continue
            seen.add(e)
            canon.append((e, float(l)))
        canon.sort()
        self.n = n
        self.edges = [e for e, _ in canon]
        self.latencies = [l for _, l in canon]
        if node_weights is None:
            node_weights = np.ones(n)
        node_weights = np.asarray(node_weights, dtype=float)
        if node_weights.shape != (n,):
            raise ParameterError("node weight vector does not match node count")
        if np.any(node_weights < 0):
            raise ParameterError("node weights must be non-negative")
        self.node_weights = node_weights
        self.labels = list(labels) if labels is not None else [str(i) for i in range(n)]
        if len(self.labels) != n:
            raise ParameterError("label list does not match node count")

        # adjacency as parallel (neighbor, latency) lists, neighbor-sorted
        adj = [[] for _ in range(n)]
        lat = {}
        for (u, v), l in canon:
            adj[u].append((v, l))
            adj[v].append((u, l))
            lat[(u, v)] = l
            lat[(v, u)] = l
        for lst in adj:
            lst.sort()
        self.adj = adj
        self.edge_latency = lat
        self._csr = None

        if check_connected and not self.is_connected():
            raise ParameterError("graph is not connected")

    # -- basic queries -------------------------------------------------

    def degree(self, u):
        return len(self.adj[u])

    def neighbors(self, u):
        return [v for v, _ in self.adj[u]]

    def latency(self, u, v):
        return self.edge_latency[(u, v)]

    def is_connected(self):
        if self.n == 1:
            return True
        seen = bytearray(self.n)
        stack = [0]
        seen[0] = 1
        count = 1
        while stack:
            u = stack.pop()
            for v, _ in self.adj[u]:
                if not seen[v]:
                    seen[v] = 1
                    count += 1
                    stack.append(v)
        return count == self.n

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for (u, v), l in zip(self.edges, self.latencies):
            g.add_edge(u, v, latency=l)
        return g

    def csr_latency_matrix(self):
        """Sparse latency matrix, built lazily (used for overlay shortest paths)."""
        if self._csr is None:
            from scipy.sparse import csr_matrix
            m = len(self.edges)
            rows = np.empty(2 * m, dtype=np.int32)
            cols = np.empty(2 * m, dtype=np.int32)
            vals = np.empty(2 * m, dtype=float)
            for i, ((u, v), l) in enumerate(zip(self.edges, self.latencies)):
                rows[2 * i], cols[2 * i], vals[2 * i] = u, v, l
                rows[2 * i + 1], cols[2 * i + 1], vals[2 * i + 1] = v, u, l
            self._csr = csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def __repr__(self):
        return f"NetworkGraph(n={self.n}, edges={len(self.edges)})"


# -- generation --------------------------------------------------------


def _seed_int(seed, stream):
    """Stable 32-bit child seed for a named stream."""
    return int(np.random.SeedSequence((int(seed), int(stream))).generate_state(1)[0])


def gen_random_regular(n, k, seed):
    """Connected random k-regular graph on n nodes.

    Requires 3 <= k < n and n*k even. Regeneration is retried with perturbed
    seeds a bounded number of times if a disconnected sample comes up.
    """
    if not (3 <= k < n):
        raise ParameterError(f"random regular graph needs 3 <= k < n, got k={k}, n={n}")
    if (n * k) % 2 != 0:
        raise ParameterError(f"n*k must be even, got n={n}, k={k}")
    base = _seed_int(seed, 101)
    for attempt in range(_GENERATION_RETRIES):
        g = nx.random_regular_graph(k, n, seed=base + attempt)
        graph = NetworkGraph(n, list(g.edges()), check_connected=False)
        if graph.is_connected():
            if attempt:
                log.info("regular graph connected after %d retries", attempt)
            return graph
    raise GenerationError(
        f"no connected {k}-regular graph on {n} nodes in {_GENERATION_RETRIES} attempts")


def gen_scale_free(n, m, seed):
    """Scale-free graph via preferential attachment (m edges per new node)."""
    if not (1 <= m < n):
        raise ParameterError(f"scale-free graph needs 1 <= m < n, got m={m}, n={n}")
    g = nx.barabasi_albert_graph(n, m, seed=_seed_int(seed, 102))
    graph = NetworkGraph(n, list(g.edges()), check_connected=False)
    if not graph.is_connected():  # attachment graphs are connected by construction
        raise GenerationError("preferential attachment produced a disconnected graph")
    return graph


def load_graph(path, on_disconnected="largest"):
    """Read an edge-list file into a NetworkGraph.

    One edge per line: two whitespace-separated node tokens, optionally a third
    token with the edge latency in ms. '#' starts a comment. Tokens are
    arbitrary strings and are remapped to dense ids in first-appearance order.
    Self-loops are dropped and duplicate edges collapsed (first latency wins).

    on_disconnected: 'largest' keeps the largest connected component (with a
    warning), 'error' rejects disconnected inputs.
    """
    if on_disconnected not in ("largest", "error"):
        raise ParameterError(f"unknown disconnected policy {on_disconnected!r}")
    ids = {}
    labels = []
    edges = []
    latmap = {}

    def node_id(tok):
        if tok not in ids:
            ids[tok] = len(labels)
            labels.append(tok)
        return ids[tok]

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) not in (2, 3):
                raise FormatError(
                    f"expected 2 or 3 tokens, got {len(toks)}", path=path, line=lineno)
            u, v = node_id(toks[0]), node_id(toks[1])
            if u == v:
                continue
            e = (u, v) if u < v else (v, u)
            if len(toks) == 3:
                try:
                    l = float(toks[2])
                except ValueError:
                    raise FormatError(
                        f"bad latency token {toks[2]!r}", path=path, line=lineno) from None
                if l < LATENCY_FLOOR_MS:
                    raise FormatError(
                        f"latency {l} below floor {LATENCY_FLOOR_MS}",
                        path=path, line=lineno)
            else:
                l = 1.0
            if e not in latmap:
                latmap[e] = l
                edges.append(e)
    if not labels:
        raise FormatError("no edges in file", path=path)

    n = len(labels)
    graph = NetworkGraph(n, edges, latencies=[latmap[e] for e in edges],
                         labels=labels, check_connected=False)
    if not graph.is_connected():
        if on_disconnected == "error":
            raise FormatError("graph is not connected", path=path)
        graph = _largest_component(graph)
        log.warning("input graph disconnected, kept largest component with %d nodes",
                    graph.n)
    return graph


def _largest_component(graph):
    comp = [-1] * graph.n
    cid = 0
    for s in range(graph.n):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = cid
        while stack:
            u = stack.pop()
            for v, _ in graph.adj[u]:
                if comp[v] < 0:
                    comp[v] = cid
                    stack.append(v)
        cid += 1
    sizes = [0] * cid
    for c in comp:
        sizes[c] += 1
    keep = sizes.index(max(sizes))
    remap = {}
    labels = []
    for u in range(graph.n):
        if comp[u] == keep:
            remap[u] = len(labels)
            labels.append(graph.labels[u])
    edges = []
    lats = []
    for (u, v), l in zip(graph.edges, graph.latencies):
        if comp[u] == keep and comp[v] == keep:
            edges.append((remap[u], remap[v]))
            lats.append(l)
    return NetworkGraph(len(labels), edges, latencies=lats, labels=labels)


def save_graph(graph, path):
    """Write the edge list with latencies (token token latency_ms per line)."""
    with open(path, "w") as fh:
        fh.write("# edge list: node_token node_token latency_ms\n")
        for (u, v), l in zip(graph.edges, graph.latencies):
            fh.write(f"{graph.labels[u]} {graph.labels[v]} {l!r}\n")


def assign_weights(graph, spec, seed):
    """Return a new NetworkGraph with weights drawn per spec.

    Edge latencies and node weights come from two independent seeded streams,
    so changing one mode never shifts the other's draws. Latencies below the
    floor are clamped, not redrawn.
    """
    m = len(graph.edges)
    edge_rng = np.random.default_rng(_seed_int(seed, 103))
    node_rng = np.random.default_rng(_seed_int(seed, 104))

    if spec.edge_mode == "normal":
        lats = edge_rng.normal(spec.normal_mean_ms, spec.normal_std_ms, size=m)
    elif spec.edge_mode == "uniform":
        lats = edge_rng.uniform(spec.uniform_low_ms, spec.uniform_high_ms, size=m)
    else:
        lats = np.ones(m)
    lats = np.maximum(lats, LATENCY_FLOOR_MS)

    if spec.node_mode == "stake":
        weights = node_rng.lognormal(spec.stake_mu, spec.stake_sigma, size=graph.n)
    else:
        weights = np.ones(graph.n)

    return NetworkGraph(graph.n, graph.edges, latencies=lats.tolist(),
                        node_weights=weights, labels=graph.labels,
                        check_connected=False)


def load_node_weights(graph, path):
    """Return a new graph with node weights overridden from a file.

    Lines of 'node_token weight'; tokens must exist in the graph. Nodes not
    mentioned keep their current weight.
    """
    weights = graph.node_weights.copy()
    index = {tok: i for i, tok in enumerate(graph.labels)}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 2:
                raise FormatError(
                    f"expected 'node_token weight', got {len(toks)} tokens",
                    path=path, line=lineno)
            if toks[0] not in index:
                raise FormatError(f"unknown node token {toks[0]!r}",
                                  path=path, line=lineno)
            try:
                w = float(toks[1])
            except ValueError:
                raise FormatError(f"bad weight token {toks[1]!r}",
                                  path=path, line=lineno) from None
            if w < 0:
                raise FormatError("weights must be non-negative", path=path, line=lineno)
            weights[index[toks[0]]] = w
    return NetworkGraph(graph.n, graph.edges, latencies=graph.latencies,
                        node_weights=weights, labels=graph.labels,
                        check_connected=False)


def get_central_nodes(graph, count, metric="degree"):
    """Top-count nodes by a centrality metric; ties broken by ascending id."""
    if not (0 <= count <= graph.n):
        raise ParameterError(f"count must be in [0, {graph.n}], got {count}")
    if metric == "degree":
        scores = [len(graph.adj[u]) for u in range(graph.n)]
    elif metric == "betweenness":
        scores_map = nx.betweenness_centrality(graph.to_networkx())
        scores = [scores_map[u] for u in range(graph.n)]
    else:
        raise ParameterError(f"unknown centrality metric {metric!r}")
    order = sorted(range(graph.n), key=lambda u: (-scores[u], u))
    return order[:count]
