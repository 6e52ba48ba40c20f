"""Routing protocols: plain broadcast, stem-phase coin-flip routing with one or
two pinned relays per node, and overlay circuit routing with a broadcast exit.

All protocols share the broadcast (fluff) machinery: a node forwards a message
in broadcast phase at most once, either to all neighbors except the sender
(mode 'all') or to ceil(sqrt(d)) neighbors sampled without replacement (mode
'sqrt', excluding the sender whenever the degree allows it).
"""

import math
import random
from dataclasses import dataclass

import numpy as np

from .engine import PHASE_BROADCAST, PHASE_CIRCUIT, PHASE_STEM, derive_seed
from .errors import ParameterError

PROTOCOL_KINDS = ("broadcast", "dandelion", "dandelion_pp", "onion")
BROADCAST_MODES = ("all", "sqrt")

# Protocols that route through a stem (anonymity graph) before broadcasting.
STEM_KINDS = ("dandelion", "dandelion_pp")

_MASK64 = (1 << 64) - 1


def _mix64(x):
    """splitmix64 finalizer; stable across platforms and runs."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass
class ProtocolConfig:
    """Static protocol parameters (validated on construction)."""

    kind: str = "broadcast"
    broadcast_mode: str = "all"
    broadcast_probability: float = 0.5
    stem_cap: int = 40
    onion_path_len: int = 3

    def __post_init__(self):
        if self.kind not in PROTOCOL_KINDS:
            raise ParameterError(f"unknown protocol kind {self.kind!r}")
        if self.broadcast_mode not in BROADCAST_MODES:
            raise ParameterError(f"unknown broadcast mode {self.broadcast_mode!r}")
        if not (0.0 < self.broadcast_probability <= 1.0):
            raise ParameterError(
                f"broadcast probability must lie in (0, 1], got {self.broadcast_probability}")
        if self.stem_cap < 1:
            raise ParameterError(f"stem cap must be >= 1, got {self.stem_cap}")
        if self.onion_path_len < 1:
            raise ParameterError(f"path length must be >= 1, got {self.onion_path_len}")


class AnonymityGraph:
    """Pinned stem successors for one epoch.

    Every node stores one relay (single-relay routing) or two distinct relays
    (two-relay routing; degree-1 nodes fall back to their only neighbor). The
    per-message relay choice is a pure function of (epoch_seed, message_id,
    node), so a message always takes the same relay at a given node.
    """

    def __init__(self, successors, epoch_seed, kind):
        if kind not in STEM_KINDS:
            raise ParameterError(f"not a stem protocol kind: {kind!r}")
        self.kind = kind
        self.epoch_seed = int(epoch_seed)
        self._succ = [list(s) for s in successors]
        n = len(successors)
        s0 = np.empty(n, dtype=np.intp)
        s1 = np.empty(n, dtype=np.intp)
        for u, s in enumerate(self._succ):
            if not (1 <= len(s) <= 2):
                raise ParameterError(f"node {u} must store 1 or 2 relays, got {len(s)}")
            s0[u] = s[0]
            s1[u] = s[-1]  # equals s[0] for single-relay nodes
        self.s0 = s0
        self.s1 = s1

    @property
    def n(self):
        return len(self._succ)

    def successors(self, node):
        return list(self._succ[node])

    def next_relay(self, node, message_id):
        """Relay this node forwards the given message to."""
        s = self._succ[node]
        if len(s) == 1:
            return s[0]
        bit = _mix64(self.epoch_seed ^ (message_id * 0x9E3779B97F4A7C15) ^ node) & 1
        return s[bit]


def build_anonymity_graph(graph, kind, seed):
    """Sample stem successors for every node from its neighbors."""
    if kind not in STEM_KINDS:
        raise ParameterError(f"anonymity graph needs a stem protocol kind, got {kind!r}")
    rng = random.Random(derive_seed(seed, 4))
    successors = []
    for u in range(graph.n):
        nbrs = graph.adj[u]
        if not nbrs:
            raise ParameterError(f"node {u} has no neighbors to relay through")
        if kind == "dandelion" or len(nbrs) == 1:
            successors.append([nbrs[rng.randrange(len(nbrs))][0]])
        else:
            pair = rng.sample(nbrs, 2)
            successors.append([pair[0][0], pair[1][0]])
    return AnonymityGraph(successors, epoch_seed=derive_seed(seed, 5), kind=kind)


class _BroadcastBase:
    """Shared fluff fanout. Subclasses set initial_phase and the receive logic."""

    initial_phase = PHASE_BROADCAST

    def __init__(self, graph, config):
        self.graph = graph
        self.config = config
        self.mode_all = config.broadcast_mode == "all"
        # ceil(sqrt(d)) per node, precomputed off the hot path
        self._fan = [0] * graph.n
        for u in range(graph.n):
            d = len(graph.adj[u])
            c = math.isqrt(d)
            if c * c < d:
                c += 1
            self._fan[u] = c

    def _broadcast(self, msg, t, node, sender):
        """Fan the message out of `node`; no-op if it already forwarded.

        sender < 0 marks a fresh source (spawn, stem or circuit exit): nothing
        is excluded there, which keeps floods complete even when the exit's
        only neighbor is the node that fed it.
        """
        done = msg.broadcast_done
        if node in done:
            return
        done.add(node)
        adj = self.graph.adj[node]
        push = msg.push
        if self.mode_all:
            for w, lat in adj:
                if w != sender:
                    push(t + lat, node, w, PHASE_BROADCAST)
            return
        c = self._fan[node]
        pool = adj
        if 0 <= sender and len(adj) > c:
            pool = [p for p in adj if p[0] != sender]
        for w, lat in msg.rng.sample(pool, c):
            push(t + lat, node, w, PHASE_BROADCAST)


class BroadcastProtocol(_BroadcastBase):
    """Flood from the originator; nothing is hidden."""

    kind = "broadcast"

    def on_spawn(self, msg):
        self._broadcast(msg, msg.t0, msg.originator, -1)

    def on_receive(self, msg, t, frm, to, phase, hop):
        self._broadcast(msg, t, to, frm)


class DandelionProtocol(_BroadcastBase):
    """Stem routing over pinned relays, then flood.

    Every holder of a stem-phase message (including the originator at spawn)
    flips a biased coin: with probability p it broadcasts, otherwise it
    forwards along its pinned relay. The hop counter caps stem length at
    stem_cap. Two-relay routing picks one of the node's two relays per
    message, pseudorandomly but stably.
    """

    initial_phase = PHASE_STEM

    def __init__(self, graph, config, anonymity):
        super().__init__(graph, config)
        if anonymity.n != graph.n:
            raise ParameterError("anonymity graph does not match network size")
        self.kind = config.kind
        self.anonymity = anonymity
        self.p = config.broadcast_probability
        self.stem_cap = config.stem_cap

    def _stem_forward(self, msg, t, node, hop):
        nxt = self.anonymity.next_relay(node, msg.mid)
        msg.push(t + self.graph.edge_latency[(node, nxt)], node, nxt, PHASE_STEM, hop)

    def on_spawn(self, msg):
        if msg.rng.random() < self.p:
            msg.phase = PHASE_BROADCAST
            self._broadcast(msg, msg.t0, msg.originator, -1)
        else:
            self._stem_forward(msg, msg.t0, msg.originator, 1)

    def on_receive(self, msg, t, frm, to, phase, hop):
        if phase == PHASE_BROADCAST:
            self._broadcast(msg, t, to, frm)
        elif msg.rng.random() < self.p or hop >= self.stem_cap:
            msg.phase = PHASE_BROADCAST
            self._broadcast(msg, t, to, -1)
        else:
            self._stem_forward(msg, t, to, hop + 1)


class OnionProtocol(_BroadcastBase):
    """Route through a fixed-length circuit of relays, then flood at the exit.

    Relays are drawn uniformly at spawn (distinct, excluding the originator).
    A circuit hop is an overlay link: its latency is the shortest-path latency
    between the two relays. Circuit deliveries carry no sender information an
    observer could link (handled by the adversary via the phase tag).
    """

    initial_phase = PHASE_CIRCUIT

    kind = "onion"

    def __init__(self, graph, config):
        super().__init__(graph, config)
        self.path_len = config.onion_path_len
        if self.path_len > graph.n - 2:
            raise ParameterError(
                f"path length {self.path_len} too long for {graph.n} nodes "
                f"(must leave the originator and one more node out)")
        self._dist_rows = {}

    def _spdist(self, u, v):
        row = self._dist_rows.get(u)
        if row is None:
            from scipy.sparse.csgraph import dijkstra
            row = dijkstra(self.graph.csr_latency_matrix(), indices=u)
            self._dist_rows[u] = row
        return float(row[v])

    def on_spawn(self, msg):
        o = msg.originator
        # sample from range(n-1) and shift to skip the originator
        picks = msg.rng.sample(range(self.graph.n - 1), self.path_len)
        circuit = [i + 1 if i >= o else i for i in picks]
        msg.circuit = circuit
        msg.push(msg.t0 + self._spdist(o, circuit[0]), o, circuit[0], PHASE_CIRCUIT, 0)

    def on_receive(self, msg, t, frm, to, phase, hop):
        if phase == PHASE_BROADCAST:
            self._broadcast(msg, t, to, frm)
        elif hop + 1 < len(msg.circuit):
            nxt = msg.circuit[hop + 1]
            msg.push(t + self._spdist(to, nxt), to, nxt, PHASE_CIRCUIT, hop + 1)
        else:
            msg.phase = PHASE_BROADCAST
            self._broadcast(msg, t, to, -1)


def make_protocol(graph, config, seed=0):
    """Instantiate the protocol described by config, bound to graph."""
    if config.kind == "broadcast":
        return BroadcastProtocol(graph, config)
    if config.kind in STEM_KINDS:
        anonymity = build_anonymity_graph(graph, config.kind, seed)
        return DandelionProtocol(graph, config, anonymity)
    return OnionProtocol(graph, config)
