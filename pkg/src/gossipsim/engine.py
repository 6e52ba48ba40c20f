"""Discrete-event message propagation engine.

Events are deliveries (deliver_at, from_node, to_node) tagged with a protocol
phase. A binary heap pops them in (deliver_at, insertion order) order, which
makes runs with equal timestamps deterministic. The engine records each node's
first receipt, hands every delivery at an adversarial node to the adversary
(which may censor it), and otherwise lets the active protocol enqueue
successor events.
"""

import heapq
import random
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# Protocol phases. Stem and circuit are the anonymity phases of the routing
# protocols; every protocol ends in broadcast. Message-level phase only moves
# forward (stem/circuit -> broadcast).
PHASE_STEM = 0
PHASE_CIRCUIT = 1
PHASE_BROADCAST = 2

PHASE_NAMES = {PHASE_STEM: "stem", PHASE_CIRCUIT: "circuit", PHASE_BROADCAST: "broadcast"}

_EMPTY = frozenset()


def derive_seed(seed, *stream):
    """Stable child seed for a named stream of a master seed."""
    ints = (int(seed),) + tuple(int(s) for s in stream)
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


class SimMessage:
    """One message's propagation state.

    first_receipt maps node -> first delivery time (the originator is in it
    from spawn). queue is the pending event heap; each entry is
    (deliver_at, seq, from_node, to_node, phase, hop) where hop counts stem
    edges (or the circuit position for onion routing).
    """

    __slots__ = ("mid", "originator", "t0", "rng", "phase", "first_receipt",
                 "queue", "broadcast_done", "circuit", "spread_ratio",
                 "events", "_seq")

    def __init__(self, mid, originator, t0=0.0, rng=None):
        self.mid = mid
        self.originator = originator
        self.t0 = t0
        self.rng = rng if rng is not None else random.Random(mid)
        self.phase = PHASE_BROADCAST
        self.first_receipt = {originator: t0}
        self.queue = []
        self.broadcast_done = set()
        self.circuit = None
        self.spread_ratio = 0.0
        self.events = None
        self._seq = 0

    def push(self, deliver_at, from_node, to_node, phase, hop=0):
        heapq.heappush(self.queue, (deliver_at, self._seq, from_node, to_node, phase, hop))
        self._seq += 1

    def __repr__(self):
        return (f"SimMessage(mid={self.mid}, originator={self.originator}, "
                f"phase={PHASE_NAMES[self.phase]}, received={len(self.first_receipt)})")


def spawn_message(originator, protocol, mid=0, t0=0.0, rng=None):
    """Create a message at an originator and enqueue its initial events.

    The active protocol picks the initial phase and the first events (a coin
    flip plus either a fanout or a single stem edge for the routing
    protocols).
    """
    graph = protocol.graph
    if not (0 <= originator < graph.n):
        raise ParameterError(f"originator {originator} out of range for n={graph.n}")
    if graph.degree(originator) == 0:
        # cannot happen on a connected graph with n >= 2, but guarded
        raise ParameterError(f"originator {originator} has no neighbors")
    msg = SimMessage(mid, originator, t0=t0, rng=rng)
    msg.phase = protocol.initial_phase
    protocol.on_spawn(msg)
    return msg


def run_message(msg, protocol, adversary=None, keep_events=False):
    """Drain the message's event queue; returns the message with spread set.

    Every delivery records a first receipt (duplicates are ignored for state
    but still shown to the adversary). Deliveries at adversarial nodes are
    logged by the adversary; if it censors, the protocol callback is
    suppressed and the message simply stops there.
    """
    if keep_events:
        msg.events = []
        trace = msg.events.append
    queue = msg.queue
    first_receipt = msg.first_receipt
    on_receive = protocol.on_receive
    pop = heapq.heappop
    if adversary is not None:
        adv_nodes = adversary.nodes
        observe = adversary.observe
    else:
        adv_nodes = _EMPTY
        observe = None
    mid = msg.mid
    while queue:
        t, _seq, frm, to, phase, hop = pop(queue)
        if keep_events:
            trace((t, frm, to, phase))
        if to not in first_receipt:
            first_receipt[to] = t
        if to in adv_nodes and observe(mid, to, frm, t, phase):
            continue
        on_receive(msg, t, frm, to, phase, hop)
    msg.spread_ratio = len(first_receipt) / protocol.graph.n
    return msg


def sample_originator(graph, rng, use_node_weights=True):
    """Draw an originator, proportional to node weight when the flag is set."""
    if not use_node_weights:
        return rng.randrange(graph.n)
    cum = _weight_cumsum(graph)
    total = cum[-1]
    if total <= 0.0:
        raise ParameterError("cannot weight-sample originator: all node weights are zero")
    return bisect_right(cum, rng.random() * total)


def _weight_cumsum(graph):
    cum = getattr(graph, "_weight_cumsum", None)
    if cum is None:
        cum = np.cumsum(graph.node_weights).tolist()
        graph._weight_cumsum = cum
    return cum


@dataclass
class SimulationRun:
    """Outcome of a batch of messages under one protocol/adversary setup."""

    originators: list = field(default_factory=list)
    spread_ratios: list = field(default_factory=list)
    message_ids: list = field(default_factory=list)
    messages: list = field(default_factory=list)  # only if keep_messages


class Simulation:
    """Drives num_messages seeded messages through one protocol instance.

    Originators are honest by construction: adversarial nodes are removed
    from the sampling distribution (equivalent to re-drawing until an honest
    node comes up, with a deterministic draw count). Each message gets its own
    RNG stream derived from (seed, message id), so message order never leaks
    randomness across messages.
    """

    def __init__(self, graph, protocol, adversary=None, num_messages=1, seed=0,
                 use_node_weights=True, keep_messages=False):
        if num_messages < 1:
            raise ParameterError("need at least one message")
        self.graph = graph
        self.protocol = protocol
        self.adversary = adversary
        self.num_messages = num_messages
        self.seed = seed
        self.use_node_weights = use_node_weights
        self.keep_messages = keep_messages
        adv_nodes = adversary.nodes if adversary is not None else _EMPTY
        honest = [u for u in range(graph.n) if u not in adv_nodes]
        if not honest:
            raise ParameterError("no honest nodes left to originate messages")
        self._honest = honest
        if use_node_weights:
            cum = np.cumsum(graph.node_weights[honest])
            if cum[-1] <= 0.0:
                raise ParameterError("all honest node weights are zero")
            self._honest_cum = cum.tolist()
        else:
            self._honest_cum = None

    def _draw_originator(self, rng):
        if self._honest_cum is None:
            return self._honest[rng.randrange(len(self._honest))]
        x = rng.random() * self._honest_cum[-1]
        return self._honest[bisect_right(self._honest_cum, x)]

    def run(self):
        origin_rng = random.Random(derive_seed(self.seed, 6))
        result = SimulationRun()
        for mid in range(self.num_messages):
            originator = self._draw_originator(origin_rng)
            rng = random.Random(derive_seed(self.seed, 7, mid))
            msg = spawn_message(originator, self.protocol, mid=mid, rng=rng)
            run_message(msg, self.protocol, self.adversary,
                        keep_events=self.keep_messages)
            result.originators.append(originator)
            result.spread_ratios.append(msg.spread_ratio)
            result.message_ids.append(mid)
            if self.keep_messages:
                result.messages.append(msg)
        return result
