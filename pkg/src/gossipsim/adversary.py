"""Adversarial observers: placement, observation logs, optional censorship.

Adversaries control a fixed set of nodes. They never originate messages. A
passive adversary only logs deliveries at its nodes; an active one logs and
then censors (the protocol callback is suppressed by the engine, so the
message silently stops at that node). Deanonymization itself lives in the
estimators module; this one only collects the raw material.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .engine import PHASE_CIRCUIT, PHASE_NAMES, derive_seed
from .errors import ParameterError
from .graphs import get_central_nodes

PLACEMENTS = ("random", "degree", "betweenness")


@dataclass
class AdversaryConfig:
    """Which nodes the adversary holds and how it behaves.

    Exactly one of ratio (fraction of nodes, placed per `placement`) or
    `nodes` (an explicit list) must be given. protocol_aware lets the
    estimators use knowledge of the anonymity graph.
    """

    ratio: float = None
    nodes: tuple = None
    placement: str = "random"
    active: bool = False
    protocol_aware: bool = False

    def __post_init__(self):
        if (self.ratio is None) == (self.nodes is None):
            raise ParameterError("give exactly one of adversary ratio or explicit nodes")
        if self.ratio is not None and not (0.0 <= self.ratio < 1.0):
            raise ParameterError(f"adversary ratio must lie in [0, 1), got {self.ratio}")
        if self.placement not in PLACEMENTS:
            raise ParameterError(f"unknown adversary placement {self.placement!r}")
        if self.nodes is not None:
            self.nodes = tuple(self.nodes)


class Observation(NamedTuple):
    """One delivery seen at an adversarial node.

    linkable is False for circuit-phase deliveries: the observer holds an
    opaque layered payload and cannot tie the sender to the message content.
    """

    message_id: int
    observer: int
    sender: int
    arrival: float
    phase: int
    linkable: bool

    def phase_name(self):
        return PHASE_NAMES[self.phase]


def place_adversaries(graph, config, seed=0):
    """Pick the adversarial node set; returns a sorted tuple of node ids."""
    if config.nodes is not None:
        nodes = sorted(set(int(u) for u in config.nodes))
        for u in nodes:
            if not (0 <= u < graph.n):
                raise ParameterError(f"adversarial node {u} out of range for n={graph.n}")
        if len(nodes) >= graph.n:
            raise ParameterError("adversary cannot hold every node")
        return tuple(nodes)
    # small epsilon guards floor() against downward float drift (e.g. 0.2*115)
    count = int(config.ratio * graph.n + 1e-9)
    if config.placement == "random":
        rng = np.random.default_rng(derive_seed(seed, 8))
        picked = rng.permutation(graph.n)[:count]
        return tuple(sorted(int(u) for u in picked))
    return tuple(sorted(get_central_nodes(graph, count, metric=config.placement)))


class Adversary:
    """Holds the adversarial nodes and the per-message observation logs."""

    def __init__(self, graph, config, seed=0):
        self.graph = graph
        self.config = config
        self.active = config.active
        self.protocol_aware = config.protocol_aware
        self.nodes = frozenset(place_adversaries(graph, config, seed))
        self._logs = {}

    def observe(self, message_id, observer, sender, arrival, phase):
        """Log one delivery; returns True when the message must be censored."""
        log = self._logs.get(message_id)
        if log is None:
            log = self._logs[message_id] = []
        log.append(Observation(message_id, observer, sender, arrival, phase,
                               phase != PHASE_CIRCUIT))
        return self.active

    def observations(self, message_id):
        """All deliveries logged for one message, in delivery order."""
        return self._logs.get(message_id, [])

    def observed_message_ids(self):
        return sorted(self._logs)

    def __repr__(self):
        kind = "active" if self.active else "passive"
        return f"Adversary({kind}, nodes={len(self.nodes)})"
