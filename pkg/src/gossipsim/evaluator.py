"""Deanonymization metrics: rank the true originator inside each candidate
distribution and aggregate over a batch of messages.

Ranks are 1-based. Tied probabilities share their mid-rank, and an originator
the adversary assigned zero mass gets the mid-rank of the whole zero tail, so
an unobserved message is exactly as bad as a uniform guess. A hit is a strict
rank of 1 (an untied top pick).
"""

import math
from dataclasses import dataclass

from .errors import ParameterError
from .estimators import (NoObservation, estimate_first_reach,
                         estimate_first_sent, refine_dandelion)

ESTIMATORS = ("first_reach", "first_sent")


@dataclass
class EvaluationReport:
    """Batch metrics for one estimator over one simulation run."""

    estimator: str
    num_messages: int
    num_unobserved: int
    hit_ratio: float
    inverse_rank: float
    entropy: float
    ndcg: float
    message_spread_ratio: float

    def as_dict(self):
        return {
            "estimator": self.estimator,
            "num_msg": self.num_messages,
            "num_unobserved": self.num_unobserved,
            "hit_ratio": self.hit_ratio,
            "inverse_rank": self.inverse_rank,
            "entropy": self.entropy,
            "ndcg": self.ndcg,
            "message_spread_ratio": self.message_spread_ratio,
        }


def rank_of(dist, originator, num_honest):
    """1-based rank of the originator in a candidate distribution.

    dist may be None (unobserved message): the rank is then the mid-rank of a
    uniform guess over all honest nodes. Ties are mid-ranked; zero-mass
    originators get the mid-rank of the zero tail behind the support.
    """
    if num_honest < 1:
        raise ParameterError("need at least one honest node")
    if dist is None:
        return (num_honest + 1) / 2
    probs = dist.probs
    w = probs.get(originator, 0.0)
    if w > 0.0:
        higher = 0
        tied = 0
        for p in probs.values():
            if p > w:
                higher += 1
            elif p == w:
                tied += 1
        return higher + (tied + 1) / 2
    support = len(probs)
    return support + (num_honest - support + 1) / 2


def _entropy_of(dist, num_honest):
    if dist is None:
        return math.log2(num_honest)
    return dist.entropy_bits()


def compute_report(dists, originators, spread_ratios, num_honest, estimator=""):
    """Aggregate per-message distributions into an EvaluationReport.

    dists entries may be None for unobserved messages. All three lists must
    describe the same messages in the same order.
    """
    m = len(dists)
    if m == 0:
        raise ParameterError("cannot evaluate zero messages")
    if len(originators) != m or len(spread_ratios) != m:
        raise ParameterError("messages, originators and spreads must align")
    hits = 0
    inv_sum = 0.0
    ent_sum = 0.0
    ndcg_sum = 0.0
    unobserved = 0
    for dist, origin in zip(dists, originators):
        r = rank_of(dist, origin, num_honest)
        if r == 1.0:
            hits += 1
        inv_sum += 1.0 / r
        ndcg_sum += 1.0 / math.log2(1.0 + r)
        ent_sum += _entropy_of(dist, num_honest)
        if dist is None:
            unobserved += 1
    return EvaluationReport(
        estimator=estimator,
        num_messages=m,
        num_unobserved=unobserved,
        hit_ratio=hits / m,
        inverse_rank=inv_sum / m,
        entropy=ent_sum / m,
        ndcg=ndcg_sum / m,
        message_spread_ratio=sum(spread_ratios) / m,
    )


def build_distributions(run, adversary, graph, protocol, estimator):
    """Per-message candidate distributions for one estimator.

    Applies the anonymity-graph refinement when the protocol has a stem and
    the adversary is protocol-aware. Returns a list aligned with the run's
    messages; None marks messages with no usable observation.
    """
    if estimator not in ESTIMATORS:
        raise ParameterError(f"unknown estimator {estimator!r}")
    exclude = adversary.nodes
    refine = adversary.protocol_aware and getattr(protocol, "anonymity", None) is not None
    dists = []
    for mid in run.message_ids:
        obs = adversary.observations(mid)
        try:
            if estimator == "first_reach":
                base = estimate_first_reach(obs, exclude=exclude, message_id=mid)
            else:
                base = estimate_first_sent(obs, graph, exclude=exclude, message_id=mid)
            if refine:
                base = refine_dandelion(base, protocol.anonymity, protocol.p,
                                        exclude=exclude, stem_cap=protocol.stem_cap)
            dists.append(base)
        except NoObservation:
            dists.append(None)
    return dists


def evaluate(run, adversary, graph, protocol, estimator):
    """Convenience wrapper: distributions plus report in one call."""
    dists = build_distributions(run, adversary, graph, protocol, estimator)
    num_honest = graph.n - len(adversary.nodes)
    return compute_report(dists, run.originators, run.spread_ratios,
                          num_honest, estimator=estimator)
