"""Experiment configs, sweep execution and report emission.

A config is a flat text file of dotted keys (key = value, '#' comments).
Sweepable axes (protocol kind/mode/probability, adversary ratio/placement/
active, topology kind) expand into a Cartesian product of cells; every cell
runs once per seed and yields one CSV row per estimator. Identical config and
seeds produce byte-identical CSV output.
"""

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .adversary import PLACEMENTS, Adversary, AdversaryConfig
from .engine import Simulation
from .errors import ConfigError, ParameterError, SchemaError
from .evaluator import ESTIMATORS, evaluate
from .graphs import (WeightGeneratorSpec, assign_weights, gen_random_regular,
                     gen_scale_free, load_graph, load_node_weights)
from .protocols import (BROADCAST_MODES, PROTOCOL_KINDS, STEM_KINDS,
                        ProtocolConfig, make_protocol)

TOPOLOGY_KINDS = ("regular", "scale_free", "file")

REPORT_COLUMNS = [
    "topology", "n", "k_or_m", "protocol", "broadcast_mode",
    "broadcast_probability", "adversary_ratio", "adversary_placement",
    "adversary_active", "estimator", "seed", "num_msg", "num_unobserved",
    "hit_ratio", "inverse_rank", "entropy", "ndcg", "message_spread_ratio",
]

METRIC_COLUMNS = ["hit_ratio", "inverse_rank", "entropy", "ndcg",
                  "message_spread_ratio"]

CELL_COLUMNS = ["topology", "n", "k_or_m", "protocol", "broadcast_mode",
                "broadcast_probability", "adversary_ratio",
                "adversary_placement", "adversary_active", "estimator"]


@dataclass(frozen=True)
class CellSpec:
    """One point of the sweep grid (everything that varies except the seed)."""

    topology: str
    protocol: str
    broadcast_mode: str
    broadcast_probability: float  # None for protocols without a coin
    adversary_ratio: float        # None when explicit nodes are configured
    adversary_placement: str
    adversary_active: bool

    def sort_key(self):
        return (self.topology, self.protocol, self.broadcast_mode,
                -1.0 if self.broadcast_probability is None else self.broadcast_probability,
                -1.0 if self.adversary_ratio is None else self.adversary_ratio,
                self.adversary_placement, self.adversary_active)


@dataclass
class ExperimentConfig:
    """Normalized experiment description (see parse_config for the file form)."""

    topology_kinds: tuple = ("regular",)
    n: int = 1000
    k: int = 50
    m: int = 5
    graph_path: str = None
    node_mode: str = "stake"
    edge_mode: str = "normal"
    normal_mean_ms: float = 171.0
    normal_std_ms: float = 76.0
    uniform_low_ms: float = 95.0
    uniform_high_ms: float = 247.0
    stake_mu: float = 7.0
    stake_sigma: float = 1.5
    node_weight_file: str = None
    protocol_kinds: tuple = ("broadcast",)
    broadcast_modes: tuple = ("all",)
    broadcast_probabilities: tuple = (0.5,)
    stem_cap: int = 40
    onion_path_len: int = 3
    adversary_ratios: tuple = (0.1,)
    adversary_nodes: tuple = None
    adversary_placements: tuple = ("random",)
    adversary_actives: tuple = (False,)
    protocol_aware: bool = True
    estimators: tuple = ("first_sent",)
    num_messages: int = 200
    seeds: tuple = tuple(range(10))
    use_node_weights: bool = True
    output_path: str = None

    def weight_spec(self):
        return WeightGeneratorSpec(
            node_mode=self.node_mode, edge_mode=self.edge_mode,
            normal_mean_ms=self.normal_mean_ms, normal_std_ms=self.normal_std_ms,
            uniform_low_ms=self.uniform_low_ms, uniform_high_ms=self.uniform_high_ms,
            stake_mu=self.stake_mu, stake_sigma=self.stake_sigma)

    def validate(self):
        for kind in self.topology_kinds:
            if kind not in TOPOLOGY_KINDS:
                raise ConfigError(f"topology.kind: unknown topology {kind!r}")
        if not self.topology_kinds:
            raise ConfigError("topology.kind: need at least one topology")
        if "regular" in self.topology_kinds:
            if not (3 <= self.k < self.n):
                raise ConfigError(f"topology.k: need 3 <= k < n, got k={self.k}, n={self.n}")
            if (self.n * self.k) % 2 != 0:
                raise ConfigError(f"topology.k: n*k must be even, got n={self.n}, k={self.k}")
        if "scale_free" in self.topology_kinds and not (1 <= self.m < self.n):
            raise ConfigError(f"topology.m: need 1 <= m < n, got m={self.m}, n={self.n}")
        if "file" in self.topology_kinds and not self.graph_path:
            raise ConfigError("topology.path: required for topology.kind = file")
        try:
            self.weight_spec()
        except ParameterError as exc:
            raise ConfigError(f"weights: {exc}") from None
        if not self.protocol_kinds:
            raise ConfigError("protocol.kind: need at least one protocol")
        for kind in self.protocol_kinds:
            if kind not in PROTOCOL_KINDS:
                raise ConfigError(f"protocol.kind: unknown protocol {kind!r}")
        for mode in self.broadcast_modes:
            if mode not in BROADCAST_MODES:
                raise ConfigError(f"protocol.broadcast_mode: unknown mode {mode!r}")
        for p in self.broadcast_probabilities:
            if not (0.0 < p <= 1.0):
                raise ConfigError(
                    f"protocol.broadcast_probability: must lie in (0, 1], got {p}")
        if self.stem_cap < 1:
            raise ConfigError(f"protocol.stem_cap: must be >= 1, got {self.stem_cap}")
        if self.onion_path_len < 1:
            raise ConfigError(
                f"protocol.onion_path_len: must be >= 1, got {self.onion_path_len}")
        if (self.adversary_ratios is None) == (self.adversary_nodes is None):
            raise ConfigError(
                "adversary: give exactly one of adversary.ratio or adversary.nodes")
        if self.adversary_ratios is not None:
            for f in self.adversary_ratios:
                if not (0.0 <= f < 1.0):
                    raise ConfigError(f"adversary.ratio: must lie in [0, 1), got {f}")
        for placement in self.adversary_placements:
            if placement not in PLACEMENTS:
                raise ConfigError(
                    f"adversary.placement: unknown placement {placement!r}")
        if not self.estimators:
            raise ConfigError("estimator: need at least one estimator")
        for est in self.estimators:
            if est not in ESTIMATORS:
                raise ConfigError(f"estimator: unknown estimator {est!r}")
        if self.num_messages < 1:
            raise ConfigError(f"num_messages: must be >= 1, got {self.num_messages}")
        if not self.seeds:
            raise ConfigError("seeds: need at least one seed")
        # estimation needs someone to observe; ratio floors are checked against
        # generated sizes here and against loaded files at run time
        if self.estimators and self.adversary_ratios is not None:
            for f in self.adversary_ratios:
                if "file" not in self.topology_kinds and int(f * self.n + 1e-9) < 1:
                    raise ConfigError(
                        f"adversary.ratio: floor({f} * {self.n}) is an empty adversary "
                        f"set but estimation metrics were requested")
        if self.estimators and self.adversary_nodes is not None and not self.adversary_nodes:
            raise ConfigError("adversary.nodes: empty adversary set but estimation "
                              "metrics were requested")
        return self

    def cells(self):
        """Expand sweep axes into deduplicated CellSpecs, config order."""
        seen = set()
        out = []
        ratios = self.adversary_ratios if self.adversary_ratios is not None else (None,)
        placements = (self.adversary_placements if self.adversary_nodes is None
                      else ("explicit",))
        for topology in self.topology_kinds:
            for kind in self.protocol_kinds:
                ps = self.broadcast_probabilities if kind in STEM_KINDS else (None,)
                for mode in self.broadcast_modes:
                    for p in ps:
                        for ratio in ratios:
                            for placement in placements:
                                for active in self.adversary_actives:
                                    cell = CellSpec(topology, kind, mode, p, ratio,
                                                    placement, bool(active))
                                    if cell not in seen:
                                        seen.add(cell)
                                        out.append(cell)
        return out


# -- config file parsing ------------------------------------------------

_LIST_STR = "list_str"
_LIST_FLOAT = "list_float"
_LIST_INT = "list_int"
_LIST_BOOL = "list_bool"
_SEEDS = "seeds"

# config key -> (value kind, ExperimentConfig field)
CONFIG_KEYS = {
    "topology.kind": (_LIST_STR, "topology_kinds"),
    "topology.n": ("int", "n"),
    "topology.k": ("int", "k"),
    "topology.m": ("int", "m"),
    "topology.path": ("str", "graph_path"),
    "weights.node_mode": ("str", "node_mode"),
    "weights.edge_mode": ("str", "edge_mode"),
    "weights.normal_mean_ms": ("float", "normal_mean_ms"),
    "weights.normal_std_ms": ("float", "normal_std_ms"),
    "weights.uniform_low_ms": ("float", "uniform_low_ms"),
    "weights.uniform_high_ms": ("float", "uniform_high_ms"),
    "weights.stake_mu": ("float", "stake_mu"),
    "weights.stake_sigma": ("float", "stake_sigma"),
    "weights.node_weight_file": ("str", "node_weight_file"),
    "protocol.kind": (_LIST_STR, "protocol_kinds"),
    "protocol.broadcast_mode": (_LIST_STR, "broadcast_modes"),
    "protocol.broadcast_probability": (_LIST_FLOAT, "broadcast_probabilities"),
    "protocol.stem_cap": ("int", "stem_cap"),
    "protocol.onion_path_len": ("int", "onion_path_len"),
    "adversary.ratio": (_LIST_FLOAT, "adversary_ratios"),
    "adversary.nodes": (_LIST_INT, "adversary_nodes"),
    "adversary.placement": (_LIST_STR, "adversary_placements"),
    "adversary.active": (_LIST_BOOL, "adversary_actives"),
    "adversary.protocol_aware": ("bool", "protocol_aware"),
    "estimator": (_LIST_STR, "estimators"),
    "num_messages": ("int", "num_messages"),
    "seeds": (_SEEDS, "seeds"),
    "use_node_weights": ("bool", "use_node_weights"),
    "output_path": ("str", "output_path"),
}


def _parse_bool(tok, key):
    low = tok.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {tok!r}")


def _parse_scalar(kind, tok, key):
    try:
        if kind == "int":
            return int(tok)
        if kind == "float":
            return float(tok)
    except ValueError:
        raise ConfigError(f"{key}: expected a {kind}, got {tok!r}") from None
    if kind == "bool":
        return _parse_bool(tok, key)
    return tok


def _parse_value(kind, value, key):
    if kind in ("int", "float", "bool", "str"):
        return _parse_scalar(kind, value, key)
    items = [t.strip() for t in value.split(",") if t.strip()]
    if not items:
        raise ConfigError(f"{key}: empty value")
    if kind == _LIST_STR:
        return tuple(items)
    if kind == _LIST_FLOAT:
        return tuple(_parse_scalar("float", t, key) for t in items)
    if kind == _LIST_INT:
        return tuple(_parse_scalar("int", t, key) for t in items)
    if kind == _LIST_BOOL:
        return tuple(_parse_bool(t, key) for t in items)
    # seeds: comma list of ints, each item may be a lo..hi range
    seeds = []
    for t in items:
        if ".." in t:
            lo, _, hi = t.partition("..")
            lo = _parse_scalar("int", lo.strip(), key)
            hi = _parse_scalar("int", hi.strip(), key)
            if hi < lo:
                raise ConfigError(f"{key}: empty range {t!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(_parse_scalar("int", t, key))
    return tuple(seeds)


def parse_config(text, base_dir=None):
    """Parse config text into a validated ExperimentConfig."""
    cfg = ExperimentConfig()
    explicit_ratio = False
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        kind, attr = CONFIG_KEYS[key]
        setattr(cfg, attr, _parse_value(kind, value, key))
        if key == "adversary.ratio":
            explicit_ratio = True
    if cfg.adversary_nodes is not None and not explicit_ratio:
        cfg.adversary_ratios = None
    if base_dir:
        for attr in ("graph_path", "node_weight_file"):
            p = getattr(cfg, attr)
            if p and not os.path.isabs(p):
                setattr(cfg, attr, os.path.join(base_dir, p))
    return cfg.validate()


def load_config(path):
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


# -- execution -----------------------------------------------------------

_GRAPH_CACHE = {}


def _graph_for(cfg, topology, seed):
    """Weighted graph for one (config, topology, seed); cached per process."""
    spec = cfg.weight_spec()
    key = (topology, cfg.n, cfg.k, cfg.m, cfg.graph_path, cfg.node_weight_file,
           spec.key(), seed)
    graph = _GRAPH_CACHE.get(key)
    if graph is None:
        if topology == "regular":
            graph = gen_random_regular(cfg.n, cfg.k, seed)
        elif topology == "scale_free":
            graph = gen_scale_free(cfg.n, cfg.m, seed)
        else:
            graph = load_graph(cfg.graph_path)
        graph = assign_weights(graph, spec, seed)
        if cfg.node_weight_file:
            graph = load_node_weights(graph, cfg.node_weight_file)
        _GRAPH_CACHE[key] = graph
    return graph


def _k_or_m(cfg, topology):
    if topology == "regular":
        return cfg.k
    if topology == "scale_free":
        return cfg.m
    return None


def run_cell(cfg, cell, seed):
    """Simulate one cell at one seed; returns one row dict per estimator."""
    graph = _graph_for(cfg, cell.topology, seed)
    adv_cfg = AdversaryConfig(
        ratio=cell.adversary_ratio,
        nodes=cfg.adversary_nodes,
        placement=cell.adversary_placement if cell.adversary_placement != "explicit"
        else "random",
        active=cell.adversary_active,
        protocol_aware=cfg.protocol_aware)
    adversary = Adversary(graph, adv_cfg, seed)
    if cfg.estimators and not adversary.nodes:
        raise ConfigError(
            f"adversary.ratio: floor({cell.adversary_ratio} * {graph.n}) is an empty "
            f"adversary set but estimation metrics were requested")
    proto_cfg = ProtocolConfig(
        kind=cell.protocol,
        broadcast_mode=cell.broadcast_mode,
        broadcast_probability=(cell.broadcast_probability
                               if cell.broadcast_probability is not None else 0.5),
        stem_cap=cfg.stem_cap,
        onion_path_len=cfg.onion_path_len)
    protocol = make_protocol(graph, proto_cfg, seed)
    sim = Simulation(graph, protocol, adversary, num_messages=cfg.num_messages,
                     seed=seed, use_node_weights=cfg.use_node_weights)
    run = sim.run()
    ratio = cell.adversary_ratio
    if ratio is None:
        ratio = len(adversary.nodes) / graph.n
    rows = []
    for estimator in cfg.estimators:
        report = evaluate(run, adversary, graph, protocol, estimator)
        rows.append({
            "topology": cell.topology,
            "n": graph.n,
            "k_or_m": _k_or_m(cfg, cell.topology),
            "protocol": cell.protocol,
            "broadcast_mode": cell.broadcast_mode,
            "broadcast_probability": cell.broadcast_probability,
            "adversary_ratio": ratio,
            "adversary_placement": cell.adversary_placement,
            "adversary_active": cell.adversary_active,
            "estimator": estimator,
            "seed": seed,
            "num_msg": report.num_messages,
            "num_unobserved": report.num_unobserved,
            "hit_ratio": report.hit_ratio,
            "inverse_rank": report.inverse_rank,
            "entropy": report.entropy,
            "ndcg": report.ndcg,
            "message_spread_ratio": report.message_spread_ratio,
        })
    return rows


def _run_task(args):
    cfg, cell, seed = args
    return run_cell(cfg, cell, seed)


def _row_sort_key(row):
    return (row["topology"], row["n"], str(row["k_or_m"]), row["protocol"],
            row["broadcast_mode"],
            -1.0 if row["broadcast_probability"] is None else row["broadcast_probability"],
            row["adversary_ratio"], row["adversary_placement"],
            row["adversary_active"], row["estimator"], row["seed"])


def run_experiment(cfg, out_dir=".", parallel=1):
    """Run the full sweep and write the report and aggregate CSVs.

    Cells x seeds are independent; with parallel > 1 they are distributed over
    worker processes. Rows are gathered and sorted before writing, so the
    output bytes do not depend on scheduling.
    """
    cfg.validate()
    cells = cfg.cells()
    # seed-major order so a worker chunk reuses one seed's graphs
    tasks = [(cfg, cell, seed) for seed in cfg.seeds for cell in cells]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(cells))))
    else:
        results = [_run_task(t) for t in tasks]
    rows = [row for chunk in results for row in chunk]
    rows.sort(key=_row_sort_key)

    report_path = cfg.output_path or "report.csv"
    if not os.path.isabs(report_path):
        report_path = os.path.join(out_dir, report_path)
    os.makedirs(os.path.dirname(report_path) or ".", exist_ok=True)
    write_report(rows, report_path)
    aggregate_path = _aggregate_path(report_path)
    write_aggregate(aggregate_rows(rows), aggregate_path)
    return rows, report_path, aggregate_path


def _aggregate_path(report_path):
    stem, ext = os.path.splitext(report_path)
    return f"{stem}_aggregate{ext or '.csv'}"


def _format(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_format(row[c]) for c in REPORT_COLUMNS])
    return path


def aggregate_rows(rows):
    """Mean and std over seeds for each (cell, estimator) group."""
    groups = {}
    for row in rows:
        key = tuple(row[c] for c in CELL_COLUMNS)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        seed_rows = groups[key]
        agg = dict(zip(CELL_COLUMNS, key))
        agg["num_seeds"] = len(seed_rows)
        for metric in METRIC_COLUMNS:
            vals = [r[metric] for r in seed_rows]
            mean = sum(vals) / len(vals)
            if len(vals) > 1:
                var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
                std = math.sqrt(var)
            else:
                std = 0.0
            agg[f"{metric}_mean"] = mean
            agg[f"{metric}_std"] = std
        out.append(agg)
    return out


AGGREGATE_COLUMNS = (CELL_COLUMNS + ["num_seeds"]
                     + [f"{m}_{s}" for m in METRIC_COLUMNS for s in ("mean", "std")])


def write_aggregate(agg_rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for row in agg_rows:
            writer.writerow([_format(row[c]) for c in AGGREGATE_COLUMNS])
    return path


# -- plot data ------------------------------------------------------------

# Figure presets: which metrics to emit and which columns distinguish series.
# x is always the adversary ratio. Presets whose configs sweep several
# protocols keep the estimator in the series label so both estimators can be
# plotted from one report.
FIGURE_PRESETS = {
    "figure1": {  # estimator comparison across protocols
        "metrics": ["hit_ratio", "inverse_rank", "ndcg"],
        "series": ["protocol", "broadcast_probability", "estimator"],
    },
    "figure2": {  # entropy of the candidate distributions
        "metrics": ["entropy"],
        "series": ["protocol", "broadcast_probability", "estimator"],
    },
    "figure3": {  # topology comparison
        "metrics": ["hit_ratio", "inverse_rank", "ndcg"],
        "series": ["topology", "protocol", "broadcast_probability", "estimator"],
    },
    "figure4": {  # broadcast fanout settings
        "metrics": ["inverse_rank"],
        "series": ["protocol", "broadcast_mode", "estimator"],
    },
    "figure5": {  # robustness: spread under censorship
        "metrics": ["message_spread_ratio"],
        "series": ["protocol", "adversary_placement", "adversary_active"],
    },
    "figure6": {  # active vs passive adversary power
        "metrics": ["inverse_rank"],
        "series": ["topology", "protocol", "adversary_active"],
    },
}

PLOT_COLUMNS = ["figure", "metric", "series", "x", "y", "y_err"]


def emit_plot_data(report_path, figure, out_path=None):
    """Reduce a report CSV to long-format plot data for one figure preset."""
    preset = FIGURE_PRESETS.get(figure)
    if preset is None:
        raise ConfigError(
            f"unknown figure preset {figure!r}, available: {', '.join(sorted(FIGURE_PRESETS))}")
    with open(report_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REPORT_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"report is missing columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise SchemaError("report has no data rows")

    groups = {}
    for row in rows:
        series = "|".join(row[c] for c in preset["series"] if row[c] != "")
        try:
            x = float(row["adversary_ratio"])
        except ValueError:
            raise SchemaError(
                f"bad adversary_ratio value {row['adversary_ratio']!r}") from None
        for metric in preset["metrics"]:
            try:
                y = float(row[metric])
            except ValueError:
                raise SchemaError(f"bad {metric} value {row[metric]!r}") from None
            groups.setdefault((metric, series, x), []).append(y)

    out_path = out_path or f"{os.path.splitext(report_path)[0]}_{figure}.csv"
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PLOT_COLUMNS)
        for metric, series, x in sorted(groups):
            ys = groups[(metric, series, x)]
            mean = sum(ys) / len(ys)
            if len(ys) > 1:
                var = sum((v - mean) ** 2 for v in ys) / (len(ys) - 1)
                err = math.sqrt(var)
            else:
                err = 0.0
            writer.writerow([figure, metric, series, repr(x), repr(mean), repr(err)])
    return out_path
