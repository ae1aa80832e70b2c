"""Layered trading-network data model, synthetic market generators, and
file persistence.

A market is a layered directed graph: each (asset, day) pair forms one
layer over the same dealer set, a node is a (dealer, asset, day) triple,
and a directed edge is a potential seller-to-buyer trade inside one layer.
Nodes are indexed ``(asset * n_days + day) * n_dealers + dealer`` so that
layers occupy contiguous index blocks; edges are kept sorted by
(asset, day, seller, buyer), which makes every grouped reduction and every
argmax tie-break (lowest buyer id first) deterministic.

Feature tables follow the data model of the generators: asset features X
are keyed by (asset, day), dealer features Y by (dealer, day), relationship
features E by the ordered pair (seller, buyer, day) and shared across the
asset layers of one day, and customer values u by full node triples.
"""

import csv
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import seeds
from .errors import ConfigError, ParseError, SchemaError
from .validation import (
    check_nonnegative,
    check_positive_int,
    check_probability,
    check_vector,
)

logger = logging.getLogger(__name__)

NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"
OBSERVED_FILE = "observed.csv"

TOPOLOGY_ER = "er"
TOPOLOGY_CORE_PERIPHERY = "core-periphery"


@dataclass(frozen=True)
class NodeKey:
    """Identity of one node: a dealer trading one asset on one day."""

    dealer: int
    asset: int
    day: int


@dataclass(frozen=True)
class EdgeKey:
    """Identity of one directed potential trade inside a layer."""

    seller: int
    buyer: int
    asset: int
    day: int


@dataclass(frozen=True)
class TopologyER:
    """Erdos-Renyi layers: each ordered dealer pair is linked independently."""

    p_edge: float

    def validate(self, n_dealers):
        check_probability(self.p_edge, "topology.p_edge")


@dataclass(frozen=True)
class TopologyCorePeriphery:
    """Core-periphery layers: link probability depends on core membership.

    Dealers ``[0, n_core)`` form the core.  An ordered pair is linked with
    probability ``p_cc`` when both dealers are core, ``p_cp`` when exactly
    one is, and ``p_pp`` when both are periphery.
    """

    n_core: int
    p_cc: float
    p_cp: float
    p_pp: float

    def validate(self, n_dealers):
        check_positive_int(self.n_core, "topology.n_core")
        if self.n_core > n_dealers:
            raise ConfigError(
                f"topology.n_core ({self.n_core}) exceeds the dealer count ({n_dealers})"
            )
        check_probability(self.p_cc, "topology.p_cc")
        check_probability(self.p_cp, "topology.p_cp")
        check_probability(self.p_pp, "topology.p_pp")


@dataclass
class GenConfig:
    """Configuration of one synthetic market draw.

    Noise scales are standard deviations.  Customer values are drawn as
    ``u = exp(mu_u + z)`` with ``z`` uniform on ``[0, sigma_u]``, which
    reproduces the documented value range ``[exp(mu_u), exp(mu_u + sigma_u)]``
    for the default location ``mu_u = 5``.
    """

    n_dealers: int
    n_assets: int
    n_days: int
    topology: object = field(default_factory=lambda: TopologyER(0.7))
    d_x: int = 1
    d_y: int = 1
    d_e: int = 1
    beta_x: np.ndarray = field(default_factory=lambda: np.ones(1))
    beta_y: np.ndarray = field(default_factory=lambda: np.ones(1))
    eta: np.ndarray = field(default_factory=lambda: np.ones(1))
    sigma_c: float = 0.1
    sigma_pi: float = 0.1
    sigma_u: float = 0.1
    mu_u: float = 5.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        self.n_dealers = check_positive_int(self.n_dealers, "dims.dealers")
        self.n_assets = check_positive_int(self.n_assets, "dims.assets")
        self.n_days = check_positive_int(self.n_days, "dims.days")
        if not isinstance(self.topology, (TopologyER, TopologyCorePeriphery)):
            raise ConfigError(f"unknown topology {self.topology!r}")
        self.topology.validate(self.n_dealers)
        self.d_x = check_positive_int(self.d_x, "feature_dims.d_x")
        self.d_y = check_positive_int(self.d_y, "feature_dims.d_y")
        self.d_e = check_positive_int(self.d_e, "feature_dims.d_e")
        self.beta_x = check_vector(self.beta_x, self.d_x, "true_params.beta_x")
        self.beta_y = check_vector(self.beta_y, self.d_y, "true_params.beta_y")
        self.eta = check_vector(self.eta, self.d_e, "true_params.eta")
        self.sigma_c = check_nonnegative(self.sigma_c, "noise.sigma_c")
        self.sigma_pi = check_nonnegative(self.sigma_pi, "noise.sigma_pi")
        self.sigma_u = check_nonnegative(self.sigma_u, "noise.sigma_u")
        self.mu_u = float(self.mu_u)
        self.seed = int(self.seed)

    @property
    def n_layers(self):
        return self.n_assets * self.n_days

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


@dataclass
class FeatureTable:
    """Feature arrays of one market.

    Shapes: ``x`` is (n_assets, n_days, d_x), ``y`` is (n_dealers, n_days,
    d_y), ``e`` is (n_days, n_dealers, n_dealers, d_e) over ordered pairs,
    ``u`` is (n_dealers, n_assets, n_days), and the optional dealer-customer
    features ``z`` are (n_dealers, n_days, d_z).  Entries of ``e`` for pairs
    that share no layer edge on that day are zero.
    """

    x: np.ndarray
    y: np.ndarray
    e: np.ndarray
    u: np.ndarray
    z: np.ndarray = None


@dataclass(eq=False)
class TradingGraph:
    """A layered trading network with attached features.

    ``edges`` is an (n_edges, 4) integer array with columns (seller, buyer,
    asset, day) in canonical order: sorted by (asset, day, seller, buyer).
    Use :meth:`create` to build one from unsorted edge columns.
    """

    n_dealers: int
    n_assets: int
    n_days: int
    edges: np.ndarray
    features: FeatureTable

    @classmethod
    def create(cls, n_dealers, n_assets, n_days, edges, features):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 4)
        if edges.shape[0]:
            _validate_edge_columns(edges, n_dealers, n_assets, n_days)
            order = np.lexsort((edges[:, 1], edges[:, 0], edges[:, 3], edges[:, 2]))
            edges = edges[order]
            packed = _pack_edges(edges, n_dealers, n_assets, n_days)
            if np.unique(packed).shape[0] != edges.shape[0]:
                raise SchemaError("duplicate edges in graph")
        return cls(n_dealers, n_assets, n_days, edges, features)

    @property
    def n_nodes(self):
        return self.n_dealers * self.n_assets * self.n_days

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @property
    def n_layers(self):
        return self.n_assets * self.n_days

    @property
    def d_x(self):
        return self.features.x.shape[2]

    @property
    def d_y(self):
        return self.features.y.shape[2]

    @property
    def d_e(self):
        return self.features.e.shape[3]

    def node_index(self, dealer, asset, day):
        """Flat node index of (dealer, asset, day); accepts arrays."""
        return (np.asarray(asset) * self.n_days + np.asarray(day)) * self.n_dealers + np.asarray(dealer)

    @cached_property
    def node_dealer(self):
        return np.tile(np.arange(self.n_dealers), self.n_assets * self.n_days)

    @cached_property
    def node_asset(self):
        return np.repeat(np.arange(self.n_assets), self.n_days * self.n_dealers)

    @cached_property
    def node_day(self):
        return np.tile(np.repeat(np.arange(self.n_days), self.n_dealers), self.n_assets)

    @cached_property
    def node_u(self):
        """Customer values in node order."""
        return np.ascontiguousarray(np.transpose(self.features.u, (1, 2, 0)).reshape(-1))

    @cached_property
    def node_x(self):
        """Asset features per node, shape (n_nodes, d_x)."""
        flat = self.features.x.reshape(self.n_assets * self.n_days, self.d_x)
        return np.repeat(flat, self.n_dealers, axis=0)

    @cached_property
    def node_y(self):
        """Dealer features per node, shape (n_nodes, d_y)."""
        return self.features.y[self.node_dealer, self.node_day, :]

    @cached_property
    def seller_nodes(self):
        """Node index of each edge's seller; nondecreasing in canonical order."""
        return self.node_index(self.edges[:, 0], self.edges[:, 2], self.edges[:, 3])

    @cached_property
    def buyer_nodes(self):
        return self.node_index(self.edges[:, 1], self.edges[:, 2], self.edges[:, 3])

    @cached_property
    def edge_e(self):
        """Relationship features per edge, shape (n_edges, d_e)."""
        return self.features.e[self.edges[:, 3], self.edges[:, 0], self.edges[:, 1], :]

    @cached_property
    def out_start(self):
        """Start offset of each node's out-edge block, shape (n_nodes + 1,)."""
        return np.searchsorted(self.seller_nodes, np.arange(self.n_nodes + 1))

    @cached_property
    def _nonempty_nodes(self):
        counts = np.diff(self.out_start)
        return np.flatnonzero(counts > 0)

    @cached_property
    def _reduce_starts(self):
        return self.out_start[self._nonempty_nodes]

    @cached_property
    def has_out_edges(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self._nonempty_nodes] = True
        return mask

    def grouped_best(self, edge_values):
        """Per-node maximum of ``edge_values`` over out-edges with its argmax.

        Returns ``(best, chosen_edge)`` where ``best`` is -inf and
        ``chosen_edge`` is -1 for nodes without out-edges.  Ties pick the
        first edge in canonical order, which is the lowest buyer id.
        """
        best = np.full(self.n_nodes, -np.inf)
        chosen = np.full(self.n_nodes, -1, dtype=np.int64)
        if self.n_edges:
            best[self._nonempty_nodes] = np.maximum.reduceat(edge_values, self._reduce_starts)
            cand = np.flatnonzero(edge_values >= best[self.seller_nodes])
            nodes, first = np.unique(self.seller_nodes[cand], return_index=True)
            chosen[nodes] = cand[first]
        return best, chosen

    def layer_adjacency(self, asset, day):
        """Directed boolean adjacency of one layer, shape (n_dealers, n_dealers)."""
        mask = (self.edges[:, 2] == asset) & (self.edges[:, 3] == day)
        adj = np.zeros((self.n_dealers, self.n_dealers), dtype=bool)
        adj[self.edges[mask, 0], self.edges[mask, 1]] = True
        return adj

    def adjacency(self):
        """Map NodeKey -> ordered list of buyer NodeKeys (sorted by buyer id)."""
        result = {}
        for asset in range(self.n_assets):
            for day in range(self.n_days):
                for dealer in range(self.n_dealers):
                    result[NodeKey(dealer, asset, day)] = []
        for seller, buyer, asset, day in self.edges:
            result[NodeKey(int(seller), int(asset), int(day))].append(
                NodeKey(int(buyer), int(asset), int(day))
            )
        return result

    def equals(self, other):
        """Exact equality of dims, edges, and all feature values."""
        if (self.n_dealers, self.n_assets, self.n_days) != (
            other.n_dealers,
            other.n_assets,
            other.n_days,
        ):
            return False
        if not np.array_equal(self.edges, other.edges):
            return False
        mine, theirs = self.features, other.features
        for a, b in ((mine.x, theirs.x), (mine.y, theirs.y), (mine.e, theirs.e), (mine.u, theirs.u)):
            if not np.array_equal(a, b):
                return False
        if (mine.z is None) != (theirs.z is None):
            return False
        if mine.z is not None and not np.array_equal(mine.z, theirs.z):
            return False
        return True


@dataclass
class ObservedTrades:
    """The observed interdealer trades: one row per selling node.

    ``node`` is the flat node index of the seller node; the remaining
    columns mirror the observed-prices file layout.
    """

    node: np.ndarray
    seller: np.ndarray
    buyer: np.ndarray
    asset: np.ndarray
    day: np.ndarray
    price: np.ndarray

    def __len__(self):
        return self.price.shape[0]


def layer_of(observed, n_days):
    """Layer index (asset * n_days + day) of each observed trade."""
    return observed.asset * n_days + observed.day


def _validate_edge_columns(edges, n_dealers, n_assets, n_days):
    if np.any(edges[:, 0] == edges[:, 1]):
        raise SchemaError("self-loop edge (seller equals buyer)")
    limits = (n_dealers, n_dealers, n_assets, n_days)
    names = ("seller", "buyer", "asset", "day")
    for col, (limit, name) in enumerate(zip(limits, names)):
        if np.any((edges[:, col] < 0) | (edges[:, col] >= limit)):
            raise SchemaError(f"edge {name} id out of range [0, {limit})")


def _pack_edges(edges, n_dealers, n_assets, n_days):
    return (
        (edges[:, 2] * n_days + edges[:, 3]) * n_dealers + edges[:, 0]
    ) * n_dealers + edges[:, 1]


def generate_features(config, rng):
    """Draw the feature table of one market.

    X, Y, and E entries are i.i.d. standard normal per coordinate; customer
    values are ``exp(mu_u + z)`` with ``z`` uniform on ``[0, sigma_u]``.
    E is drawn for every ordered dealer pair per day (diagonal zero); the
    graph generators afterwards zero the entries of pairs that carry no
    edge on that day.
    """
    x = rng.standard_normal((config.n_assets, config.n_days, config.d_x))
    y = rng.standard_normal((config.n_dealers, config.n_days, config.d_y))
    e = rng.standard_normal((config.n_days, config.n_dealers, config.n_dealers, config.d_e))
    idx = np.arange(config.n_dealers)
    e[:, idx, idx, :] = 0.0
    z = rng.uniform(0.0, config.sigma_u, (config.n_dealers, config.n_assets, config.n_days))
    u = np.exp(config.mu_u + z)
    return FeatureTable(x=x, y=y, e=e, u=u)


def _layer_masks(config):
    """Per-layer directed adjacency masks, each drawn from its own stream."""
    n = config.n_dealers
    masks = []
    for asset in range(config.n_assets):
        for day in range(config.n_days):
            layer_index = asset * config.n_days + day
            rng = seeds.layer_stream(config.seed, layer_index)
            draws = rng.random((n, n))
            mask = draws < _pair_probabilities(config, n)
            np.fill_diagonal(mask, False)
            masks.append(mask)
    return masks


def _pair_probabilities(config, n):
    topology = config.topology
    if isinstance(topology, TopologyER):
        return np.full((n, n), topology.p_edge)
    core = np.arange(n) < topology.n_core
    probs = np.where(
        core[:, None] & core[None, :],
        topology.p_cc,
        np.where(core[:, None] | core[None, :], topology.p_cp, topology.p_pp),
    )
    return probs


def _assemble(config, masks):
    features = generate_features(config, seeds.feature_stream(config.seed))
    rows = []
    present = np.zeros((config.n_days, config.n_dealers, config.n_dealers), dtype=bool)
    for asset in range(config.n_assets):
        for day in range(config.n_days):
            mask = masks[asset * config.n_days + day]
            pairs = np.argwhere(mask)
            if pairs.shape[0]:
                block = np.empty((pairs.shape[0], 4), dtype=np.int64)
                block[:, 0] = pairs[:, 0]
                block[:, 1] = pairs[:, 1]
                block[:, 2] = asset
                block[:, 3] = day
                rows.append(block)
                present[day, pairs[:, 0], pairs[:, 1]] = True
    edges = np.concatenate(rows, axis=0) if rows else np.empty((0, 4), dtype=np.int64)
    features.e[~present, :] = 0.0
    return TradingGraph.create(
        config.n_dealers, config.n_assets, config.n_days, edges, features
    )


def generate_er_graph(config):
    """Generate an Erdos-Renyi layered market from ``config``."""
    if not isinstance(config.topology, TopologyER):
        raise ConfigError("generate_er_graph requires an ER topology")
    return _assemble(config, _layer_masks(config))


def generate_core_periphery_graph(config):
    """Generate a core-periphery layered market from ``config``."""
    if not isinstance(config.topology, TopologyCorePeriphery):
        raise ConfigError("generate_core_periphery_graph requires a core-periphery topology")
    return _assemble(config, _layer_masks(config))


def generate_graph(config):
    """Generate a market, dispatching on the configured topology."""
    if isinstance(config.topology, TopologyER):
        return generate_er_graph(config)
    return generate_core_periphery_graph(config)


def _format_value(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])


def _read_csv(path):
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            rows = list(reader)
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty file")
    return rows[0], rows[1:]


def _parse_int(text, path, line, column):
    try:
        return int(text)
    except ValueError as exc:
        raise ParseError(f"{path}:{line}: column {column}: not an integer: {text!r}") from exc


def _parse_float(text, path, line, column):
    try:
        return float(text)
    except ValueError as exc:
        raise ParseError(f"{path}:{line}: column {column}: not a number: {text!r}") from exc


def _column_map(header, required, path):
    positions = {}
    for name in header:
        if name in positions:
            raise SchemaError(f"{path}: duplicate column {name!r}")
        positions[name] = len(positions)
    for name in required:
        if name not in positions:
            raise SchemaError(f"{path}: missing column {name!r}")
    return positions


def _feature_columns(header, prefix):
    names = []
    while f"{prefix}_{len(names) + 1}" in header:
        names.append(f"{prefix}_{len(names) + 1}")
    return names


def save_graph(graph, directory, node_extras=None, edge_extras=None):
    """Write ``nodes.csv`` and ``edges.csv`` under ``directory``.

    ``node_extras`` may carry truth columns ``c`` and ``v`` (node order);
    ``edge_extras`` may carry ``pi`` and ``p`` (canonical edge order).
    """
    directory = str(directory)
    node_extras = dict(node_extras or {})
    edge_extras = dict(edge_extras or {})

    node_header = ["dealer", "asset", "day", "u"]
    node_header += [f"X_{j + 1}" for j in range(graph.d_x)]
    node_header += [f"Y_{j + 1}" for j in range(graph.d_y)]
    node_header += [name for name in ("c", "v") if name in node_extras]
    node_rows = []
    for node in range(graph.n_nodes):
        dealer = int(graph.node_dealer[node])
        asset = int(graph.node_asset[node])
        day = int(graph.node_day[node])
        row = [dealer, asset, day, graph.node_u[node]]
        row += list(graph.node_x[node])
        row += list(graph.node_y[node])
        for name in ("c", "v"):
            if name in node_extras:
                row.append(node_extras[name][node])
        node_rows.append(row)
    _write_csv(f"{directory}/{NODES_FILE}", node_header, node_rows)

    edge_header = ["seller", "buyer", "asset", "day"]
    edge_header += [f"E_{j + 1}" for j in range(graph.d_e)]
    edge_header += [name for name in ("pi", "p") if name in edge_extras]
    edge_rows = []
    for index in range(graph.n_edges):
        seller, buyer, asset, day = (int(v) for v in graph.edges[index])
        row = [seller, buyer, asset, day]
        row += list(graph.edge_e[index])
        for name in ("pi", "p"):
            if name in edge_extras:
                row.append(edge_extras[name][index])
        edge_rows.append(row)
    _write_csv(f"{directory}/{EDGES_FILE}", edge_header, edge_rows)


def load_graph(directory):
    """Read a graph written by :func:`save_graph`.

    Returns ``(graph, extras)`` where ``extras`` holds any optional truth
    columns found: ``c``/``v`` per node and ``pi``/``p`` per edge.
    """
    directory = str(directory)
    nodes_path = f"{directory}/{NODES_FILE}"
    edges_path = f"{directory}/{EDGES_FILE}"

    header, rows = _read_csv(nodes_path)
    x_names = _feature_columns(header, "X")
    y_names = _feature_columns(header, "Y")
    if not x_names:
        raise SchemaError(f"{nodes_path}: missing column 'X_1'")
    if not y_names:
        raise SchemaError(f"{nodes_path}: missing column 'Y_1'")
    required = ["dealer", "asset", "day", "u"] + x_names + y_names
    positions = _column_map(header, required, nodes_path)
    has_c = "c" in positions
    has_v = "v" in positions

    records = []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != len(header):
            raise ParseError(f"{nodes_path}:{line}: expected {len(header)} fields, got {len(row)}")
        dealer = _parse_int(row[positions["dealer"]], nodes_path, line, "dealer")
        asset = _parse_int(row[positions["asset"]], nodes_path, line, "asset")
        day = _parse_int(row[positions["day"]], nodes_path, line, "day")
        u = _parse_float(row[positions["u"]], nodes_path, line, "u")
        xs = [_parse_float(row[positions[n]], nodes_path, line, n) for n in x_names]
        ys = [_parse_float(row[positions[n]], nodes_path, line, n) for n in y_names]
        extra = {}
        if has_c:
            extra["c"] = _parse_float(row[positions["c"]], nodes_path, line, "c")
        if has_v:
            extra["v"] = _parse_float(row[positions["v"]], nodes_path, line, "v")
        records.append((dealer, asset, day, u, xs, ys, extra))

    dealers = sorted({r[0] for r in records})
    assets = sorted({r[1] for r in records})
    days = sorted({r[2] for r in records})
    n_dealers, n_assets, n_days = len(dealers), len(assets), len(days)
    if dealers != list(range(n_dealers)) or assets != list(range(n_assets)) or days != list(range(n_days)):
        raise SchemaError(f"{nodes_path}: node ids must be dense integers starting at 0")
    if len(records) != n_dealers * n_assets * n_days:
        raise SchemaError(
            f"{nodes_path}: expected {n_dealers * n_assets * n_days} node rows, got {len(records)}"
        )

    d_x, d_y = len(x_names), len(y_names)
    x = np.full((n_assets, n_days, d_x), np.nan)
    y = np.full((n_dealers, n_days, d_y), np.nan)
    u = np.full((n_dealers, n_assets, n_days), np.nan)
    c = np.full(n_dealers * n_assets * n_days, np.nan) if has_c else None
    v = np.full(n_dealers * n_assets * n_days, np.nan) if has_v else None
    seen = set()
    for dealer, asset, day, u_val, xs, ys, extra in records:
        if (dealer, asset, day) in seen:
            raise SchemaError(f"{nodes_path}: duplicate node ({dealer}, {asset}, {day})")
        seen.add((dealer, asset, day))
        if u_val <= 0:
            raise SchemaError(f"{nodes_path}: customer value must be positive for node ({dealer}, {asset}, {day})")
        prev_x = x[asset, day]
        if np.all(np.isnan(prev_x)):
            x[asset, day] = xs
        elif not np.array_equal(prev_x, np.asarray(xs)):
            raise SchemaError(f"{nodes_path}: inconsistent asset features for (asset={asset}, day={day})")
        prev_y = y[dealer, day]
        if np.all(np.isnan(prev_y)):
            y[dealer, day] = ys
        elif not np.array_equal(prev_y, np.asarray(ys)):
            raise SchemaError(f"{nodes_path}: inconsistent dealer features for (dealer={dealer}, day={day})")
        u[dealer, asset, day] = u_val
        node = (asset * n_days + day) * n_dealers + dealer
        if has_c:
            c[node] = extra["c"]
        if has_v:
            v[node] = extra["v"]

    header, rows = _read_csv(edges_path)
    e_names = _feature_columns(header, "E")
    if not e_names:
        raise SchemaError(f"{edges_path}: missing column 'E_1'")
    required = ["seller", "buyer", "asset", "day"] + e_names
    positions = _column_map(header, required, edges_path)
    has_pi = "pi" in positions
    has_p = "p" in positions
    d_e = len(e_names)

    e = np.zeros((n_days, n_dealers, n_dealers, d_e))
    e_filled = np.zeros((n_days, n_dealers, n_dealers), dtype=bool)
    edge_rows = []
    pi_rows = []
    p_rows = []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != len(header):
            raise ParseError(f"{edges_path}:{line}: expected {len(header)} fields, got {len(row)}")
        seller = _parse_int(row[positions["seller"]], edges_path, line, "seller")
        buyer = _parse_int(row[positions["buyer"]], edges_path, line, "buyer")
        asset = _parse_int(row[positions["asset"]], edges_path, line, "asset")
        day = _parse_int(row[positions["day"]], edges_path, line, "day")
        if seller == buyer:
            raise ParseError(f"{edges_path}:{line}: self-loop edge (seller equals buyer)")
        es = [_parse_float(row[positions[n]], edges_path, line, n) for n in e_names]
        if not (0 <= seller < n_dealers and 0 <= buyer < n_dealers):
            raise SchemaError(f"{edges_path}:{line}: dealer id out of range")
        if not (0 <= asset < n_assets and 0 <= day < n_days):
            raise SchemaError(f"{edges_path}:{line}: asset or day id out of range")
        if e_filled[day, seller, buyer]:
            if not np.array_equal(e[day, seller, buyer], np.asarray(es)):
                raise SchemaError(
                    f"{edges_path}:{line}: inconsistent relationship features for pair ({seller}, {buyer}, day={day})"
                )
        else:
            e[day, seller, buyer] = es
            e_filled[day, seller, buyer] = True
        edge_rows.append((seller, buyer, asset, day))
        if has_pi:
            pi_rows.append(_parse_float(row[positions["pi"]], edges_path, line, "pi"))
        if has_p:
            p_rows.append(_parse_float(row[positions["p"]], edges_path, line, "p"))

    edges = np.asarray(edge_rows, dtype=np.int64).reshape(-1, 4)
    features = FeatureTable(x=x, y=y, e=e, u=u)
    graph = TradingGraph.create(n_dealers, n_assets, n_days, edges, features)

    extras = {}
    if has_c:
        extras["c"] = c
    if has_v:
        extras["v"] = v
    if edges.shape[0]:
        order = np.lexsort((edges[:, 1], edges[:, 0], edges[:, 3], edges[:, 2]))
    else:
        order = np.arange(0)
    if has_pi:
        extras["pi"] = np.asarray(pi_rows)[order]
    if has_p:
        extras["p"] = np.asarray(p_rows)[order]
    return graph, extras


def observed_from_columns(graph, seller, buyer, asset, day, price):
    """Build :class:`ObservedTrades` from raw columns, validating ids."""
    seller = np.asarray(seller, dtype=np.int64)
    buyer = np.asarray(buyer, dtype=np.int64)
    asset = np.asarray(asset, dtype=np.int64)
    day = np.asarray(day, dtype=np.int64)
    price = np.asarray(price, dtype=float)
    for values, limit, name in (
        (seller, graph.n_dealers, "seller"),
        (buyer, graph.n_dealers, "buyer"),
        (asset, graph.n_assets, "asset"),
        (day, graph.n_days, "day"),
    ):
        if values.size and (values.min() < 0 or values.max() >= limit):
            raise SchemaError(f"observed trade {name} id out of range [0, {limit})")
    node = graph.node_index(seller, asset, day)
    return ObservedTrades(node=node, seller=seller, buyer=buyer, asset=asset, day=day, price=price)


def save_observed(observed, path):
    """Write the observed-prices file: seller, buyer, asset, day, price."""
    rows = zip(observed.seller, observed.buyer, observed.asset, observed.day, observed.price)
    _write_csv(str(path), ["seller", "buyer", "asset", "day", "price"], rows)


def load_observed(path, graph):
    """Read the observed-prices file written by :func:`save_observed`."""
    path = str(path)
    header, rows = _read_csv(path)
    positions = _column_map(header, ["seller", "buyer", "asset", "day", "price"], path)
    sellers, buyers, assets, days, prices = [], [], [], [], []
    for offset, row in enumerate(rows):
        line = offset + 2
        if len(row) != len(header):
            raise ParseError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
        sellers.append(_parse_int(row[positions["seller"]], path, line, "seller"))
        buyers.append(_parse_int(row[positions["buyer"]], path, line, "buyer"))
        assets.append(_parse_int(row[positions["asset"]], path, line, "asset"))
        days.append(_parse_int(row[positions["day"]], path, line, "day"))
        prices.append(_parse_float(row[positions["price"]], path, line, "price"))
    return observed_from_columns(graph, sellers, buyers, assets, days, prices)


def gen_config_to_dict(config):
    """Serialize a :class:`GenConfig` to the nested config-file mapping."""
    if isinstance(config.topology, TopologyER):
        topology = {"kind": TOPOLOGY_ER, "p_edge": config.topology.p_edge}
    else:
        topology = {
            "kind": TOPOLOGY_CORE_PERIPHERY,
            "n_core": config.topology.n_core,
            "p_cc": config.topology.p_cc,
            "p_cp": config.topology.p_cp,
            "p_pp": config.topology.p_pp,
        }
    return {
        "seed": config.seed,
        "dims": {
            "dealers": config.n_dealers,
            "assets": config.n_assets,
            "days": config.n_days,
        },
        "topology": topology,
        "noise": {
            "sigma_c": config.sigma_c,
            "sigma_pi": config.sigma_pi,
            "sigma_u": config.sigma_u,
            "mu_u": config.mu_u,
        },
        "true_params": {
            "beta_x": [float(v) for v in config.beta_x],
            "beta_y": [float(v) for v in config.beta_y],
            "eta": [float(v) for v in config.eta],
        },
        "feature_dims": {"d_x": config.d_x, "d_y": config.d_y, "d_e": config.d_e},
    }


def _require_mapping(value, name):
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return value


def _check_known_keys(mapping, known, name):
    unknown = sorted(set(mapping) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {name}: {', '.join(unknown)}")


def gen_config_from_dict(data):
    """Parse the nested config-file mapping into a :class:`GenConfig`."""
    data = _require_mapping(data, "config")
    _check_known_keys(
        data, ("seed", "dims", "topology", "noise", "true_params", "feature_dims"), "config"
    )
    for key in ("dims", "topology"):
        if key not in data:
            raise ConfigError(f"config is missing required section {key!r}")
    dims = _require_mapping(data["dims"], "dims")
    _check_known_keys(dims, ("dealers", "assets", "days"), "dims")
    topo = _require_mapping(data["topology"], "topology")
    kind = topo.get("kind")
    if kind == TOPOLOGY_ER:
        _check_known_keys(topo, ("kind", "p_edge"), "topology")
        if "p_edge" not in topo:
            raise ConfigError("topology.p_edge is required for kind 'er'")
        topology = TopologyER(p_edge=float(topo["p_edge"]))
    elif kind == TOPOLOGY_CORE_PERIPHERY:
        _check_known_keys(topo, ("kind", "n_core", "p_cc", "p_cp", "p_pp"), "topology")
        missing = [k for k in ("n_core", "p_cc", "p_cp", "p_pp") if k not in topo]
        if missing:
            raise ConfigError(f"topology is missing {', '.join(missing)} for kind 'core-periphery'")
        topology = TopologyCorePeriphery(
            n_core=int(topo["n_core"]),
            p_cc=float(topo["p_cc"]),
            p_cp=float(topo["p_cp"]),
            p_pp=float(topo["p_pp"]),
        )
    else:
        raise ConfigError(
            f"topology.kind must be '{TOPOLOGY_ER}' or '{TOPOLOGY_CORE_PERIPHERY}', got {kind!r}"
        )
    noise = _require_mapping(data.get("noise", {}), "noise")
    _check_known_keys(noise, ("sigma_c", "sigma_pi", "sigma_u", "mu_u"), "noise")
    params = _require_mapping(data.get("true_params", {}), "true_params")
    _check_known_keys(params, ("beta_x", "beta_y", "eta"), "true_params")
    fdims = _require_mapping(data.get("feature_dims", {}), "feature_dims")
    _check_known_keys(fdims, ("d_x", "d_y", "d_e"), "feature_dims")

    kwargs = {
        "n_dealers": int(dims.get("dealers", 0)),
        "n_assets": int(dims.get("assets", 0)),
        "n_days": int(dims.get("days", 0)),
        "topology": topology,
        "d_x": int(fdims.get("d_x", 1)),
        "d_y": int(fdims.get("d_y", 1)),
        "d_e": int(fdims.get("d_e", 1)),
        "seed": int(data.get("seed", 0)),
    }
    if "beta_x" in params:
        kwargs["beta_x"] = np.asarray(params["beta_x"], dtype=float)
    if "beta_y" in params:
        kwargs["beta_y"] = np.asarray(params["beta_y"], dtype=float)
    if "eta" in params:
        kwargs["eta"] = np.asarray(params["eta"], dtype=float)
    for key in ("sigma_c", "sigma_pi", "sigma_u", "mu_u"):
        if key in noise:
            kwargs[key] = float(noise[key])
    return GenConfig(**kwargs)
