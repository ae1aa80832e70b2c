"""Shared test fixtures: tiny graph builders and a brute-force solver.

The brute-force solver below is written against the documented value
recursion using plain Python dictionaries and loops, independent of the
vectorized implementation, so the two can check each other.
"""

import numpy as np

from tradenet.equilibrium import LatentState
from tradenet.graph import FeatureTable, TradingGraph

BRUTE_FORCE_ITERS = 10_000
BRUTE_FORCE_TOL = 1e-12


def build_graph(n_dealers, edges, n_assets=1, n_days=1, u=None, x=None, y=None, e=None):
    """A small graph with explicit edges and optional explicit features."""
    if x is None:
        x = np.zeros((n_assets, n_days, 1))
    if y is None:
        y = np.zeros((n_dealers, n_days, 1))
    if e is None:
        e = np.zeros((n_days, n_dealers, n_dealers, 1))
    if u is None:
        u = np.full((n_dealers, n_assets, n_days), 10.0)
    features = FeatureTable(x=np.asarray(x, float), y=np.asarray(y, float), e=np.asarray(e, float), u=np.asarray(u, float))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 4)
    return TradingGraph.create(n_dealers, n_assets, n_days, edges, features)


def make_state(graph, c, pi, u=None):
    """Latent state from plain lists, in canonical node/edge order."""
    return LatentState(
        c=np.asarray(c, dtype=float),
        pi=np.asarray(pi, dtype=float),
        u=np.asarray(u, dtype=float) if u is not None else graph.node_u.astype(float),
    )


def random_instance(rng, max_dealers=5, n_assets=1, n_days=1, edge_prob=0.6):
    """A random small layered instance with well-separated bargaining powers."""
    n_dealers = int(rng.integers(1, max_dealers + 1))
    edges = []
    for asset in range(n_assets):
        for day in range(n_days):
            for seller in range(n_dealers):
                for buyer in range(n_dealers):
                    if seller != buyer and rng.random() < edge_prob:
                        edges.append((seller, buyer, asset, day))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 4)
    u = rng.uniform(5.0, 15.0, (n_dealers, n_assets, n_days))
    graph = build_graph(n_dealers, edges, n_assets=n_assets, n_days=n_days, u=u)
    state = LatentState(
        c=rng.uniform(0.5, 2.0, graph.n_nodes),
        pi=rng.uniform(0.05, 0.95, graph.n_edges),
        u=graph.node_u.astype(float),
    )
    return graph, state


def random_featured_instance(rng, max_dealers=5, noise=0.05):
    """A small instance with nonzero features and synthetic observed prices.

    Prices are the forward predictions at random true parameters plus
    optional noise, attached to every node with outgoing edges.
    """
    from tradenet.estimator import ModelParams, forward
    from tradenet.graph import ObservedTrades

    while True:
        n_dealers = int(rng.integers(2, max_dealers + 1))
        edges = []
        for seller in range(n_dealers):
            for buyer in range(n_dealers):
                if seller != buyer and rng.random() < 0.6:
                    edges.append((seller, buyer, 0, 0))
        if not edges:
            continue
        graph = build_graph(
            n_dealers,
            edges,
            x=rng.normal(0.0, 1.0, (1, 1, 1)),
            y=rng.normal(0.0, 1.0, (n_dealers, 1, 1)),
            e=rng.normal(0.0, 1.0, (1, n_dealers, n_dealers, 1)),
            u=rng.uniform(5.0, 15.0, (n_dealers, 1, 1)),
        )
        true_params = ModelParams(
            rng.uniform(-0.5, 0.5, 1), rng.uniform(-0.5, 0.5, 1), rng.uniform(-0.5, 0.5, 1)
        )
        nodes = np.flatnonzero(graph.has_out_edges)
        if nodes.size == 0:
            continue
        prices = forward(graph, true_params).pred_best[nodes]
        if noise > 0:
            prices = prices + rng.normal(0.0, noise, nodes.size)
        observed = ObservedTrades(
            node=nodes,
            seller=graph.node_dealer[nodes],
            buyer=np.full(nodes.size, -1, dtype=np.int64),
            asset=graph.node_asset[nodes],
            day=graph.node_day[nodes],
            price=prices,
        )
        return graph, observed, true_params


def brute_force_values(graph, state, n_iters=BRUTE_FORCE_ITERS, tol=BRUTE_FORCE_TOL):
    """Iterate the value recursion with dictionaries and pure Python."""
    n_dealers, n_days = graph.n_dealers, graph.n_days

    def node_id(dealer, asset, day):
        return (asset * n_days + day) * n_dealers + dealer

    out_edges = {}
    for row, pi in zip(graph.edges, state.pi):
        seller, buyer, asset, day = (int(value) for value in row)
        key = node_id(seller, asset, day)
        out_edges.setdefault(key, []).append((node_id(buyer, asset, day), float(pi)))

    values = [float(state.u[i]) - float(state.c[i]) for i in range(graph.n_nodes)]
    for _ in range(n_iters):
        updated = []
        for i in range(graph.n_nodes):
            best = None
            for j, pi in out_edges.get(i, []):
                price = pi * values[i] + (1.0 - pi) * values[j]
                if best is None or price > best:
                    best = price
            outside = float(state.u[i])
            inner = outside if best is None else max(best, outside)
            updated.append(-float(state.c[i]) + inner)
        residual = max(abs(a - b) for a, b in zip(updated, values))
        values = updated
        if residual < tol:
            break
    return np.asarray(values)
