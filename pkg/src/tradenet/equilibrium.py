"""Latent-state generation, the dealer-value fixed point, and trade
realization.

The dealer value operator is, per node i with out-neighborhood N(i),

    T_i(v) = -c_i + max( max_{j in N(i)} [ pi_ij * v_i + (1 - pi_ij) * v_j ],
                         u_i )

where the inner expression is the bargaining price on edge (i, j).  T is a
sup-norm contraction with modulus 1 - eps, eps = min over edges of
min(pi, 1 - pi), so iterating from any start converges to the unique
equilibrium v*.  A seller trades interdealer exactly when its best price
strictly exceeds its customer value; everyone else sells to customers.

Edge prices reported by the solver are the prices of the final sweep, the
ones the final value update used: after L sweeps, ``v = -c + max(best(p), u)``
holds exactly for the reported ``p``.  Data generation runs a fixed number
of sweeps (default 10) so that the estimator's unrolled forward pass can
reproduce generated prices exactly; property checks and latent prediction
iterate to tolerance instead.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import seeds
from .errors import ConfigError, NumericError
from .graph import ObservedTrades, generate_graph
from .validation import check_positive_int, check_vector

logger = logging.getLogger(__name__)

MODE_FIXED_ITERATIONS = "fixed-iterations"
MODE_TO_TOLERANCE = "to-tolerance"

GENERATION_SWEEPS = 10
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 10_000

OUTCOME_INTERDEALER = 0
OUTCOME_CUSTOMER = 1
OUTCOME_ISOLATED = 2

OUTCOME_NAMES = {
    OUTCOME_INTERDEALER: "interdealer",
    OUTCOME_CUSTOMER: "customer",
    OUTCOME_ISOLATED: "isolated",
}


@dataclass
class LatentState:
    """Per-node holding costs ``c``, per-edge bargaining powers ``pi``, and
    per-node customer values ``u`` (all in canonical node/edge order)."""

    c: np.ndarray
    pi: np.ndarray
    u: np.ndarray

    def validate(self, graph):
        if self.c.shape != (graph.n_nodes,):
            raise ConfigError(f"c has shape {self.c.shape}, expected ({graph.n_nodes},)")
        if self.pi.shape != (graph.n_edges,):
            raise ConfigError(f"pi has shape {self.pi.shape}, expected ({graph.n_edges},)")
        if self.u.shape != (graph.n_nodes,):
            raise ConfigError(f"u has shape {self.u.shape}, expected ({graph.n_nodes},)")
        if np.any(self.c <= 0):
            raise ConfigError("holding costs must be strictly positive")
        if np.any(self.u <= 0):
            raise ConfigError("customer values must be strictly positive")
        if self.pi.size and (np.any(self.pi <= 0) or np.any(self.pi >= 1)):
            raise ConfigError("bargaining powers must lie strictly inside (0, 1)")

    @property
    def contraction_epsilon(self):
        """min over edges of min(pi, 1 - pi); the contraction modulus is 1 - eps."""
        if self.pi.size == 0:
            return np.nan
        return float(np.minimum(self.pi, 1.0 - self.pi).min())


@dataclass(frozen=True)
class SolveSettings:
    """How to iterate the value operator.

    In ``fixed-iterations`` mode the solver runs exactly ``max_iters``
    synchronous sweeps; in ``to-tolerance`` mode it stops once the sup-norm
    change drops below ``tol`` (or at ``max_iters``).
    """

    mode: str = MODE_TO_TOLERANCE
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.mode not in (MODE_FIXED_ITERATIONS, MODE_TO_TOLERANCE):
            raise ConfigError(f"unknown solve mode {self.mode!r}")
        check_positive_int(self.max_iters, "max_iters")
        if self.mode == MODE_TO_TOLERANCE and not self.tol > 0:
            raise ConfigError("tol must be > 0 in to-tolerance mode")

    @classmethod
    def fixed_iterations(cls, sweeps=GENERATION_SWEEPS):
        return cls(mode=MODE_FIXED_ITERATIONS, max_iters=sweeps, tol=0.0)

    @classmethod
    def to_tolerance(cls, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS):
        return cls(mode=MODE_TO_TOLERANCE, max_iters=max_iters, tol=tol)


@dataclass
class EquilibriumSolution:
    """Solved values with realized outcomes.

    ``p`` holds the final-sweep price of every edge; ``best_price`` is the
    per-node maximum over out-edges (NaN without out-edges).  ``outcome``
    is one of the OUTCOME_* codes; ``buyer`` is the buying dealer id for
    interdealer sales and -1 otherwise; ``sale_price`` is the realized sale
    price (customer value for customer sales and isolated nodes).
    """

    v: np.ndarray
    p: np.ndarray
    best_price: np.ndarray
    outcome: np.ndarray
    buyer: np.ndarray
    sale_price: np.ndarray
    chosen_edge: np.ndarray
    iterations_used: int
    final_residual: float
    contraction_epsilon: float


def gen_costs(graph, beta_x, beta_y, sigma_c, rng):
    """Generate holding costs c = exp(X beta_x + Y beta_y + eps) per node.

    ``eps`` is normal with standard deviation ``sigma_c``; zero noise gives
    the deterministic exponential index.
    """
    beta_x = check_vector(beta_x, graph.d_x, "beta_x")
    beta_y = check_vector(beta_y, graph.d_y, "beta_y")
    index = graph.node_x @ beta_x + graph.node_y @ beta_y
    if sigma_c > 0:
        index = index + rng.normal(0.0, sigma_c, graph.n_nodes)
    return np.exp(index)


def gen_bargaining(graph, eta, sigma_pi, rng):
    """Generate bargaining powers pi = logistic(E eta + nu) per edge.

    ``nu`` is normal with standard deviation ``sigma_pi``.
    """
    eta = check_vector(eta, graph.d_e, "eta")
    index = graph.edge_e @ eta
    if sigma_pi > 0:
        index = index + rng.normal(0.0, sigma_pi, graph.n_edges)
    return sigmoid(index)


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def edge_prices(state, graph, v):
    """Bargaining price per edge given values ``v``: pi*v_s + (1-pi)*v_b."""
    return state.pi * v[graph.seller_nodes] + (1.0 - state.pi) * v[graph.buyer_nodes]


def apply_T(state, graph, v):
    """One synchronous sweep of the value operator."""
    v = np.asarray(v, dtype=float)
    best, _ = graph.grouped_best(edge_prices(state, graph, v))
    return -state.c + np.maximum(best, state.u)


def solve_fixed_point(state, graph, settings=None, v0=None):
    """Iterate the value operator and realize outcomes.

    Starts from ``v0`` (default ``-c + u``).  Reported prices are the final
    sweep's prices, so ``v = -c + max(best_price, u)`` holds exactly for the
    returned arrays.
    """
    state.validate(graph)
    if settings is None:
        settings = SolveSettings.to_tolerance()
    if v0 is None:
        v = -state.c + state.u
    else:
        v = np.array(v0, dtype=float)
        if v.shape != (graph.n_nodes,):
            raise ConfigError(f"v0 has shape {v.shape}, expected ({graph.n_nodes},)")

    eps = state.contraction_epsilon
    logger.debug(
        "solving fixed point: %d nodes, %d edges, realized contraction epsilon %s",
        graph.n_nodes,
        graph.n_edges,
        eps,
    )

    p = np.zeros(graph.n_edges)
    best = np.full(graph.n_nodes, -np.inf)
    chosen = np.full(graph.n_nodes, -1, dtype=np.int64)
    residual = np.inf
    iterations = 0
    for _ in range(settings.max_iters):
        p = edge_prices(state, graph, v)
        best, chosen = graph.grouped_best(p)
        v_new = -state.c + np.maximum(best, state.u)
        if not np.all(np.isfinite(v_new)):
            node = int(np.flatnonzero(~np.isfinite(v_new))[0])
            raise NumericError(f"non-finite dealer value at node index {node}")
        residual = float(np.max(np.abs(v_new - v))) if graph.n_nodes else 0.0
        v = v_new
        iterations += 1
        if settings.mode == MODE_TO_TOLERANCE and residual < settings.tol:
            break

    has_out = graph.has_out_edges
    interdealer = has_out & (best > state.u)
    outcome = np.where(
        interdealer, OUTCOME_INTERDEALER, np.where(has_out, OUTCOME_CUSTOMER, OUTCOME_ISOLATED)
    ).astype(np.int8)
    buyer = np.full(graph.n_nodes, -1, dtype=np.int64)
    buyer[interdealer] = graph.edges[chosen[interdealer], 1]
    if graph.n_edges:
        chosen_price = p[np.where(chosen >= 0, chosen, 0)]
    else:
        chosen_price = np.zeros(graph.n_nodes)
    sale_price = np.where(interdealer, chosen_price, state.u)
    best_price = np.where(has_out, best, np.nan)
    return EquilibriumSolution(
        v=v,
        p=p,
        best_price=best_price,
        outcome=outcome,
        buyer=buyer,
        sale_price=sale_price,
        chosen_edge=chosen,
        iterations_used=iterations,
        final_residual=residual,
        contraction_epsilon=eps,
    )


def realize_trades(solution, graph):
    """Extract the observed interdealer trades from a solved equilibrium.

    A seller is observed exactly when its best price strictly exceeds its
    customer value; argmax ties go to the lowest buyer id.  Customer sales
    and isolated nodes are never observed.
    """
    nodes = np.flatnonzero(solution.outcome == OUTCOME_INTERDEALER)
    return ObservedTrades(
        node=nodes,
        seller=graph.node_dealer[nodes],
        buyer=solution.buyer[nodes],
        asset=graph.node_asset[nodes],
        day=graph.node_day[nodes],
        price=solution.sale_price[nodes],
    )


@dataclass
class SimulatedMarket:
    """One synthetic market draw: graph, latent truth, equilibrium, trades."""

    config: object
    graph: object
    state: LatentState
    solution: EquilibriumSolution
    observed: ObservedTrades


def simulate_market(config):
    """Generate a market and realize its trades end to end.

    Topology and features come from the named generation streams, latent
    noise from the latent stream, and the equilibrium runs a fixed number
    of synchronous sweeps (GENERATION_SWEEPS).
    """
    graph = generate_graph(config)
    rng = seeds.latent_stream(config.seed)
    c = gen_costs(graph, config.beta_x, config.beta_y, config.sigma_c, rng)
    pi = gen_bargaining(graph, config.eta, config.sigma_pi, rng)
    state = LatentState(c=c, pi=pi, u=graph.node_u.copy())
    solution = solve_fixed_point(state, graph, SolveSettings.fixed_iterations())
    observed = realize_trades(solution, graph)
    logger.info(
        "simulated market: %d nodes, %d edges, %d observed trades",
        graph.n_nodes,
        graph.n_edges,
        len(observed),
    )
    return SimulatedMarket(config=config, graph=graph, state=state, solution=solution, observed=observed)
