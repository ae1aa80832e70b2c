"""The trained message-passing estimator.

The forward pass recomputes latents from candidate parameters without
noise (c = exp(X beta_x + Y beta_y), pi = logistic(E eta)), initializes
dealer values at v = -c + u, runs L synchronous sweeps of price
computation and value update, and predicts each seller's best price as the
maximum final-sweep price over its out-edges (customer value for nodes
without out-edges).  The loss is the mean squared error over observed
sellers plus an optional L2 penalty; gradients run in reverse through the
unrolled sweeps, treating every max as linear along the branch recorded by
the forward pass (argmax ties picked the lowest buyer id, exact equality
with the customer value picked the customer branch).

Training starts from uniform random parameters and takes plain or
adaptive-moment gradient steps.  Because the data generator realizes
prices from the same L-sweep pass, a zero-noise market evaluated at the
true parameters has exactly zero loss.
"""

import logging
from dataclasses import dataclass

import numpy as np
import yaml
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import seeds
from .equilibrium import LatentState, SolveSettings, sigmoid, solve_fixed_point
from .errors import ConfigError, DataError, NumericError
from .linalg import least_squares
from .validation import check_nonnegative, check_positive_int, check_vector

logger = logging.getLogger(__name__)

OPTIMIZER_ADAM = "adaptive-moment"
OPTIMIZER_PLAIN = "plain-gradient-descent"

DEFAULT_SWEEPS = 10
DEFAULT_LR = 0.01
DEFAULT_EPOCHS = 300
DEFAULT_INIT_RANGE = 0.1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class ModelParams:
    """The estimation targets: coefficient vectors (beta_x, beta_y, eta)."""

    beta_x: np.ndarray
    beta_y: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        self.beta_x = np.asarray(self.beta_x, dtype=float).reshape(-1)
        self.beta_y = np.asarray(self.beta_y, dtype=float).reshape(-1)
        self.eta = np.asarray(self.eta, dtype=float).reshape(-1)

    @property
    def dims(self):
        return (self.beta_x.shape[0], self.beta_y.shape[0], self.eta.shape[0])

    def as_vector(self):
        return np.concatenate([self.beta_x, self.beta_y, self.eta])

    @classmethod
    def from_vector(cls, vector, dims):
        d_x, d_y, d_e = dims
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (d_x + d_y + d_e,):
            raise ConfigError(f"parameter vector has shape {vector.shape}, expected ({d_x + d_y + d_e},)")
        return cls(vector[:d_x], vector[d_x : d_x + d_y], vector[d_x + d_y :])

    def copy(self):
        return ModelParams(self.beta_x.copy(), self.beta_y.copy(), self.eta.copy())

    def validate_for(self, graph):
        check_vector(self.beta_x, graph.d_x, "beta_x")
        check_vector(self.beta_y, graph.d_y, "beta_y")
        check_vector(self.eta, graph.d_e, "eta")


@dataclass
class TrainConfig:
    """Training hyperparameters.

    ``n_sweeps`` is the number of message-passing iterations L; ``l2`` is
    the L2 penalty weight; ``optimizer`` is one of OPTIMIZER_ADAM or
    OPTIMIZER_PLAIN; ``init_range`` is the half-width of the uniform
    parameter initialization.
    """

    n_sweeps: int = DEFAULT_SWEEPS
    lr: float = DEFAULT_LR
    epochs: int = DEFAULT_EPOCHS
    l2: float = 0.0
    optimizer: str = OPTIMIZER_ADAM
    init_range: float = DEFAULT_INIT_RANGE
    seed: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    def __post_init__(self):
        self.n_sweeps = check_positive_int(self.n_sweeps, "n_sweeps")
        self.epochs = check_positive_int(self.epochs, "epochs")
        if not float(self.lr) > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        self.lr = float(self.lr)
        self.l2 = check_nonnegative(self.l2, "l2")
        if self.optimizer not in (OPTIMIZER_ADAM, OPTIMIZER_PLAIN):
            raise ConfigError(
                f"optimizer must be {OPTIMIZER_ADAM!r} or {OPTIMIZER_PLAIN!r}, got {self.optimizer!r}"
            )
        self.init_range = check_nonnegative(self.init_range, "init_range")
        self.seed = int(self.seed)


@dataclass
class ForwardTrace:
    """Everything the forward pass computed, for the backward pass.

    ``v_layers`` has L + 1 value vectors (initialization included);
    ``p_sweeps`` has the L per-sweep edge price vectors; ``p_final`` is
    ``p_sweeps[-1]``.  ``argmax_choices`` is an (L, n_nodes) matrix whose
    entry is the edge index taken by the value update (-1 for the customer
    branch or no out-edges); ``best_edge`` is the final sweep's per-node
    argmax edge regardless of branch, which defines ``pred_best``.
    """

    c: np.ndarray
    pi: np.ndarray
    v_layers: list
    p_sweeps: list
    p_final: np.ndarray
    pred_best: np.ndarray
    argmax_choices: np.ndarray
    best_edge: np.ndarray


@dataclass
class Gradients:
    """Loss gradients with respect to the model parameters."""

    d_beta_x: np.ndarray
    d_beta_y: np.ndarray
    d_eta: np.ndarray

    def as_vector(self):
        return np.concatenate([self.d_beta_x, self.d_beta_y, self.d_eta])


@dataclass
class OptimizerState:
    """Moment accumulators for the adaptive-moment optimizer."""

    t: int = 0
    m: np.ndarray = None
    v: np.ndarray = None

    @classmethod
    def zeros(cls, dim):
        return cls(t=0, m=np.zeros(dim), v=np.zeros(dim))


@dataclass
class FitResult:
    """Outcome of one training run."""

    params: ModelParams
    loss_trajectory: np.ndarray
    final_mse: float
    pred_best: np.ndarray
    epochs_run: int


def compute_latents(graph, params):
    """Noiseless candidate latents: costs per node, bargaining per edge."""
    params.validate_for(graph)
    c = np.exp(graph.node_x @ params.beta_x + graph.node_y @ params.beta_y)
    pi = sigmoid(graph.edge_e @ params.eta)
    return c, pi


def forward(graph, params, n_sweeps=DEFAULT_SWEEPS):
    """Run L synchronous message-passing sweeps and record the trace."""
    n_sweeps = check_positive_int(n_sweeps, "n_sweeps")
    c, pi = compute_latents(graph, params)
    u = graph.node_u
    s_nodes = graph.seller_nodes
    b_nodes = graph.buyer_nodes

    v = -c + u
    v_layers = [v]
    p_sweeps = []
    argmax_choices = np.full((n_sweeps, graph.n_nodes), -1, dtype=np.int64)
    best_edge = np.full(graph.n_nodes, -1, dtype=np.int64)
    for sweep in range(n_sweeps):
        p = pi * v[s_nodes] + (1.0 - pi) * v[b_nodes]
        best, chosen = graph.grouped_best(p)
        interdealer = best > u
        argmax_choices[sweep] = np.where(interdealer, chosen, -1)
        v = -c + np.maximum(best, u)
        if not np.all(np.isfinite(v)):
            node = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NumericError(f"non-finite dealer value at sweep {sweep}, node index {node}")
        v_layers.append(v)
        p_sweeps.append(p)
        best_edge = chosen

    p_final = p_sweeps[-1]
    pred_best = np.where(graph.has_out_edges, p_final[np.where(best_edge >= 0, best_edge, 0)], u)
    return ForwardTrace(
        c=c,
        pi=pi,
        v_layers=v_layers,
        p_sweeps=p_sweeps,
        p_final=p_final,
        pred_best=pred_best,
        argmax_choices=argmax_choices,
        best_edge=best_edge,
    )


def _check_observed(graph, observed, weights):
    if len(observed) == 0:
        raise DataError("observed set is empty")
    if not np.all(graph.has_out_edges[observed.node]):
        raise DataError("observed set contains a node without outgoing edges")
    if weights is None:
        weights = np.ones(len(observed))
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(observed),):
            raise ConfigError(f"weights have shape {weights.shape}, expected ({len(observed)},)")
        if np.any(weights < 0):
            raise ConfigError("weights must be nonnegative")
        if not weights.sum() > 0:
            raise ConfigError("weights must not sum to zero")
    return weights


def _penalty(params, l2):
    if l2 == 0:
        return 0.0
    return l2 * (
        float(params.beta_x @ params.beta_x)
        + float(params.beta_y @ params.beta_y)
        + float(params.eta @ params.eta)
    )


def loss(trace, graph, observed, params, l2=0.0, weights=None):
    """Weighted mean squared error over observed sellers plus L2 penalty.

    Multiplicity weights support bootstrap resamples; they are normalized
    by their sum, so unit weights give the plain mean.
    """
    weights = _check_observed(graph, observed, weights)
    err = trace.pred_best[observed.node] - observed.price
    mse = float((weights * err * err).sum() / weights.sum())
    return mse + _penalty(params, l2)


def backward(trace, graph, observed, params, l2=0.0, weights=None):
    """Reverse-mode gradient of :func:`loss` along the recorded branches."""
    weights = _check_observed(graph, observed, weights)
    n_sweeps = len(trace.p_sweeps)
    s_nodes = graph.seller_nodes
    b_nodes = graph.buyer_nodes
    pi = trace.pi

    g_pred = np.zeros(graph.n_nodes)
    err = trace.pred_best[observed.node] - observed.price
    np.add.at(g_pred, observed.node, 2.0 * weights * err / weights.sum())

    g_p = np.zeros(graph.n_edges)
    active = np.flatnonzero(g_pred)
    if active.size:
        np.add.at(g_p, trace.best_edge[active], g_pred[active])

    g_c = np.zeros(graph.n_nodes)
    g_pi = np.zeros(graph.n_edges)
    g_v = np.zeros(graph.n_nodes)
    for sweep in range(n_sweeps - 1, -1, -1):
        # Value update v_{l+1} = -c + max(best(p_l), u) along the recorded branch.
        g_c -= g_v
        choice = trace.argmax_choices[sweep]
        taken = np.flatnonzero((choice >= 0) & (g_v != 0))
        if taken.size:
            np.add.at(g_p, choice[taken], g_v[taken])
        # Price computation p_l = pi * v_l[s] + (1 - pi) * v_l[b].
        v_prev = trace.v_layers[sweep]
        g_pi += (v_prev[s_nodes] - v_prev[b_nodes]) * g_p
        g_v = np.zeros(graph.n_nodes)
        np.add.at(g_v, s_nodes, pi * g_p)
        np.add.at(g_v, b_nodes, (1.0 - pi) * g_p)
        g_p = np.zeros(graph.n_edges)
    # Initialization v_0 = -c + u.
    g_c -= g_v

    g_cost_index = trace.c * g_c
    g_pi_index = pi * (1.0 - pi) * g_pi
    d_beta_x = graph.node_x.T @ g_cost_index + 2.0 * l2 * params.beta_x
    d_beta_y = graph.node_y.T @ g_cost_index + 2.0 * l2 * params.beta_y
    d_eta = graph.edge_e.T @ g_pi_index + 2.0 * l2 * params.eta
    return Gradients(d_beta_x=d_beta_x, d_beta_y=d_beta_y, d_eta=d_eta)


def step(params, grads, state, config):
    """One optimizer step; returns updated parameters, mutating ``state``."""
    theta = params.as_vector()
    g = grads.as_vector()
    if config.optimizer == OPTIMIZER_PLAIN:
        theta = theta - config.lr * g
    else:
        state.t += 1
        state.m = config.beta1 * state.m + (1.0 - config.beta1) * g
        state.v = config.beta2 * state.v + (1.0 - config.beta2) * (g * g)
        m_hat = state.m / (1.0 - config.beta1 ** state.t)
        v_hat = state.v / (1.0 - config.beta2 ** state.t)
        theta = theta - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return ModelParams.from_vector(theta, params.dims)


def initial_params(graph, config):
    """Uniform random initialization from the named init stream."""
    rng = seeds.init_stream(config.seed)
    total = graph.d_x + graph.d_y + graph.d_e
    vector = rng.uniform(-config.init_range, config.init_range, total)
    return ModelParams.from_vector(vector, (graph.d_x, graph.d_y, graph.d_e))


def train(graph, observed, config=None, weights=None, init=None):
    """Run the full training loop; deterministic given ``config.seed``.

    ``weights`` are per-observation multiplicity weights; ``init`` overrides
    the random initialization (used by warm-started bootstrap replicates).
    Raises :class:`NumericError` carrying the epoch index on divergence.
    """
    if config is None:
        config = TrainConfig()
    weights = _check_observed(graph, observed, weights)
    params = init.copy() if init is not None else initial_params(graph, config)
    params.validate_for(graph)

    opt_state = OptimizerState.zeros(params.as_vector().shape[0])
    trajectory = np.empty(config.epochs)
    for epoch in range(config.epochs):
        try:
            trace = forward(graph, params, config.n_sweeps)
        except NumericError as exc:
            raise _divergence(epoch) from exc
        loss_val = loss(trace, graph, observed, params, config.l2, weights)
        if not np.isfinite(loss_val):
            raise _divergence(epoch)
        trajectory[epoch] = loss_val
        grads = backward(trace, graph, observed, params, config.l2, weights)
        params = step(params, grads, opt_state, config)

    try:
        final_trace = forward(graph, params, config.n_sweeps)
    except NumericError as exc:
        raise _divergence(config.epochs) from exc
    final_mse = loss(final_trace, graph, observed, params, 0.0, weights)
    if not np.isfinite(final_mse):
        raise _divergence(config.epochs)
    logger.info("trained %d epochs, final weighted mse %.6g", config.epochs, final_mse)
    return FitResult(
        params=params,
        loss_trajectory=trajectory,
        final_mse=final_mse,
        pred_best=final_trace.pred_best,
        epochs_run=config.epochs,
    )


def _divergence(epoch):
    error = NumericError(f"training diverged (non-finite loss) at epoch {epoch}")
    error.epoch = epoch
    return error


@dataclass
class LatentPrediction:
    """Converged latents under fitted parameters, for truth-vs-fit export."""

    c: np.ndarray
    pi: np.ndarray
    v: np.ndarray
    p: np.ndarray


def predict_latents(graph, params, tol=1e-10):
    """Latents from a converged (to-tolerance) solve under ``params``."""
    c, pi = compute_latents(graph, params)
    state = LatentState(c=c, pi=pi, u=graph.node_u.copy())
    solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=tol))
    return LatentPrediction(c=c, pi=pi, v=solution.v, p=solution.p)


@dataclass
class CustomerValueFit:
    """Log-linear customer-value regression: u_hat = exp(design @ gamma)."""

    gamma: np.ndarray
    column_names: tuple

    def predict(self, features):
        features = np.asarray(features, dtype=float)
        design = np.hstack([np.ones((features.shape[0], 1)), features])
        return np.exp(design @ self.gamma)


def estimate_customer_values(prices, features, column_names=None):
    """Pre-estimate customer values by OLS of log price on features.

    ``features`` is an (n, d) matrix of per-sale regressors (asset, dealer,
    and dealer-customer features); an intercept is always prepended.  A
    zero-column matrix therefore reduces to the geometric mean of prices.
    """
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1 or prices.shape[0] == 0:
        raise DataError("prices must be a nonempty 1-d array")
    if np.any(prices <= 0):
        raise DataError("customer sale prices must be strictly positive")
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[0] != prices.shape[0]:
        raise DataError(
            f"features must be 2-d with {prices.shape[0]} rows, got shape {features.shape}"
        )
    if column_names is None:
        column_names = [f"feature_{j + 1}" for j in range(features.shape[1])]
    names = ["intercept"] + list(column_names)
    design = np.hstack([np.ones((prices.shape[0], 1)), features])
    gamma, _, _ = least_squares(design, np.log(prices), column_names=names)
    return CustomerValueFit(gamma=gamma, column_names=tuple(names))


class TradingNetworkEstimator(BaseEstimator):
    """Estimator-style interface over :func:`train` and :func:`forward`.

    Parameters mirror :class:`TrainConfig`.  After :meth:`fit`, the fitted
    coefficient vectors live in ``params_`` and the per-epoch losses in
    ``loss_trajectory_``.  ``predict`` returns the per-node predicted best
    price (customer value for nodes without out-edges); ``score`` is the
    R-squared against observed prices.
    """

    def __init__(
        self,
        n_sweeps=DEFAULT_SWEEPS,
        lr=DEFAULT_LR,
        epochs=DEFAULT_EPOCHS,
        l2=0.0,
        optimizer=OPTIMIZER_ADAM,
        init_range=DEFAULT_INIT_RANGE,
        seed=0,
    ):
        self.n_sweeps = n_sweeps
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2
        self.optimizer = optimizer
        self.init_range = init_range
        self.seed = seed

    def _train_config(self):
        return TrainConfig(
            n_sweeps=self.n_sweeps,
            lr=self.lr,
            epochs=self.epochs,
            l2=self.l2,
            optimizer=self.optimizer,
            init_range=self.init_range,
            seed=self.seed,
        )

    def fit(self, graph, observed, weights=None, init=None):
        result = train(graph, observed, self._train_config(), weights=weights, init=init)
        self.params_ = result.params
        self.loss_trajectory_ = result.loss_trajectory
        self.final_mse_ = result.final_mse
        self.epochs_run_ = result.epochs_run
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("this TradingNetworkEstimator instance is not fitted yet")

    def predict(self, graph):
        self._check_fitted()
        return forward(graph, self.params_, self.n_sweeps).pred_best

    def score(self, graph, observed):
        self._check_fitted()
        pred = self.predict(graph)[observed.node]
        residual = observed.price - pred
        total = observed.price - observed.price.mean()
        return 1.0 - float(residual @ residual) / float(total @ total)


def save_model(path, params, config, metrics, epochs_run):
    """Write the fitted-model file (YAML: params, config, final metrics)."""
    payload = {
        "params": {
            "beta_x": [float(v) for v in params.beta_x],
            "beta_y": [float(v) for v in params.beta_y],
            "eta": [float(v) for v in params.eta],
        },
        "train": {
            "n_sweeps": config.n_sweeps,
            "lr": config.lr,
            "epochs": config.epochs,
            "l2": config.l2,
            "optimizer": config.optimizer,
            "init_range": config.init_range,
            "seed": config.seed,
        },
        "metrics": {key: float(value) for key, value in sorted(metrics.items())},
        "epochs_run": int(epochs_run),
    }
    with open(path, "w") as handle:
        yaml.safe_dump(payload, handle, sort_keys=True, default_flow_style=False)


def load_model(path):
    """Read a fitted-model file; returns (params, config, metrics, epochs_run)."""
    try:
        with open(path) as handle:
            payload = yaml.safe_load(handle)
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise DataError(f"malformed model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or "params" not in payload or "train" not in payload:
        raise DataError(f"model file {path} is missing required sections")
    raw = payload["params"]
    try:
        params = ModelParams(
            np.asarray(raw["beta_x"], dtype=float),
            np.asarray(raw["beta_y"], dtype=float),
            np.asarray(raw["eta"], dtype=float),
        )
        config = TrainConfig(**payload["train"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"model file {path} has malformed fields: {exc}") from exc
    metrics = dict(payload.get("metrics", {}))
    return params, config, metrics, int(payload.get("epochs_run", config.epochs))
