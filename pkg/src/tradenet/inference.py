"""Bootstrap confidence intervals and evaluation metrics.

The bootstrap retrains the estimator on weighted resamples of the observed
prices; the network itself is never touched, multiplicities enter the loss
as observation weights.  Two resampling schemes are available:

* ``observations``: classical iid resampling of observed prices with
  replacement (the default).
* ``layers``: cluster resampling of whole (asset, day) layers.  The
  equilibrium couples every seller in a layer, so observed-price errors are
  correlated within layers; resampling layers keeps that dependence in the
  replicate distribution, which the iid scheme understates.
* ``days``: cluster resampling of whole days.  Dealer and relationship
  features are shared by every asset layer of a day, so days are the
  largest independent units of the generating process; resampling them
  captures all within-day dependence.

Replicates may start from a fresh uniform initialization (default) or warm
start at the point estimate.  Every replicate owns an RNG stream indexed by
its replicate number, so results do not depend on execution order and
replicates can run in parallel.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import seeds
from .errors import ConfigError, DataError, NumericError
from .estimator import ModelParams, TrainConfig, train
from .graph import layer_of
from .validation import check_positive_int, check_same_length, check_unit_open

logger = logging.getLogger(__name__)

SCHEME_OBSERVATIONS = "observations"
SCHEME_LAYERS = "layers"
SCHEME_DAYS = "days"
INIT_FRESH = "fresh"
INIT_WARM = "warm"

DEFAULT_REPLICATES = 100
DEFAULT_ALPHA = 0.05
MAX_DIVERGED_FRACTION = 0.1


@dataclass
class MetricsReport:
    """The comparison-table row: fit quality and information criteria."""

    r2: float
    mae: float
    mse: float
    n_params: int
    aic: float
    bic: float
    n_obs: int


@dataclass
class BootstrapConfig:
    """Bootstrap settings.

    ``resample_size`` defaults to the observed count (classical bootstrap).
    ``scheme`` picks iid observation resampling or layer-cluster resampling;
    ``init_mode`` picks fresh uniform initialization per replicate or a warm
    start at the point estimate.
    """

    n_replicates: int = DEFAULT_REPLICATES
    alpha: float = DEFAULT_ALPHA
    resample_size: int = None
    seed: int = 0
    scheme: str = SCHEME_OBSERVATIONS
    init_mode: str = INIT_FRESH
    n_jobs: int = 1

    def __post_init__(self):
        self.n_replicates = check_positive_int(self.n_replicates, "n_replicates")
        if self.n_replicates < 2:
            raise ConfigError(f"n_replicates must be >= 2, got {self.n_replicates}")
        self.alpha = check_unit_open(self.alpha, "alpha")
        if self.resample_size is not None:
            self.resample_size = check_positive_int(self.resample_size, "resample_size")
        self.seed = int(self.seed)
        if self.scheme not in (SCHEME_OBSERVATIONS, SCHEME_LAYERS, SCHEME_DAYS):
            raise ConfigError(
                f"scheme must be one of {SCHEME_OBSERVATIONS!r}, {SCHEME_LAYERS!r}, "
                f"{SCHEME_DAYS!r}, got {self.scheme!r}"
            )
        if self.init_mode not in (INIT_FRESH, INIT_WARM):
            raise ConfigError(
                f"init_mode must be {INIT_FRESH!r} or {INIT_WARM!r}, got {self.init_mode!r}"
            )
        self.n_jobs = int(self.n_jobs)
        if self.n_jobs == 0:
            raise ConfigError("n_jobs must be a nonzero integer (-1 means all cores)")


@dataclass
class BootstrapResult:
    """Kept parameter draws with percentile intervals.

    ``draws`` is (n_kept, n_params) in replicate order; ``replicates`` holds
    the original replicate index of each kept row.  ``point`` is the
    original-data fit when one was computed (reported alongside the
    bootstrap mean).
    """

    draws: np.ndarray
    replicates: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    alpha: float
    n_skipped: int
    point: ModelParams = None


def r2(pred, actual):
    """Coefficient of determination, 1 - SS_res / SS_tot."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    check_same_length(pred, actual, "pred", "actual")
    centered = actual - actual.mean()
    ss_tot = float(centered @ centered)
    if ss_tot == 0.0:
        raise DataError("actual values are constant; r2 is undefined")
    residual = actual - pred
    return 1.0 - float(residual @ residual) / ss_tot


def mae(pred, actual):
    """Mean absolute error."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    check_same_length(pred, actual, "pred", "actual")
    return float(np.abs(pred - actual).mean())


def mse(pred, actual):
    """Mean squared error."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    check_same_length(pred, actual, "pred", "actual")
    diff = pred - actual
    return float((diff * diff).mean())


def aic(k, ln_l):
    """Akaike information criterion, 2k - 2 ln L."""
    return 2.0 * k - 2.0 * ln_l


def bic(n, k, ln_l):
    """Bayesian information criterion, k ln n - 2 ln L."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    return k * math.log(n) - 2.0 * ln_l


def gaussian_ln_likelihood(residuals):
    """Concentrated Gaussian log-likelihood of regression residuals.

    ln L = -n/2 * (ln(2 pi sigma2) + 1) with sigma2 the mean squared
    residual; shared by the message-passing model and every OLS baseline so
    information criteria are comparable.
    """
    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim != 1 or residuals.shape[0] == 0:
        raise DataError("residuals must be a nonempty 1-d array")
    n = residuals.shape[0]
    sigma2 = float((residuals * residuals).mean())
    if sigma2 == 0.0:
        raise NumericError("zero residual variance; the Gaussian likelihood is degenerate")
    return -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)


def metrics_report(pred, actual, n_params):
    """Full comparison-table metrics of predictions against actuals.

    An exact fit has a degenerate Gaussian likelihood; its information
    criteria are reported as the limit, negative infinity.
    """
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    residuals = actual - pred
    if np.all(residuals == 0.0):
        ln_l = math.inf
    else:
        ln_l = gaussian_ln_likelihood(residuals)
    n = actual.shape[0]
    return MetricsReport(
        r2=r2(pred, actual),
        mae=mae(pred, actual),
        mse=mse(pred, actual),
        n_params=int(n_params),
        aic=aic(n_params, ln_l),
        bic=bic(n, n_params, ln_l),
        n_obs=n,
    )


def percentile(draws, q):
    """Linear-interpolation (type-7) percentile of ``draws`` at ``q`` in [0, 1]."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise DataError("cannot take a percentile of empty draws")
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ConfigError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(draws, q))


def resample_observed(observed, resample_size, rng):
    """Iid resample of observed prices; returns per-observation weights.

    Draws ``resample_size`` indices with replacement and returns the
    multiplicity of every original observation, so the weights always sum
    to ``resample_size`` and the network structure is untouched.
    """
    n = len(observed)
    if n == 0:
        raise DataError("observed set is empty")
    if resample_size is None:
        resample_size = n
    resample_size = check_positive_int(resample_size, "resample_size")
    picks = rng.integers(0, n, resample_size)
    return np.bincount(picks, minlength=n).astype(float)


def _resample_clusters(cluster_ids, rng):
    unique_ids, positions = np.unique(cluster_ids, return_inverse=True)
    picks = rng.integers(0, unique_ids.shape[0], unique_ids.shape[0])
    counts = np.bincount(picks, minlength=unique_ids.shape[0]).astype(float)
    return counts[positions]


def resample_layers(observed, n_days, rng):
    """Cluster resample of whole (asset, day) layers; returns weights.

    Layers that carry at least one observation are resampled with
    replacement (as many picks as there are such layers); each pick adds
    one multiplicity to every observation in that layer.
    """
    n = len(observed)
    if n == 0:
        raise DataError("observed set is empty")
    return _resample_clusters(layer_of(observed, n_days), rng)


def resample_days(observed, rng):
    """Cluster resample of whole days; returns per-observation weights."""
    if len(observed) == 0:
        raise DataError("observed set is empty")
    return _resample_clusters(observed.day, rng)


def bootstrap(graph, observed, train_config=None, boot_config=None, point=None):
    """Algorithm: retrain on B weighted resamples and report percentile CIs.

    Diverged replicates are recorded and skipped; more than
    MAX_DIVERGED_FRACTION of them is an error.  Deterministic given the
    bootstrap seed, independent of ``n_jobs``.
    """
    if train_config is None:
        train_config = TrainConfig()
    if boot_config is None:
        boot_config = BootstrapConfig()
    if boot_config.init_mode == INIT_WARM and point is None:
        logger.info("warm-start bootstrap: computing the point estimate first")
        point = train(graph, observed, train_config).params

    dims = (graph.d_x, graph.d_y, graph.d_e)
    total_dim = sum(dims)

    def run_replicate(index):
        rng = seeds.replicate_stream(boot_config.seed, index)
        if boot_config.scheme == SCHEME_OBSERVATIONS:
            weights = resample_observed(observed, boot_config.resample_size, rng)
        elif boot_config.scheme == SCHEME_LAYERS:
            weights = resample_layers(observed, graph.n_days, rng)
        else:
            weights = resample_days(observed, rng)
        if boot_config.init_mode == INIT_FRESH:
            vector = rng.uniform(-train_config.init_range, train_config.init_range, total_dim)
            init = ModelParams.from_vector(vector, dims)
        else:
            init = point
        try:
            result = train(graph, observed, train_config, weights=weights, init=init)
        except NumericError as exc:
            logger.warning("bootstrap replicate %d diverged: %s", index, exc)
            return None
        return result.params.as_vector()

    indices = range(boot_config.n_replicates)
    if boot_config.n_jobs != 1:
        from joblib import Parallel, delayed

        outcomes = Parallel(n_jobs=boot_config.n_jobs)(delayed(run_replicate)(b) for b in indices)
    else:
        outcomes = [run_replicate(b) for b in indices]

    kept = [(b, vec) for b, vec in zip(indices, outcomes) if vec is not None]
    n_skipped = boot_config.n_replicates - len(kept)
    if n_skipped > MAX_DIVERGED_FRACTION * boot_config.n_replicates:
        raise NumericError(
            f"{n_skipped} of {boot_config.n_replicates} bootstrap replicates diverged"
        )
    if not kept:
        raise NumericError("all bootstrap replicates diverged")

    replicates = np.asarray([b for b, _ in kept], dtype=np.int64)
    draws = np.vstack([vec for _, vec in kept])
    lower_q = boot_config.alpha / 2.0
    upper_q = 1.0 - boot_config.alpha / 2.0
    ci_lower = np.array([percentile(draws[:, j], lower_q) for j in range(draws.shape[1])])
    ci_upper = np.array([percentile(draws[:, j], upper_q) for j in range(draws.shape[1])])
    logger.info(
        "bootstrap finished: %d kept, %d skipped", len(kept), n_skipped
    )
    return BootstrapResult(
        draws=draws,
        replicates=replicates,
        mean=draws.mean(axis=0),
        se=draws.std(axis=0, ddof=1),
        ci_lower=ci_lower,
        ci_upper=ci_upper,
        alpha=boot_config.alpha,
        n_skipped=n_skipped,
        point=point,
    )
