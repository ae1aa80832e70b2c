"""Structural estimation of feature effects on prices in dealer networks.

The package simulates layered over-the-counter trading networks, solves the
Nash-bargaining value fixed point on each layer, realizes observed
interdealer trades, and estimates the structural feature coefficients by
differentiating through the unrolled fixed-point sweeps.  Bootstrap
resampling provides confidence intervals, and centrality-based least-squares
regressions provide reduced-form baselines.
"""

from .baselines import (
    CentralityTable,
    RegressionResult,
    RegressionSpec,
    betweenness_centrality,
    build_design,
    compute_centralities,
    degree_centrality,
    eigenvector_centrality,
    ols_fit,
    run_baseline_suite,
)
from .equilibrium import (
    EquilibriumSolution,
    LatentState,
    SimulatedMarket,
    SolveSettings,
    apply_T,
    edge_prices,
    gen_bargaining,
    gen_costs,
    realize_trades,
    simulate_market,
    solve_fixed_point,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    NumericError,
    ParseError,
    RankDeficiencyError,
    SchemaError,
    TradenetError,
)
from .estimator import (
    FitResult,
    ForwardTrace,
    ModelParams,
    TradingNetworkEstimator,
    TrainConfig,
    backward,
    estimate_customer_values,
    forward,
    load_model,
    loss,
    predict_latents,
    save_model,
    train,
)
from .graph import (
    FeatureTable,
    GenConfig,
    ObservedTrades,
    TopologyCorePeriphery,
    TopologyER,
    TradingGraph,
    generate_core_periphery_graph,
    generate_er_graph,
    generate_features,
    generate_graph,
    load_graph,
    load_observed,
    save_graph,
    save_observed,
)
from .inference import (
    BootstrapConfig,
    BootstrapResult,
    MetricsReport,
    aic,
    bic,
    bootstrap,
    gaussian_ln_likelihood,
    mae,
    metrics_report,
    mse,
    percentile,
    r2,
    resample_observed,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "BootstrapResult",
    "CentralityTable",
    "ConfigError",
    "DataError",
    "DimensionError",
    "EquilibriumSolution",
    "FeatureTable",
    "FitResult",
    "ForwardTrace",
    "GenConfig",
    "LatentState",
    "MetricsReport",
    "ModelParams",
    "NumericError",
    "ObservedTrades",
    "ParseError",
    "RankDeficiencyError",
    "RegressionResult",
    "RegressionSpec",
    "SchemaError",
    "SimulatedMarket",
    "SolveSettings",
    "TopologyCorePeriphery",
    "TopologyER",
    "TradenetError",
    "TradingGraph",
    "TradingNetworkEstimator",
    "TrainConfig",
    "aic",
    "apply_T",
    "backward",
    "betweenness_centrality",
    "bic",
    "bootstrap",
    "build_design",
    "compute_centralities",
    "degree_centrality",
    "edge_prices",
    "eigenvector_centrality",
    "estimate_customer_values",
    "forward",
    "gaussian_ln_likelihood",
    "gen_bargaining",
    "gen_costs",
    "generate_core_periphery_graph",
    "generate_er_graph",
    "generate_features",
    "generate_graph",
    "load_graph",
    "load_model",
    "load_observed",
    "loss",
    "mae",
    "metrics_report",
    "mse",
    "ols_fit",
    "percentile",
    "predict_latents",
    "r2",
    "realize_trades",
    "resample_observed",
    "run_baseline_suite",
    "save_graph",
    "save_model",
    "save_observed",
    "simulate_market",
    "solve_fixed_point",
    "train",
]
