"""Command-line driver for end-to-end trading-network experiments.

Subcommands: generate | solve | train | bootstrap | compare | reproduce.
Every experiment flows from one top-level seed; generation, training
initialization, and bootstrap replicates each draw from named substreams of
it, so any command rerun with the same configuration produces byte-identical
CSV outputs.  Outputs land in one directory per experiment, guarded by a
lock file against concurrent invocations.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

import argparse
import hashlib
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from filelock import FileLock, Timeout

from .baselines import DISPLAY_NAMES, SPEC_ORDER, TGNN_DISPLAY_NAME, run_baseline_suite
from .equilibrium import OUTCOME_NAMES, LatentState, SolveSettings, simulate_market, solve_fixed_point
from .errors import ConfigError, DataError, NumericError, TradenetError
from .estimator import (
    DEFAULT_EPOCHS,
    DEFAULT_INIT_RANGE,
    DEFAULT_LR,
    DEFAULT_SWEEPS,
    OPTIMIZER_ADAM,
    TrainConfig,
    forward,
    load_model,
    predict_latents,
    save_model,
    train,
)
from .graph import (
    EDGES_FILE,
    NODES_FILE,
    GenConfig,
    TopologyCorePeriphery,
    TopologyER,
    _check_known_keys,
    _require_mapping,
    _write_csv,
    gen_config_from_dict,
    gen_config_to_dict,
    load_graph,
    load_observed,
    save_graph,
    save_observed,
)
from .inference import (
    DEFAULT_ALPHA,
    DEFAULT_REPLICATES,
    INIT_FRESH,
    SCHEME_OBSERVATIONS,
    BootstrapConfig,
    bootstrap,
    metrics_report,
)

logger = logging.getLogger(__name__)

PRESET_DENSE = "dense"
PRESET_SPARSE = "sparse"
PRESET_CORE_PERIPHERY = "core-periphery"
PRESET_NAMES = (PRESET_DENSE, PRESET_SPARSE, PRESET_CORE_PERIPHERY)
PRESET_EPOCHS = 1000

CONFIG_FILE = "config.yaml"
OBSERVED_FILE = "observed.csv"
SUMMARY_FILE = "summary_stats.csv"
EQUILIBRIUM_FILE = "equilibrium.csv"
MODEL_FILE = "model.yaml"
LOSS_FILE = "loss.csv"
LATENTS_FILE = "latents.csv"
PRICE_FIT_FILE = "price_fit.csv"
BOOT_SUMMARY_FILE = "bootstrap_summary.csv"
BOOT_DRAWS_FILE = "bootstrap_draws.csv"
COMPARISON_FILE = "comparison.csv"
SCATTER_FILE = "comparison_scatter.csv"
TIMINGS_FILE = "timings.csv"
MANIFEST_FILE = "manifest.csv"
LOCK_FILE = ".tradenet.lock"

HISTOGRAM_BINS = 20
DEFAULT_OUT_DIR = "out"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


@dataclass
class ExperimentConfig:
    """One experiment: generation, training, and bootstrap settings.

    All module seeds derive from the single top-level ``seed``.
    """

    seed: int
    gen: GenConfig
    train: TrainConfig
    bootstrap: BootstrapConfig
    outputs: str = None
    emit_plots: bool = True


def preset_gen_config(name, seed=0):
    """Generation settings of one of the embedded presets."""
    if name == PRESET_DENSE:
        return GenConfig(
            n_dealers=10, n_assets=2, n_days=5, topology=TopologyER(p_edge=0.7), seed=seed
        )
    if name == PRESET_SPARSE:
        return GenConfig(
            n_dealers=10, n_assets=2, n_days=5, topology=TopologyER(p_edge=0.2), seed=seed
        )
    if name == PRESET_CORE_PERIPHERY:
        return GenConfig(
            n_dealers=20,
            n_assets=2,
            n_days=5,
            topology=TopologyCorePeriphery(n_core=4, p_cc=0.9, p_cp=0.7, p_pp=0.01),
            seed=seed,
        )
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")


def preset_experiment(name, seed=0, n_jobs=1):
    """Full experiment settings of an embedded preset.

    Presets train well past the loss plateau so point estimates carry no
    visible optimization bias, and bootstrap replicates resample individual
    observations with a fresh initialization per replicate.
    """
    return ExperimentConfig(
        seed=seed,
        gen=preset_gen_config(name, seed=seed),
        train=TrainConfig(epochs=PRESET_EPOCHS, seed=seed),
        bootstrap=BootstrapConfig(seed=seed, n_jobs=n_jobs),
    )


def experiment_to_dict(config):
    """Serialize an :class:`ExperimentConfig` to the config-file mapping."""
    gen = gen_config_to_dict(config.gen)
    gen.pop("seed", None)
    data = {
        "seed": config.seed,
        "emit_plots": config.emit_plots,
        "generation": gen,
        "training": {
            "sweeps": config.train.n_sweeps,
            "learning_rate": config.train.lr,
            "epochs": config.train.epochs,
            "l2": config.train.l2,
            "optimizer": config.train.optimizer,
            "init_range": config.train.init_range,
        },
        "bootstrap": {
            "replicates": config.bootstrap.n_replicates,
            "alpha": config.bootstrap.alpha,
            "scheme": config.bootstrap.scheme,
            "init": config.bootstrap.init_mode,
        },
    }
    if config.bootstrap.resample_size is not None:
        data["bootstrap"]["resample_size"] = config.bootstrap.resample_size
    if config.outputs is not None:
        data["outputs"] = config.outputs
    return data


def experiment_from_dict(data):
    """Parse the config-file mapping into an :class:`ExperimentConfig`."""
    data = _require_mapping(data, "experiment config")
    _check_known_keys(
        data,
        ("seed", "outputs", "emit_plots", "generation", "training", "bootstrap"),
        "experiment config",
    )
    if "seed" not in data:
        raise ConfigError("experiment config is missing required key 'seed'")
    seed = int(data["seed"])
    if "generation" not in data:
        raise ConfigError("experiment config is missing required section 'generation'")
    gen_data = dict(_require_mapping(data["generation"], "generation"))
    if "seed" in gen_data:
        raise ConfigError("generation.seed is not allowed; module seeds derive from the top-level seed")
    gen_data["seed"] = seed
    gen = gen_config_from_dict(gen_data)

    train_data = _require_mapping(data.get("training") or {}, "training")
    _check_known_keys(
        train_data,
        ("sweeps", "learning_rate", "epochs", "l2", "optimizer", "init_range"),
        "training",
    )
    train_config = TrainConfig(
        n_sweeps=int(train_data.get("sweeps", DEFAULT_SWEEPS)),
        lr=float(train_data.get("learning_rate", DEFAULT_LR)),
        epochs=int(train_data.get("epochs", DEFAULT_EPOCHS)),
        l2=float(train_data.get("l2", 0.0)),
        optimizer=str(train_data.get("optimizer", OPTIMIZER_ADAM)),
        init_range=float(train_data.get("init_range", DEFAULT_INIT_RANGE)),
        seed=seed,
    )

    boot_data = _require_mapping(data.get("bootstrap") or {}, "bootstrap")
    _check_known_keys(
        boot_data, ("replicates", "alpha", "scheme", "init", "resample_size"), "bootstrap"
    )
    boot_config = BootstrapConfig(
        n_replicates=int(boot_data.get("replicates", DEFAULT_REPLICATES)),
        alpha=float(boot_data.get("alpha", DEFAULT_ALPHA)),
        resample_size=boot_data.get("resample_size"),
        scheme=str(boot_data.get("scheme", SCHEME_OBSERVATIONS)),
        init_mode=str(boot_data.get("init", INIT_FRESH)),
        seed=seed,
    )

    outputs = data.get("outputs")
    return ExperimentConfig(
        seed=seed,
        gen=gen,
        train=train_config,
        bootstrap=boot_config,
        outputs=str(outputs) if outputs is not None else None,
        emit_plots=bool(data.get("emit_plots", True)),
    )


def _read_yaml(path):
    try:
        with open(path) as handle:
            return yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc


def _write_yaml(data, path):
    with open(path, "w") as handle:
        yaml.safe_dump(data, handle, sort_keys=True, default_flow_style=False)


def load_experiment_config(path, seed_override=None):
    """Read an experiment config file, optionally overriding the seed."""
    data = _read_yaml(path)
    if data is None:
        data = {}
    if seed_override is not None and isinstance(data, dict):
        data["seed"] = int(seed_override)
    return experiment_from_dict(data)


def _param_names(graph):
    names = []
    for base, dim in (("beta_x", graph.d_x), ("beta_y", graph.d_y), ("eta", graph.d_e)):
        if dim == 1:
            names.append(base)
        else:
            names.extend(f"{base}_{k + 1}" for k in range(dim))
    return names


def _summary_rows(market):
    graph = market.graph
    blocks = [
        ("Asset Feature X", graph.node_x.ravel()),
        ("Dealer Feature Y", graph.node_y.ravel()),
        ("Relationship Feature E", graph.edge_e.ravel()),
        ("Customer Values", graph.node_u),
        ("Observed Prices", market.observed.price),
        ("Dealer Values", market.solution.v),
        ("Bargaining Powers", market.state.pi),
        ("Potential Transaction Prices", market.solution.p),
        ("Costs", market.state.c),
    ]
    rows = []
    for name, values in blocks:
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            rows.append((name, 0, float("nan"), float("nan"), float("nan"), float("nan")))
        else:
            std = float(values.std(ddof=1)) if values.size > 1 else float("nan")
            rows.append(
                (
                    name,
                    values.size,
                    float(values.min()),
                    float(values.max()),
                    float(values.mean()),
                    std,
                )
            )
    return rows


def _load_dataset(out_dir):
    graph, extras = load_graph(out_dir)
    observed = load_observed(Path(out_dir) / OBSERVED_FILE, graph)
    return graph, extras, observed


def cmd_generate(config, out_dir):
    """Simulate one market and write graph, observed, and summary files."""
    out_dir = Path(out_dir)
    market = simulate_market(config.gen)
    logger.info(
        "generated %d nodes, %d edges, %d observed trades",
        market.graph.n_nodes,
        market.graph.n_edges,
        len(market.observed),
    )
    save_graph(
        market.graph,
        out_dir,
        node_extras={"c": market.state.c, "v": market.solution.v},
        edge_extras={"pi": market.state.pi, "p": market.solution.p},
    )
    save_observed(market.observed, out_dir / OBSERVED_FILE)
    _write_csv(
        out_dir / SUMMARY_FILE,
        ["variable", "N", "min", "max", "mean", "std"],
        _summary_rows(market),
    )
    _write_yaml(experiment_to_dict(config), out_dir / CONFIG_FILE)
    return [
        out_dir / NODES_FILE,
        out_dir / EDGES_FILE,
        out_dir / OBSERVED_FILE,
        out_dir / SUMMARY_FILE,
        out_dir / CONFIG_FILE,
    ]


def cmd_solve(out_dir):
    """Re-solve the equilibrium from stored latents and write it per node."""
    out_dir = Path(out_dir)
    graph, extras = load_graph(out_dir)
    if "c" not in extras or "pi" not in extras:
        raise DataError(
            f"{out_dir} lacks latent truth columns (c, pi); run generate first"
        )
    state = LatentState(c=extras["c"], pi=extras["pi"], u=graph.node_u)
    solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance())
    logger.info(
        "solved to residual %.3e in %d iterations",
        solution.final_residual,
        solution.iterations_used,
    )
    rows = []
    for node in range(graph.n_nodes):
        rows.append(
            (
                int(graph.node_dealer[node]),
                int(graph.node_asset[node]),
                int(graph.node_day[node]),
                float(solution.v[node]),
                float(solution.best_price[node]),
                OUTCOME_NAMES[int(solution.outcome[node])],
                int(solution.buyer[node]),
                float(solution.sale_price[node]),
            )
        )
    path = out_dir / EQUILIBRIUM_FILE
    _write_csv(
        path,
        ["dealer", "asset", "day", "v", "best_price", "outcome", "buyer", "sale_price"],
        rows,
    )
    return [path]


def cmd_train(config, out_dir):
    """Fit the estimator and write the model, loss curve, and fit files."""
    out_dir = Path(out_dir)
    graph, extras, observed = _load_dataset(out_dir)
    result = train(graph, observed, config.train)
    pred = result.pred_best[observed.node]
    report = metrics_report(pred, observed.price, n_params=graph.d_x + graph.d_y + graph.d_e)
    logger.info(
        "trained %d epochs: loss=%.6f r2=%.4f", result.epochs_run, result.final_mse, report.r2
    )
    save_model(
        out_dir / MODEL_FILE,
        result.params,
        config.train,
        metrics={"r2": report.r2, "mae": report.mae, "mse": report.mse},
        epochs_run=result.epochs_run,
    )
    _write_csv(
        out_dir / LOSS_FILE,
        ["epoch", "loss"],
        [(epoch + 1, float(value)) for epoch, value in enumerate(result.loss_trajectory)],
    )
    paths = [out_dir / MODEL_FILE, out_dir / LOSS_FILE]
    if config.emit_plots:
        latents = predict_latents(graph, result.params)
        rows = []
        if "c" in extras:
            rows.extend(
                ("cost", node, float(extras["c"][node]), float(latents.c[node]))
                for node in range(graph.n_nodes)
            )
        if "v" in extras:
            rows.extend(
                ("value", node, float(extras["v"][node]), float(latents.v[node]))
                for node in range(graph.n_nodes)
            )
        if "pi" in extras:
            rows.extend(
                ("bargaining", edge, float(extras["pi"][edge]), float(latents.pi[edge]))
                for edge in range(graph.n_edges)
            )
        if "p" in extras:
            rows.extend(
                ("price", edge, float(extras["p"][edge]), float(latents.p[edge]))
                for edge in range(graph.n_edges)
            )
        _write_csv(out_dir / LATENTS_FILE, ["variable", "index", "actual", "predicted"], rows)
        fit_rows = [
            (
                int(observed.seller[k]),
                int(observed.buyer[k]),
                int(observed.asset[k]),
                int(observed.day[k]),
                float(observed.price[k]),
                float(pred[k]),
            )
            for k in range(len(observed))
        ]
        _write_csv(
            out_dir / PRICE_FIT_FILE,
            ["seller", "buyer", "asset", "day", "observed", "predicted"],
            fit_rows,
        )
        paths.extend([out_dir / LATENTS_FILE, out_dir / PRICE_FIT_FILE])
    return paths


def _point_estimate(config, out_dir, graph, observed):
    """Load the fitted parameters if present, otherwise train now."""
    model_path = Path(out_dir) / MODEL_FILE
    if model_path.exists():
        params, train_config, _, _ = load_model(model_path)
        params.validate_for(graph)
        return params, train_config
    logger.info("no fitted model in %s; training now", out_dir)
    result = train(graph, observed, config.train)
    return result.params, config.train


def cmd_bootstrap(config, out_dir):
    """Bootstrap the parameter estimates and write summary and draw files."""
    out_dir = Path(out_dir)
    graph, extras, observed = _load_dataset(out_dir)
    point, _ = _point_estimate(config, out_dir, graph, observed)
    result = bootstrap(graph, observed, config.train, config.bootstrap, point=point)
    logger.info(
        "bootstrap kept %d of %d replicates",
        result.draws.shape[0],
        config.bootstrap.n_replicates,
    )
    names = _param_names(graph)
    true_values = np.concatenate([config.gen.beta_x, config.gen.beta_y, config.gen.eta])
    point_vector = point.as_vector()
    summary_rows = [
        (
            names[j],
            float(true_values[j]),
            float(point_vector[j]),
            float(result.ci_lower[j]),
            float(result.ci_upper[j]),
            float(result.mean[j]),
            float(result.se[j]),
        )
        for j in range(len(names))
    ]
    _write_csv(
        out_dir / BOOT_SUMMARY_FILE,
        ["param", "true", "estimate", "ci_lower", "ci_upper", "boot_mean", "se"],
        summary_rows,
    )
    draw_rows = [
        (int(result.replicates[i]), *(float(v) for v in result.draws[i]))
        for i in range(result.draws.shape[0])
    ]
    _write_csv(out_dir / BOOT_DRAWS_FILE, ["replicate", *names], draw_rows)
    paths = [out_dir / BOOT_SUMMARY_FILE, out_dir / BOOT_DRAWS_FILE]
    if config.emit_plots:
        for j, name in enumerate(names):
            counts, edges = np.histogram(result.draws[:, j], bins=HISTOGRAM_BINS)
            hist_rows = [
                (float(edges[b]), float(edges[b + 1]), int(counts[b]))
                for b in range(len(counts))
            ]
            path = out_dir / f"hist_{name}.csv"
            _write_csv(path, ["bin_left", "bin_right", "count"], hist_rows)
            paths.append(path)
    return paths


def cmd_compare(config, out_dir):
    """Fit all baselines plus the estimator and write the comparison table."""
    out_dir = Path(out_dir)
    graph, extras, observed = _load_dataset(out_dir)
    params, train_config = _point_estimate(config, out_dir, graph, observed)
    trace = forward(graph, params, train_config.n_sweeps)
    tgnn_pred = trace.pred_best[observed.node]
    tgnn = metrics_report(
        tgnn_pred, observed.price, n_params=graph.d_x + graph.d_y + graph.d_e
    )
    suite = run_baseline_suite(graph, observed)
    rows = []
    for kind in SPEC_ORDER:
        metrics = suite[kind].metrics
        rows.append(
            (
                DISPLAY_NAMES[kind],
                metrics.r2,
                metrics.mae,
                metrics.mse,
                metrics.n_params,
                metrics.aic,
                metrics.bic,
            )
        )
    rows.append((TGNN_DISPLAY_NAME, tgnn.r2, tgnn.mae, tgnn.mse, tgnn.n_params, tgnn.aic, tgnn.bic))
    _write_csv(
        out_dir / COMPARISON_FILE,
        ["model", "r2", "mae", "mse", "parameters", "aic", "bic"],
        rows,
    )
    paths = [out_dir / COMPARISON_FILE]
    best_kind = max(SPEC_ORDER, key=lambda kind: suite[kind].metrics.r2)
    logger.info(
        "best baseline %s r2=%.4f vs %s r2=%.4f",
        DISPLAY_NAMES[best_kind],
        suite[best_kind].metrics.r2,
        TGNN_DISPLAY_NAME,
        tgnn.r2,
    )
    if config.emit_plots:
        best_fitted = suite[best_kind].fitted
        scatter_rows = [
            (
                int(observed.seller[k]),
                int(observed.buyer[k]),
                int(observed.asset[k]),
                int(observed.day[k]),
                float(observed.price[k]),
                float(best_fitted[k]),
                float(tgnn_pred[k]),
                DISPLAY_NAMES[best_kind],
            )
            for k in range(len(observed))
        ]
        _write_csv(
            out_dir / SCATTER_FILE,
            ["seller", "buyer", "asset", "day", "observed", "best_ols", "tgnn", "best_ols_model"],
            scatter_rows,
        )
        paths.append(out_dir / SCATTER_FILE)
    return paths


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir):
    """Checksum every output file; wall-clock timings are exempt."""
    out_dir = Path(out_dir)
    rows = []
    for path in sorted(out_dir.rglob("*")):
        if not path.is_file():
            continue
        relative = path.relative_to(out_dir).as_posix()
        if relative == MANIFEST_FILE or relative.startswith("."):
            continue
        checksum = "-" if relative == TIMINGS_FILE else _sha256(path)
        rows.append((relative, checksum))
    manifest_path = out_dir / MANIFEST_FILE
    _write_csv(manifest_path, ["path", "sha256"], rows)
    return manifest_path


def cmd_reproduce(config, out_dir):
    """Run generate, train, bootstrap, and compare, then write the manifest."""
    out_dir = Path(out_dir)
    stages = (
        ("generate", cmd_generate),
        ("train", cmd_train),
        ("bootstrap", cmd_bootstrap),
        ("compare", cmd_compare),
    )
    timings = []
    written = []
    for name, fn in stages:
        logger.info("stage %s starting", name)
        start = time.perf_counter()
        try:
            written.extend(fn(config, out_dir))
        except TradenetError as exc:
            raise type(exc)(f"stage {name} failed: {exc}") from exc
        timings.append((name, time.perf_counter() - start))
        logger.info("stage %s finished in %.1fs", name, timings[-1][1])
    _write_csv(out_dir / TIMINGS_FILE, ["stage", "seconds"], timings)
    written.append(out_dir / TIMINGS_FILE)
    written.append(write_manifest(out_dir))
    return written


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tradenet",
        description="Simulate, estimate, and benchmark dealer-network pricing models.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_common(sub):
        sub.add_argument("--config", help="experiment config file (YAML)")
        sub.add_argument("--preset", choices=PRESET_NAMES, help="embedded experiment preset")
        sub.add_argument("--out", help=f"output directory (default: {DEFAULT_OUT_DIR})")
        sub.add_argument("--seed", type=int, help="override the top-level seed")
        sub.add_argument("--jobs", type=int, help="parallel worker count for the bootstrap")

    for name, description in (
        ("generate", "simulate a market and write the data files"),
        ("solve", "re-solve the equilibrium from stored latents"),
        ("train", "fit the estimator on generated data"),
        ("bootstrap", "bootstrap confidence intervals for the fitted parameters"),
        ("compare", "fit all baselines and write the comparison table"),
    ):
        add_common(subparsers.add_parser(name, help=description))
    reproduce = subparsers.add_parser(
        "reproduce", help="run generate, train, bootstrap, and compare end to end"
    )
    reproduce.add_argument("preset_name", nargs="?", choices=PRESET_NAMES)
    add_common(reproduce)
    return parser


def _resolve_config(args, out_dir):
    if args.config and args.preset:
        raise ConfigError("pass either --config or --preset, not both")
    if args.config:
        config = load_experiment_config(args.config, seed_override=args.seed)
    elif args.preset:
        config = preset_experiment(args.preset, seed=args.seed if args.seed is not None else 0)
    else:
        saved = Path(out_dir) / CONFIG_FILE
        if not saved.exists():
            raise ConfigError(
                f"no configuration: pass --config or --preset, or run generate into {out_dir} first"
            )
        config = load_experiment_config(saved, seed_override=args.seed)
    if args.jobs is not None:
        if args.jobs == 0:
            raise ConfigError("--jobs must be a nonzero integer (-1 means all cores)")
        config.bootstrap.n_jobs = args.jobs
    return config


def _resolve_out_dir(args, config=None):
    if args.out:
        return Path(args.out)
    if config is not None and config.outputs:
        return Path(config.outputs)
    return Path(DEFAULT_OUT_DIR)


def run_command(args):
    if args.command == "reproduce":
        preset = args.preset_name or args.preset
        if preset is None and not args.config:
            raise ConfigError(f"reproduce requires a preset name (one of {PRESET_NAMES}) or --config")
        if args.preset_name and args.preset and args.preset_name != args.preset:
            raise ConfigError("conflicting preset names given")
        if args.config:
            config = load_experiment_config(args.config, seed_override=args.seed)
        else:
            config = preset_experiment(preset, seed=args.seed if args.seed is not None else 0)
        if args.jobs is not None:
            if args.jobs == 0:
                raise ConfigError("--jobs must be a nonzero integer (-1 means all cores)")
            config.bootstrap.n_jobs = args.jobs
        out_dir = _resolve_out_dir(args, config)
        with _locked(out_dir):
            cmd_reproduce(config, out_dir)
        return

    if args.command == "solve":
        out_dir = _resolve_out_dir(args)
        with _locked(out_dir):
            cmd_solve(out_dir)
        return

    if args.config or args.preset:
        config = _resolve_config(args, args.out or DEFAULT_OUT_DIR)
        out_dir = _resolve_out_dir(args, config)
    else:
        out_dir = _resolve_out_dir(args)
        config = _resolve_config(args, out_dir)

    commands = {
        "generate": cmd_generate,
        "train": cmd_train,
        "bootstrap": cmd_bootstrap,
        "compare": cmd_compare,
    }
    with _locked(out_dir):
        commands[args.command](config, out_dir)


class _locked:
    """Hold the per-directory lock for the duration of one command."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)

    def __enter__(self):
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create output directory {self.out_dir}: {exc}") from exc
        self.lock = FileLock(self.out_dir / LOCK_FILE, timeout=0)
        try:
            self.lock.acquire()
        except Timeout:
            raise DataError(
                f"output directory {self.out_dir} is locked by another process"
            ) from None
        return self

    def __exit__(self, exc_type, exc, tb):
        self.lock.release()
        return False


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        run_command(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except NumericError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        logger.error("cannot write outputs: %s", exc)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
