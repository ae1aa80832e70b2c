"""Tests for centrality measures, regression designs, and the OLS suite."""

import math

import numpy as np
import pytest

from tradenet.baselines import (
    DISPLAY_NAMES,
    SPEC_ALL_CENTRALITY,
    SPEC_BASIC,
    SPEC_BETWEENNESS,
    SPEC_CENTRALITY_INTERACTIONS,
    SPEC_DEGREE,
    SPEC_EIGENVECTOR,
    SPEC_EIGENVECTOR_INTERACTIONS,
    SPEC_ORDER,
    TGNN_DISPLAY_NAME,
    CentralityTable,
    RegressionSpec,
    betweenness_centrality,
    build_design,
    compute_centralities,
    degree_centrality,
    directed_degree_centrality,
    eigenvector_centrality,
    ols_fit,
    run_baseline_suite,
)
from tradenet.equilibrium import simulate_market
from tradenet.errors import ConfigError, DataError, NumericError, RankDeficiencyError
from tradenet.graph import GenConfig, TopologyER

from helpers import build_graph

EXPECTED_COLUMNS = {
    SPEC_BASIC: 5,
    SPEC_DEGREE: 9,
    SPEC_EIGENVECTOR: 7,
    SPEC_BETWEENNESS: 7,
    SPEC_ALL_CENTRALITY: 13,
    SPEC_EIGENVECTOR_INTERACTIONS: 15,
    SPEC_CENTRALITY_INTERACTIONS: 45,
}


def star_adjacency(n_leaves=3):
    """Dealer 0 sells to every leaf."""
    n = n_leaves + 1
    adjacency = np.zeros((n, n), dtype=bool)
    adjacency[0, 1:] = True
    return adjacency


def path_adjacency():
    adjacency = np.zeros((3, 3), dtype=bool)
    adjacency[0, 1] = True
    adjacency[1, 2] = True
    return adjacency


def complete_adjacency(n=4):
    adjacency = np.ones((n, n), dtype=bool)
    np.fill_diagonal(adjacency, False)
    return adjacency


def dense_market(seed=0):
    config = GenConfig(
        n_dealers=10, n_assets=2, n_days=5, topology=TopologyER(p_edge=0.7), seed=seed
    )
    return simulate_market(config)


class TestDegreeCentrality:
    def test_star(self):
        values = degree_centrality(star_adjacency(3))
        np.testing.assert_allclose(values, [1.0, 1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_empty_layer(self):
        values = degree_centrality(np.zeros((4, 4), dtype=bool))
        np.testing.assert_array_equal(values, np.zeros(4))

    def test_complete_layer(self):
        values = degree_centrality(complete_adjacency(5))
        np.testing.assert_array_equal(values, np.ones(5))

    def test_single_dealer_raises(self):
        with pytest.raises(ConfigError, match="at least 2"):
            degree_centrality(np.zeros((1, 1), dtype=bool))

    def test_non_square_raises(self):
        with pytest.raises(ConfigError, match="square"):
            degree_centrality(np.zeros((2, 3), dtype=bool))

    def test_adding_an_edge_never_decreases(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(3, 8))
            adjacency = rng.random((n, n)) < 0.4
            np.fill_diagonal(adjacency, False)
            before = degree_centrality(adjacency)
            off = np.argwhere(~adjacency & ~np.eye(n, dtype=bool))
            if off.shape[0] == 0:
                continue
            i, j = off[rng.integers(off.shape[0])]
            richer = adjacency.copy()
            richer[i, j] = True
            after = degree_centrality(richer)
            assert np.all(after >= before - 1e-15)

    def test_directed_split(self):
        deg_in, deg_out = directed_degree_centrality(star_adjacency(2))
        np.testing.assert_allclose(deg_out, [1.0, 0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(deg_in, [0.0, 0.5, 0.5], atol=1e-15)


class TestEigenvectorCentrality:
    def test_complete_graph_is_uniform(self):
        values = eigenvector_centrality(complete_adjacency(5))
        np.testing.assert_allclose(values, np.ones(5), atol=1e-9)

    def test_path_center_is_largest(self):
        values = eigenvector_centrality(path_adjacency())
        assert values[1] == pytest.approx(1.0, abs=1e-12)
        assert values[0] == pytest.approx(1 / math.sqrt(2), abs=1e-9)
        assert values[2] == pytest.approx(1 / math.sqrt(2), abs=1e-9)

    def test_star_leaf_ratio(self):
        values = eigenvector_centrality(star_adjacency(3))
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(values[1:], np.full(3, 1 / math.sqrt(3)), atol=1e-9)

    def test_isolated_dealers_score_zero(self):
        adjacency = np.zeros((4, 4), dtype=bool)
        adjacency[0, 1] = True
        values = eigenvector_centrality(adjacency)
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        assert values[1] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(values[2:], np.zeros(2))

    def test_disconnected_components_each_max_normalized(self):
        adjacency = np.zeros((5, 5), dtype=bool)
        adjacency[0, 1] = True
        adjacency[2, 3] = True
        adjacency[3, 4] = True
        values = eigenvector_centrality(adjacency)
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        assert values[3] == pytest.approx(1.0, abs=1e-12)
        assert values[2] < 1.0 and values[4] < 1.0

    def test_non_convergence_raises(self):
        with pytest.raises(NumericError, match="converge"):
            eigenvector_centrality(path_adjacency(), max_iter=1)


class TestBetweennessCentrality:
    def test_path(self):
        values = betweenness_centrality(path_adjacency())
        np.testing.assert_allclose(values, [0.0, 1.0, 0.0], atol=1e-15)

    def test_complete_graph(self):
        values = betweenness_centrality(complete_adjacency(5))
        np.testing.assert_array_equal(values, np.zeros(5))

    def test_star_center(self):
        values = betweenness_centrality(star_adjacency(4))
        assert values[0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(values[1:], np.zeros(4))

    def test_small_layers_score_zero(self):
        np.testing.assert_array_equal(
            betweenness_centrality(np.zeros((2, 2), dtype=bool)), np.zeros(2)
        )

    def test_values_within_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            n = int(rng.integers(3, 9))
            adjacency = rng.random((n, n)) < 0.5
            np.fill_diagonal(adjacency, False)
            values = betweenness_centrality(adjacency)
            assert np.all(values >= 0.0) and np.all(values <= 1.0 + 1e-12)


class TestComputeCentralities:
    def test_full_graph_has_unit_degree(self):
        config = GenConfig(
            n_dealers=5, n_assets=2, n_days=2, topology=TopologyER(p_edge=1.0), seed=0
        )
        market = simulate_market(config)
        table = compute_centralities(market.graph)
        assert table.degree.shape == (5, 2, 2)
        np.testing.assert_array_equal(table.degree, np.ones((5, 2, 2)))
        np.testing.assert_array_equal(table.betweenness, np.zeros((5, 2, 2)))
        np.testing.assert_allclose(table.eigenvector, np.ones((5, 2, 2)), atol=1e-9)

    def test_empty_graph_scores_zero(self):
        config = GenConfig(
            n_dealers=4, n_assets=1, n_days=2, topology=TopologyER(p_edge=0.0), seed=0
        )
        market = simulate_market(config)
        table = compute_centralities(market.graph)
        for name in ("degree", "degree_in", "degree_out", "eigenvector", "betweenness"):
            np.testing.assert_array_equal(table.measure(name), np.zeros((4, 1, 2)))

    def test_unknown_measure_raises(self):
        table = CentralityTable(*[np.zeros((1, 1, 1))] * 5)
        with pytest.raises(ConfigError, match="unknown centrality measure"):
            table.measure("pagerank")


class TestRegressionSpec:
    def test_declared_column_counts(self):
        for kind, expected in EXPECTED_COLUMNS.items():
            assert RegressionSpec(kind).column_count(1, 1, 1) == expected

    def test_unknown_kind_raises(self):
        with pytest.raises(ConfigError, match="unknown regression spec"):
            RegressionSpec("Ridge")

    def test_display_names_cover_all_specs(self):
        assert set(DISPLAY_NAMES) == set(SPEC_ORDER)
        assert DISPLAY_NAMES[SPEC_BASIC] == "OLS Basic"
        assert TGNN_DISPLAY_NAME == "TGNN"


class TestBuildDesign:
    def test_built_matrices_match_declared_counts(self):
        market = dense_market()
        centralities = compute_centralities(market.graph)
        for kind, expected in EXPECTED_COLUMNS.items():
            matrix, response, names = build_design(
                market.graph, market.observed, centralities, kind
            )
            assert matrix.shape == (len(market.observed), expected)
            assert len(names) == expected
            assert len(set(names)) == expected
            np.testing.assert_array_equal(response, market.observed.price)
            np.testing.assert_array_equal(matrix[:, 0], np.ones(len(market.observed)))

    def test_basic_columns_are_trade_features(self):
        market = dense_market()
        centralities = compute_centralities(market.graph)
        matrix, _, names = build_design(market.graph, market.observed, centralities, SPEC_BASIC)
        assert names == ("intercept", "X_1", "Y_seller_1", "Y_buyer_1", "E_1")
        observed = market.observed
        features = market.graph.features
        np.testing.assert_array_equal(matrix[:, 1], features.x[observed.asset, observed.day, 0])
        np.testing.assert_array_equal(matrix[:, 2], features.y[observed.seller, observed.day, 0])
        np.testing.assert_array_equal(matrix[:, 3], features.y[observed.buyer, observed.day, 0])
        np.testing.assert_array_equal(
            matrix[:, 4], features.e[observed.day, observed.seller, observed.buyer, 0]
        )

    def test_interaction_columns_are_products(self):
        market = dense_market()
        centralities = compute_centralities(market.graph)
        matrix, _, names = build_design(
            market.graph, market.observed, centralities, SPEC_EIGENVECTOR_INTERACTIONS
        )
        index = dict(zip(names, range(len(names))))
        product = matrix[:, index["eigenvector_seller"]] * matrix[:, index["X_1"]]
        np.testing.assert_allclose(
            matrix[:, index["eigenvector_seller*X_1"]], product, atol=1e-15
        )

    def test_zero_rows_raise(self):
        market = dense_market()
        centralities = compute_centralities(market.graph)
        empty = type(market.observed)(
            node=np.empty(0, dtype=np.int64),
            seller=np.empty(0, dtype=np.int64),
            buyer=np.empty(0, dtype=np.int64),
            asset=np.empty(0, dtype=np.int64),
            day=np.empty(0, dtype=np.int64),
            price=np.empty(0),
        )
        with pytest.raises(DataError, match="zero observed"):
            build_design(market.graph, empty, centralities, SPEC_BASIC)


class TestOlsFit:
    def test_exact_line(self):
        x = np.linspace(-2.0, 3.0, 12).reshape(-1, 1)
        result = ols_fit(x, 2.0 * x[:, 0], column_names=("x",))
        np.testing.assert_allclose(result.coefficients, [2.0], atol=1e-12)
        assert result.metrics.r2 == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(result.residuals, np.zeros(12), atol=1e-12)

    def test_orthogonal_response_zeroes_slopes(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0.0, 1.0, 30)
        design = np.column_stack([np.ones(30), x])
        noise = rng.normal(0.0, 1.0, 30)
        projection, *_ = np.linalg.lstsq(design, noise, rcond=None)
        orthogonal = noise - design @ projection
        response = 3.0 + orthogonal
        result = ols_fit(design, response, column_names=("intercept", "x"))
        assert abs(result.coefficients[1]) <= 1e-10
        assert result.coefficients[0] == pytest.approx(3.0, abs=1e-10)

    def test_residuals_orthogonal_to_columns(self):
        rng = np.random.default_rng(3)
        matrix = np.column_stack([np.ones(40), rng.normal(0.0, 1.0, (40, 3))])
        response = rng.normal(0.0, 1.0, 40)
        result = ols_fit(matrix, response)
        np.testing.assert_allclose(matrix.T @ result.residuals, np.zeros(4), atol=1e-8)
        np.testing.assert_allclose(result.fitted + result.residuals, response, atol=1e-12)

    def test_perturbing_coefficients_never_lowers_ssr(self):
        rng = np.random.default_rng(4)
        matrix = np.column_stack([np.ones(25), rng.normal(0.0, 1.0, (25, 2))])
        response = rng.normal(0.0, 1.0, 25)
        result = ols_fit(matrix, response)
        best = float(result.residuals @ result.residuals)
        for k in range(3):
            for delta in (1e-3, -1e-3):
                coef = result.coefficients.copy()
                coef[k] += delta
                residuals = response - matrix @ coef
                assert float(residuals @ residuals) >= best - 1e-12

    def test_rank_deficiency_strict_mode_names_columns(self):
        x = np.linspace(0.0, 1.0, 10)
        matrix = np.column_stack([np.ones(10), x, x])
        with pytest.raises(RankDeficiencyError, match="x_copy"):
            ols_fit(matrix, x, column_names=("intercept", "x", "x_copy"))

    def test_rank_deficiency_drop_mode_zeroes_dropped(self):
        x = np.linspace(0.0, 1.0, 10)
        response = 1.0 + 2.0 * x
        matrix = np.column_stack([np.ones(10), x, x])
        result = ols_fit(
            matrix, response, column_names=("intercept", "x", "x_copy"), drop_collinear=True
        )
        assert result.dropped == ("x_copy",)
        assert result.coefficients[2] == 0.0
        np.testing.assert_allclose(result.coefficients[:2], [1.0, 2.0], atol=1e-10)
        assert result.metrics.n_params == 3
        np.testing.assert_allclose(result.fitted, response, atol=1e-10)

    def test_more_columns_than_rows_fits_in_drop_mode(self):
        rng = np.random.default_rng(5)
        matrix = np.column_stack([np.ones(3), rng.normal(0.0, 1.0, (3, 4))])
        response = rng.normal(0.0, 1.0, 3)
        result = ols_fit(matrix, response, drop_collinear=True)
        assert len(result.dropped) >= 2
        assert result.metrics.n_params == 5

    def test_shape_validation(self):
        with pytest.raises(ConfigError, match="2-d"):
            ols_fit(np.ones(3), np.ones(3))
        with pytest.raises(ConfigError, match="rows"):
            ols_fit(np.ones((3, 1)), np.ones(4))
        with pytest.raises(DataError, match="zero rows"):
            ols_fit(np.empty((0, 1)), np.empty(0))


class TestBaselineSuite:
    def test_runs_all_specs_in_order(self):
        market = dense_market()
        results = run_baseline_suite(market.graph, market.observed)
        assert tuple(results) == SPEC_ORDER
        for kind, result in results.items():
            assert result.metrics.n_params == EXPECTED_COLUMNS[kind]
            assert result.metrics.n_obs == len(market.observed)
            np.testing.assert_allclose(
                result.fitted + result.residuals, market.observed.price, atol=1e-10
            )

    def test_r2_monotone_over_nested_designs(self):
        market = dense_market()
        results = run_baseline_suite(market.graph, market.observed)
        r2 = {kind: results[kind].metrics.r2 for kind in SPEC_ORDER}
        slack = 1e-10
        for richer in SPEC_ORDER[1:]:
            assert r2[richer] >= r2[SPEC_BASIC] - slack
        for one_measure in (SPEC_DEGREE, SPEC_EIGENVECTOR, SPEC_BETWEENNESS):
            assert r2[SPEC_ALL_CENTRALITY] >= r2[one_measure] - slack
        assert r2[SPEC_CENTRALITY_INTERACTIONS] >= r2[SPEC_ALL_CENTRALITY] - slack
        assert r2[SPEC_CENTRALITY_INTERACTIONS] >= r2[SPEC_EIGENVECTOR_INTERACTIONS] - slack
        assert r2[SPEC_EIGENVECTOR_INTERACTIONS] >= r2[SPEC_EIGENVECTOR] - slack

    def test_empty_observed_raises(self):
        market = dense_market()
        empty = type(market.observed)(
            node=np.empty(0, dtype=np.int64),
            seller=np.empty(0, dtype=np.int64),
            buyer=np.empty(0, dtype=np.int64),
            asset=np.empty(0, dtype=np.int64),
            day=np.empty(0, dtype=np.int64),
            price=np.empty(0),
        )
        with pytest.raises(DataError, match="empty"):
            run_baseline_suite(market.graph, empty)


class TestCentralityTableOnTinyGraph:
    def test_isolated_dealer_in_active_layer(self):
        edges = [(0, 1, 0, 0), (1, 0, 0, 0), (1, 2, 0, 0)]
        graph = build_graph(4, edges, u=np.full((4, 1, 1), 10.0))
        table = compute_centralities(graph)
        assert table.degree[3, 0, 0] == 0.0
        assert table.eigenvector[3, 0, 0] == 0.0
        assert table.betweenness[1, 0, 0] > 0.0
        assert table.degree[1, 0, 0] == pytest.approx(2 / 3, abs=1e-15)