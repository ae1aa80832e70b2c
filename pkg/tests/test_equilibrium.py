"""Tests for latent generation, the value operator, and trade realization."""

import math

import numpy as np
import pytest

from tradenet.equilibrium import (
    GENERATION_SWEEPS,
    OUTCOME_CUSTOMER,
    OUTCOME_INTERDEALER,
    OUTCOME_ISOLATED,
    LatentState,
    SolveSettings,
    apply_T,
    gen_bargaining,
    gen_costs,
    realize_trades,
    sigmoid,
    simulate_market,
    solve_fixed_point,
)
from tradenet.errors import ConfigError, NumericError
from tradenet.graph import GenConfig, TopologyER

from helpers import brute_force_values, build_graph, make_state, random_instance

ORACLE_INSTANCES = 100
UNIQUENESS_TRIALS = 20
SIGMOID_ONE = 1.0 / (1.0 + math.exp(-1.0))


def two_dealer_graph():
    """Two dealers trading both ways in a single layer, u = (10, 20)."""
    edges = [(0, 1, 0, 0), (1, 0, 0, 0)]
    u = np.array([[[10.0]], [[20.0]]])
    return build_graph(2, edges, u=u)


def two_dealer_state(graph):
    return make_state(graph, c=[1.0, 1.0], pi=[0.5, 0.5])


class TestLatentState:
    def test_rejects_bad_shapes(self):
        graph = two_dealer_graph()
        with pytest.raises(ConfigError):
            make_state(graph, c=[1.0], pi=[0.5, 0.5]).validate(graph)
        with pytest.raises(ConfigError):
            make_state(graph, c=[1.0, 1.0], pi=[0.5]).validate(graph)

    def test_rejects_nonpositive_costs(self):
        graph = two_dealer_graph()
        with pytest.raises(ConfigError, match="positive"):
            make_state(graph, c=[0.0, 1.0], pi=[0.5, 0.5]).validate(graph)

    def test_rejects_boundary_bargaining(self):
        graph = two_dealer_graph()
        with pytest.raises(ConfigError, match="inside"):
            make_state(graph, c=[1.0, 1.0], pi=[0.0, 0.5]).validate(graph)
        with pytest.raises(ConfigError, match="inside"):
            make_state(graph, c=[1.0, 1.0], pi=[1.0, 0.5]).validate(graph)

    def test_contraction_epsilon(self):
        graph = two_dealer_graph()
        state = make_state(graph, c=[1.0, 1.0], pi=[0.3, 0.9])
        assert state.contraction_epsilon == pytest.approx(0.1, abs=1e-15)


class TestGenCosts:
    def test_zero_features_zero_noise_give_unit_costs(self):
        graph = build_graph(3, [(0, 1, 0, 0)], u=np.full((3, 1, 1), 10.0))
        costs = gen_costs(graph, np.zeros(1), np.zeros(1), 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(costs, np.ones(3))

    def test_unit_feature_gives_e(self):
        x = np.ones((1, 1, 1))
        graph = build_graph(2, [(0, 1, 0, 0)], x=x, u=np.full((2, 1, 1), 10.0))
        costs = gen_costs(graph, np.ones(1), np.zeros(1), 0.0, np.random.default_rng(0))
        np.testing.assert_allclose(costs, np.full(2, math.e), rtol=1e-15)

    def test_wrong_coefficient_length_names_vector(self):
        graph = two_dealer_graph()
        with pytest.raises(ConfigError, match="beta_x"):
            gen_costs(graph, np.zeros(2), np.zeros(1), 0.0, np.random.default_rng(0))
        with pytest.raises(ConfigError, match="beta_y"):
            gen_costs(graph, np.zeros(1), np.zeros(2), 0.0, np.random.default_rng(0))

    def test_costs_are_positive_and_deterministic(self):
        config = GenConfig(n_dealers=6, n_assets=2, n_days=3, topology=TopologyER(p_edge=0.7), seed=5)
        market = simulate_market(config)
        assert np.all(market.state.c > 0)
        again = simulate_market(config)
        np.testing.assert_array_equal(market.state.c, again.state.c)


class TestGenBargaining:
    def test_zero_features_give_half(self):
        graph = two_dealer_graph()
        pi = gen_bargaining(graph, np.zeros(1), 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(pi, np.full(2, 0.5))

    def test_unit_feature_gives_logistic_of_one(self):
        e = np.ones((1, 2, 2, 1))
        graph = build_graph(2, [(0, 1, 0, 0), (1, 0, 0, 0)], e=e, u=np.full((2, 1, 1), 10.0))
        pi = gen_bargaining(graph, np.ones(1), 0.0, np.random.default_rng(0))
        np.testing.assert_allclose(pi, np.full(2, SIGMOID_ONE), rtol=1e-12)
        np.testing.assert_allclose(pi, np.full(2, 0.7310585786300049), rtol=1e-12)

    def test_values_stay_strictly_inside_unit_interval(self):
        config = GenConfig(n_dealers=8, n_assets=2, n_days=2, topology=TopologyER(p_edge=0.8), seed=11)
        market = simulate_market(config)
        assert np.all(market.state.pi > 0) and np.all(market.state.pi < 1)

    def test_wrong_coefficient_length_names_vector(self):
        graph = two_dealer_graph()
        with pytest.raises(ConfigError, match="eta"):
            gen_bargaining(graph, np.zeros(3), 0.0, np.random.default_rng(0))

    def test_sigmoid_is_stable_at_extremes(self):
        values = sigmoid(np.array([-800.0, 0.0, 800.0]))
        np.testing.assert_allclose(values, [0.0, 0.5, 1.0], atol=1e-12)
        assert np.all(np.isfinite(values))


class TestApplyT:
    def test_isolated_node(self):
        graph = build_graph(1, np.empty((0, 4)), u=np.array([[[10.0]]]))
        state = make_state(graph, c=[1.0], pi=[])
        np.testing.assert_array_equal(apply_T(state, graph, np.array([123.0])), np.array([9.0]))

    def test_two_dealer_example(self):
        graph = two_dealer_graph()
        state = two_dealer_state(graph)
        result = apply_T(state, graph, np.array([9.0, 19.0]))
        np.testing.assert_array_equal(result, np.array([13.0, 19.0]))

    def test_fixed_point_is_stationary(self):
        rng = np.random.default_rng(7)
        graph, state = random_instance(rng, max_dealers=5)
        solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-13))
        np.testing.assert_allclose(apply_T(state, graph, solution.v), solution.v, atol=1e-11)

    def test_nonexpansive_on_arbitrary_pairs(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            graph, state = random_instance(rng, max_dealers=5)
            v_a = rng.normal(0.0, 5.0, graph.n_nodes)
            v_b = rng.normal(0.0, 5.0, graph.n_nodes)
            gap_before = np.max(np.abs(v_a - v_b)) if graph.n_nodes else 0.0
            gap_after = np.max(np.abs(apply_T(state, graph, v_a) - apply_T(state, graph, v_b)))
            assert gap_after <= gap_before + 1e-12

    def test_contracts_single_coordinate_perturbations(self):
        # Each price weights the perturbed value by pi or 1 - pi, so a bump to
        # one coordinate shrinks by at least min(pi, 1 - pi) in one sweep.
        rng = np.random.default_rng(22)
        for _ in range(20):
            graph, state = random_instance(rng, max_dealers=5)
            if graph.n_edges == 0:
                continue
            v_a = rng.normal(0.0, 5.0, graph.n_nodes)
            v_b = v_a.copy()
            coord = int(rng.integers(graph.n_nodes))
            delta = float(rng.uniform(0.5, 5.0) * rng.choice([-1.0, 1.0]))
            v_b[coord] += delta
            modulus = 1.0 - state.contraction_epsilon
            gap_after = np.max(np.abs(apply_T(state, graph, v_a) - apply_T(state, graph, v_b)))
            assert gap_after <= modulus * abs(delta) + 1e-12


class TestSolveFixedPoint:
    def test_two_dealer_solution(self):
        graph = two_dealer_graph()
        state = two_dealer_state(graph)
        solution = solve_fixed_point(state, graph)
        np.testing.assert_allclose(solution.v, [17.0, 19.0], atol=1e-8)
        np.testing.assert_allclose(solution.p, [18.0, 18.0], atol=1e-8)
        assert solution.outcome[0] == OUTCOME_INTERDEALER
        assert solution.buyer[0] == 1
        assert solution.sale_price[0] == pytest.approx(18.0, abs=1e-8)
        assert solution.outcome[1] == OUTCOME_CUSTOMER
        assert solution.buyer[1] == -1
        assert solution.sale_price[1] == 20.0

    def test_edgeless_graph_converges_immediately(self):
        u = np.array([[[10.0]], [[20.0]], [[5.0]]])
        graph = build_graph(3, np.empty((0, 4)), u=u)
        state = make_state(graph, c=[1.0, 2.0, 3.0], pi=[])
        solution = solve_fixed_point(state, graph)
        np.testing.assert_array_equal(solution.v, state.u - state.c)
        assert solution.iterations_used == 1
        assert solution.final_residual == 0.0
        assert np.all(solution.outcome == OUTCOME_ISOLATED)
        np.testing.assert_array_equal(solution.sale_price, state.u)
        assert np.all(np.isnan(solution.best_price))

    def test_solution_is_independent_of_start(self):
        rng = np.random.default_rng(13)
        for _ in range(UNIQUENESS_TRIALS):
            graph, state = random_instance(rng, max_dealers=5)
            first = solve_fixed_point(state, graph, v0=rng.normal(0.0, 50.0, graph.n_nodes))
            second = solve_fixed_point(state, graph, v0=rng.normal(0.0, 50.0, graph.n_nodes))
            np.testing.assert_allclose(first.v, second.v, atol=1e-8)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(ORACLE_INSTANCES):
            graph, state = random_instance(rng, max_dealers=3)
            expected = brute_force_values(graph, state)
            solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-12))
            np.testing.assert_allclose(solution.v, expected, atol=1e-10)

    def test_value_bounds(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            graph, state = random_instance(rng, max_dealers=5)
            solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-12))
            net = state.u - state.c
            np.testing.assert_allclose(solution.v.max(), net.max(), atol=1e-9)
            assert solution.v.min() >= net.min() - 1e-9

    def test_prices_lie_between_trader_values(self):
        rng = np.random.default_rng(19)
        graph, state = random_instance(rng, max_dealers=5, edge_prob=0.8)
        solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-12))
        seller_v = solution.v[graph.seller_nodes]
        buyer_v = solution.v[graph.buyer_nodes]
        low = np.minimum(seller_v, buyer_v) - 1e-12
        high = np.maximum(seller_v, buyer_v) + 1e-12
        assert np.all(solution.p >= low) and np.all(solution.p <= high)

    def test_layers_solve_independently(self):
        edges = [(0, 1, 0, 0), (1, 0, 0, 0), (0, 1, 1, 0), (1, 2, 1, 0)]
        u = np.array([[[10.0], [8.0]], [[20.0], [6.0]], [[7.0], [9.0]]])
        graph = build_graph(3, edges, n_assets=2, u=u)
        c = [1.0, 1.0, 0.5, 0.6, 0.7, 0.8]
        pi = [0.5, 0.5, 0.3, 0.7]
        state = make_state(graph, c=c, pi=pi)
        joint = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-12))

        layer_a = build_graph(3, [(0, 1, 0, 0), (1, 0, 0, 0)], u=u[:, :1, :])
        sol_a = solve_fixed_point(
            make_state(layer_a, c=c[:3], pi=pi[:2]), layer_a, SolveSettings.to_tolerance(tol=1e-12)
        )
        layer_b = build_graph(3, [(0, 1, 0, 0), (1, 2, 0, 0)], u=u[:, 1:, :])
        sol_b = solve_fixed_point(
            make_state(layer_b, c=c[3:], pi=pi[2:]), layer_b, SolveSettings.to_tolerance(tol=1e-12)
        )
        np.testing.assert_allclose(joint.v[:3], sol_a.v, atol=1e-10)
        np.testing.assert_allclose(joint.v[3:], sol_b.v, atol=1e-10)

    def test_fixed_iteration_mode_runs_exact_sweep_count(self):
        graph = two_dealer_graph()
        state = two_dealer_state(graph)
        solution = solve_fixed_point(state, graph, SolveSettings.fixed_iterations(4))
        assert solution.iterations_used == 4

    def test_non_finite_values_raise(self):
        graph = two_dealer_graph()
        state = two_dealer_state(graph)
        with pytest.raises(NumericError, match="node"):
            solve_fixed_point(state, graph, v0=np.array([np.nan, 0.0]))

    def test_rejects_bad_start_shape(self):
        graph = two_dealer_graph()
        state = two_dealer_state(graph)
        with pytest.raises(ConfigError, match="v0"):
            solve_fixed_point(state, graph, v0=np.zeros(3))

    def test_rejects_unknown_mode(self):
        with pytest.raises(ConfigError, match="mode"):
            SolveSettings(mode="half-hearted")


class TestRealizeTrades:
    def test_only_interdealer_sales_are_observed(self):
        graph = two_dealer_graph()
        state = two_dealer_state(graph)
        solution = solve_fixed_point(state, graph)
        observed = realize_trades(solution, graph)
        assert len(observed) == 1
        assert observed.seller[0] == 0
        assert observed.buyer[0] == 1
        assert observed.asset[0] == 0 and observed.day[0] == 0
        assert observed.price[0] == pytest.approx(18.0, abs=1e-8)

    def test_price_ties_pick_lowest_buyer(self):
        edges = [(0, 1, 0, 0), (0, 2, 0, 0)]
        u = np.array([[[10.0]], [[20.0]], [[20.0]]])
        graph = build_graph(3, edges, u=u)
        state = make_state(graph, c=[1.0, 1.0, 1.0], pi=[0.5, 0.5])
        solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-12))
        np.testing.assert_allclose(solution.v, [17.0, 19.0, 19.0], atol=1e-8)
        observed = realize_trades(solution, graph)
        assert len(observed) == 1
        assert observed.buyer[0] == 1

    def test_observation_requires_strict_improvement(self):
        edges = [(0, 1, 0, 0)]
        u = np.array([[[18.0]], [[20.0]]])
        graph = build_graph(2, edges, u=u)
        state = make_state(graph, c=[1.0, 1.0], pi=[0.5])
        solution = solve_fixed_point(state, graph, SolveSettings.to_tolerance(tol=1e-12))
        assert solution.best_price[0] == 18.0
        assert solution.outcome[0] == OUTCOME_CUSTOMER
        assert len(realize_trades(solution, graph)) == 0


class TestSimulateMarket:
    def test_is_deterministic(self):
        config = GenConfig(n_dealers=10, n_assets=2, n_days=5, topology=TopologyER(p_edge=0.7), seed=0)
        first = simulate_market(config)
        second = simulate_market(config)
        assert first.graph.equals(second.graph)
        np.testing.assert_array_equal(first.observed.price, second.observed.price)
        np.testing.assert_array_equal(first.observed.node, second.observed.node)
        np.testing.assert_array_equal(first.solution.v, second.solution.v)

    def test_uses_generation_sweep_count(self):
        config = GenConfig(n_dealers=6, n_assets=1, n_days=2, topology=TopologyER(p_edge=0.6), seed=2)
        market = simulate_market(config)
        assert market.solution.iterations_used == GENERATION_SWEEPS

    def test_observed_prices_exceed_seller_customer_values(self):
        config = GenConfig(n_dealers=10, n_assets=2, n_days=5, topology=TopologyER(p_edge=0.7), seed=1)
        market = simulate_market(config)
        assert len(market.observed) > 0
        node_u = market.graph.node_u
        assert np.all(market.observed.price > node_u[market.observed.node])

    def test_values_are_consistent_with_reported_prices(self):
        config = GenConfig(n_dealers=8, n_assets=2, n_days=3, topology=TopologyER(p_edge=0.6), seed=4)
        market = simulate_market(config)
        best = np.where(np.isnan(market.solution.best_price), -np.inf, market.solution.best_price)
        expected = -market.state.c + np.maximum(best, market.state.u)
        np.testing.assert_allclose(market.solution.v, expected, atol=1e-12)
        chosen = market.solution.chosen_edge[market.observed.node]
        np.testing.assert_array_equal(market.observed.price, market.solution.p[chosen])
