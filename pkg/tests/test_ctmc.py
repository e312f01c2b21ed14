import math

import numpy as np
import pytest

from nsdde import oracle
from nsdde.ctmc import (
    RegimePath,
    regime_at_grid,
    sample_regime_path,
    sample_states_at,
    validate_generator,
)
from nsdde.errors import HorizonExceeded, NegativeOffDiagonal, NonSquare, RowSumNonzero


class TestValidateGenerator:
    def test_two_state(self):
        gen = validate_generator([[-1, 1], [2, -2]])
        assert gen.n_states == 2
        assert gen.exit_rate(1) == 1.0
        assert gen.exit_rate(2) == 2.0
        np.testing.assert_array_equal(gen.jump_probabilities(1), [0.0, 1.0])

    def test_single_absorbing_state(self):
        gen = validate_generator([[0.0]])
        assert gen.n_states == 1
        assert gen.exit_rate(1) == 0.0

    def test_diagonal_rederived_exactly(self):
        third = 1.0 / 3.0
        gen = validate_generator([[-(0.1 + 0.2), 0.1, 0.2], [third, -2 * third, third], [0.0, 0.0, 0.0]])
        off = gen.rates - np.diag(np.diag(gen.rates))
        np.testing.assert_array_equal(np.diag(gen.rates), -off.sum(axis=1))
        assert gen.rates[2, 2] == 0.0

    def test_read_only(self):
        gen = validate_generator([[-1, 1], [1, -1]])
        with pytest.raises(ValueError):
            gen.rates[0, 0] = 5.0

    @pytest.mark.parametrize(
        "rates, exc",
        [
            ([[-1, 1]], NonSquare),
            ([], NonSquare),
            ([[-1, 1], [-1, 1]], NegativeOffDiagonal),
            ([[-1, 2], [1, -1]], RowSumNonzero),
            ([[1, 1], [1, -1]], RowSumNonzero),
        ],
    )
    def test_rejects(self, rates, exc):
        with pytest.raises(exc):
            validate_generator(rates)

    def test_row_sum_tolerance(self):
        validate_generator([[-1.0, 1.0 + 5e-13], [1.0, -1.0]])
        with pytest.raises(RowSumNonzero):
            validate_generator([[-1.0, 1.0 + 1e-10], [1.0, -1.0]])

    def test_stationary_two_state_closed_form(self):
        g12, g21 = 0.7, 2.3
        gen = validate_generator([[-g12, g12], [g21, -g21]])
        np.testing.assert_allclose(gen.stationary_distribution(), [g21 / (g12 + g21), g12 / (g12 + g21)], atol=1e-14)


class TestRegimeAtGrid:
    def test_no_jumps_constant(self):
        path = RegimePath(np.array([]), np.array([2]), 1.0)
        np.testing.assert_array_equal(regime_at_grid(path, 0.1, 10), [2] * 11)

    def test_right_continuity_between_grid_points(self):
        path = RegimePath(np.array([0.25]), np.array([1, 2]), 1.0)
        np.testing.assert_array_equal(regime_at_grid(path, 0.1, 5), [1, 1, 1, 2, 2, 2])

    def test_jump_on_grid_point(self):
        t = 2 * 0.1
        path = RegimePath(np.array([t]), np.array([1, 2]), 1.0)
        assert list(regime_at_grid(path, 0.1, 3)) == [1, 1, 2, 2]

    def test_horizon_exceeded(self):
        path = RegimePath(np.array([]), np.array([1]), 1.0)
        with pytest.raises(HorizonExceeded):
            regime_at_grid(path, 0.1, 11)

    def test_at_matches_grid(self):
        path = RegimePath(np.array([0.3, 0.55]), np.array([1, 3, 2]), 1.0)
        assert [path.at(t) for t in (0.0, 0.3, 0.5, 0.55, 0.9)] == [1, 3, 3, 2, 2]


class TestSampling:
    def test_absorbing_chain_never_jumps(self, rng):
        path = sample_regime_path(validate_generator([[0.0, 0.0], [1.0, -1.0]]), 1, 50.0, rng)
        assert path.jump_times.size == 0
        assert list(path.states) == [1]

    def test_deterministic_given_seed(self):
        gen = validate_generator([[-1, 1], [2, -2]])
        a = sample_regime_path(gen, 1, 20.0, np.random.default_rng(9))
        b = sample_regime_path(gen, 1, 20.0, np.random.default_rng(9))
        np.testing.assert_array_equal(a.jump_times, b.jump_times)
        np.testing.assert_array_equal(a.states, b.states)

    def test_states_alternate_and_times_increase(self, rng):
        gen = validate_generator([[-1, 1], [2, -2]])
        path = sample_regime_path(gen, 2, 30.0, rng)
        assert np.all(np.diff(path.jump_times) > 0)
        assert np.all(np.diff(path.states) != 0)
        assert path.jump_times.size == 0 or path.jump_times[-1] <= 30.0

    def test_holding_time_mean(self, rng):
        gen = validate_generator([[-4.0, 4.0], [4.0, -4.0]])
        first = [sample_regime_path(gen, 1, 10.0, rng).jump_times[0] for _ in range(4000)]
        se = 0.25 / math.sqrt(4000)
        assert abs(np.mean(first) - 0.25) < 4 * se

    def test_marginal_matches_series_oracle(self, rng):
        gen = validate_generator([[-1, 1], [2, -2]])
        n = 20_000
        states = [sample_regime_path(gen, 1, 1.0, rng).at(1.0) for _ in range(n)]
        p = oracle.ctmc_marginal(gen.tolist(), 1, 1.0)[0]
        assert abs(np.mean(np.array(states) == 1) - p) <= 3 * math.sqrt(p * (1 - p) / n)

    def test_vectorised_agrees_in_law(self, rng):
        gen = validate_generator([[-3.0, 1.0, 2.0], [0.5, -1.0, 0.5], [4.0, 1.0, -5.0]])
        n = 100_000
        got = sample_states_at(gen, 3, 0.7, n, rng)
        exact = oracle.ctmc_marginal(gen.tolist(), 3, 0.7)
        for j in range(3):
            freq = np.mean(got == j + 1)
            assert abs(freq - exact[j]) <= 4 * math.sqrt(exact[j] * (1 - exact[j]) / n)

    def test_long_run_occupation(self, rng):
        g12, g21 = 1.0, 3.0
        gen = validate_generator([[-g12, g12], [g21, -g21]])
        T = 5000.0
        path = sample_regime_path(gen, 1, T, rng)
        edges = np.concatenate([[0.0], path.jump_times, [T]])
        time_in_1 = np.sum(np.diff(edges)[path.states == 1])
        assert abs(time_in_1 / T - g21 / (g12 + g21)) < 0.02
