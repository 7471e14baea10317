import numpy as np
import pytest

from codedseq.cluster import (
    LatencyModel,
    SeededRng,
    order_stat_mean,
    sample_round,
    simulate_wait,
)


class TestSeededRng:
    def test_same_seed_same_stream(self):
        a = SeededRng(7).spawn(3).uniform_open_closed(10)
        b = SeededRng(7).spawn(3).uniform_open_closed(10)
        np.testing.assert_array_equal(a, b)

    def test_spawn_keys_give_independent_streams(self):
        a = SeededRng(7).spawn(1).uniform_open_closed(10)
        b = SeededRng(7).spawn(2).uniform_open_closed(10)
        assert not np.array_equal(a, b)

    def test_uniforms_in_half_open_interval(self):
        u = SeededRng(0).uniform_open_closed(10000)
        assert np.all(u > 0.0) and np.all(u <= 1.0)


class TestSampleRound:
    def test_deterministic_model(self):
        out = sample_round(LatencyModel.deterministic(1.0), 4, SeededRng(0))
        np.testing.assert_array_equal(out.finish_times, np.ones(4))
        assert all(out.elapsed(ell) == 1.0 for ell in range(1, 5))

    def test_reproducible_draws(self):
        m = LatencyModel.exponential(1.0)
        a = sample_round(m, 4, SeededRng(5).spawn(1))
        b = sample_round(m, 4, SeededRng(5).spawn(1))
        np.testing.assert_array_equal(a.finish_times, b.finish_times)

    def test_exponential_uses_inverse_cdf(self):
        rate = 2.5
        u = SeededRng(9).spawn(0).uniform_open_closed(4)
        out = sample_round(LatencyModel.exponential(rate), 4, SeededRng(9).spawn(0))
        np.testing.assert_allclose(out.finish_times, -np.log(u) / rate)

    def test_shifted_exponential(self):
        m = LatencyModel.shifted_exponential(shift=0.5, rate=1.0)
        out = sample_round(m, 100, SeededRng(3))
        assert np.all(out.finish_times >= 0.5)

    def test_elapsed_nondecreasing(self):
        out = sample_round(LatencyModel.exponential(1.0), 6, SeededRng(11))
        elapsed = [out.elapsed(ell) for ell in range(1, 7)]
        assert elapsed == sorted(elapsed)

    def test_order_is_permutation(self):
        out = sample_round(LatencyModel.exponential(1.0), 6, SeededRng(4))
        assert sorted(out.order.tolist()) == list(range(6))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LatencyModel(kind="weibull")
        with pytest.raises(ValueError):
            LatencyModel.exponential(0.0)
        with pytest.raises(ValueError):
            LatencyModel.deterministic(-1.0)


class TestOrderStatMean:
    @pytest.mark.parametrize(
        "ell,expected",
        [(1, 0.25), (2, 7 / 12), (3, 13 / 12), (4, 25 / 12)],
    )
    def test_closed_form(self, ell, expected):
        assert order_stat_mean(LatencyModel.exponential(1.0), 4, ell) == pytest.approx(
            expected
        )

    def test_reported_two_decimal_values(self):
        m = LatencyModel.exponential(1.0)
        assert round(order_stat_mean(m, 4, 1), 2) == 0.25
        assert round(order_stat_mean(m, 4, 2), 2) == 0.58
        assert round(order_stat_mean(m, 4, 3), 2) == 1.08
        assert round(order_stat_mean(m, 4, 4), 2) == 2.08

    def test_rate_scaling(self):
        m = LatencyModel.exponential(4.0)
        assert order_stat_mean(m, 4, 4) == pytest.approx(25 / 48)

    def test_unsupported_kind(self):
        with pytest.raises(ValueError):
            order_stat_mean(LatencyModel.deterministic(1.0), 4, 2)

    def test_monte_carlo_agreement(self):
        # smaller replica of the acceptance check
        m = LatencyModel.exponential(1.0)
        root = SeededRng(123)
        n = 20000
        samples = np.empty((n, 4))
        for r in range(n):
            samples[r] = sample_round(m, 4, root.spawn(r)).sorted_times
        for ell in range(1, 5):
            col = samples[:, ell - 1]
            stderr = col.std(ddof=1) / np.sqrt(n)
            assert abs(col.mean() - order_stat_mean(m, 4, ell)) <= 3 * stderr


class TestSimulateWait:
    def test_wait_for_all(self):
        elapsed, responders = simulate_wait(
            LatencyModel.exponential(1.0), 4, 4, SeededRng(8).spawn(0)
        )
        out = sample_round(LatencyModel.exponential(1.0), 4, SeededRng(8).spawn(0))
        assert elapsed == out.finish_times.max()
        assert responders == (1, 2, 3, 4)

    def test_wait_for_first(self):
        elapsed, responders = simulate_wait(
            LatencyModel.exponential(1.0), 4, 1, SeededRng(8).spawn(1)
        )
        out = sample_round(LatencyModel.exponential(1.0), 4, SeededRng(8).spawn(1))
        assert elapsed == out.finish_times.min()
        assert len(responders) == 1

    def test_responders_exclude_slowest(self):
        rng = SeededRng(42).spawn(2)
        elapsed, responders = simulate_wait(LatencyModel.exponential(1.0), 4, 3, rng)
        out = sample_round(LatencyModel.exponential(1.0), 4, SeededRng(42).spawn(2))
        slowest = int(np.argmax(out.finish_times)) + 1
        assert slowest not in responders
        assert len(responders) == 3
        assert elapsed == out.elapsed(3)

    def test_tie_break_by_worker_index(self):
        out = sample_round(LatencyModel.deterministic(2.0), 4, SeededRng(0))
        assert out.responders(2) == (1, 2)
