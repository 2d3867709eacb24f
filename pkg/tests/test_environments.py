"""Load/reward generators and trace ingestion."""

import numpy as np
import pytest
from scipy.special import betaincinv

from opbandit.core import RngStream
from opbandit.environments import (
    BernoulliReward,
    BetaLoad,
    BinaryRandomLoad,
    DiracReward,
    PeriodicSquareWaveLoad,
    SemiPeriodicLoad,
    TraceLoad,
    TraceReward,
    UniformLoad,
    load_trace,
    next_load,
    sample_reward,
)


class TestSquareWave:
    def test_even_steps_are_low_odd_steps_high(self):
        model = PeriodicSquareWaveLoad(0.05, 0.05)
        assert next_load(model, 2) == 0.05
        assert next_load(model, 3) == 0.95

    def test_bulk_matches_scalar(self):
        model = PeriodicSquareWaveLoad(0.1, 0.2)
        bulk = model.sample_loads(10, None)
        scalars = [model.next_load(t, None) for t in range(1, 11)]
        np.testing.assert_array_equal(bulk, scalars)

    def test_rejects_eps_out_of_range(self):
        with pytest.raises(ValueError):
            PeriodicSquareWaveLoad(0.5, 0.0)


class TestBinaryRandom:
    def test_emits_only_the_two_levels(self):
        model = BinaryRandomLoad(0.0, 0.0, rho=0.5)
        draws = model.sample_loads(1000, RngStream(1, 0))
        assert set(np.unique(draws)) <= {0.0, 1.0}

    @pytest.mark.parametrize("rho", [0.05, 0.5, 0.9])
    def test_low_load_frequency_converges(self, rho):
        model = BinaryRandomLoad(0.0, 0.0, rho=rho)
        draws = model.sample_loads(100_000, RngStream(42, 0))
        assert np.mean(draws == 0.0) == pytest.approx(rho, abs=0.01)

    def test_bulk_matches_scalar(self):
        model = BinaryRandomLoad(0.05, 0.1, rho=0.3)
        bulk = model.sample_loads(200, RngStream(7, 7))
        rng = RngStream(7, 7)
        scalars = [model.next_load(t, rng) for t in range(1, 201)]
        np.testing.assert_array_equal(bulk, scalars)

    def test_quantile_steps_at_rho(self):
        model = BinaryRandomLoad(0.05, 0.1, rho=0.3)
        assert model.quantile(0.29) == 0.05
        assert model.quantile(0.3) == 0.05
        assert model.quantile(0.31) == 0.9

    def test_degenerate_rho_gives_constant_load(self):
        model = BinaryRandomLoad(0.0, 0.0, rho=0.0)
        assert set(model.sample_loads(100, RngStream(0, 0))) == {1.0}


class TestBetaLoad:
    def test_sample_mean(self):
        # Beta(2,2) has mean 1/2
        draws = BetaLoad(2, 2).sample_loads(100_000, RngStream(3, 1))
        assert draws.mean() == pytest.approx(0.5, abs=0.01)

    def test_bulk_matches_scalar(self):
        model = BetaLoad(2, 2)
        bulk = model.sample_loads(50, RngStream(11, 4))
        rng = RngStream(11, 4)
        scalars = [model.next_load(t, rng) for t in range(1, 51)]
        np.testing.assert_array_equal(bulk, scalars)

    def test_quantile_matches_inverse_cdf(self):
        model = BetaLoad(2, 2)
        assert model.quantile(0.05) == betaincinv(2, 2, 0.05)
        assert model.quantile(0.95) == betaincinv(2, 2, 0.95)

    def test_range(self):
        draws = BetaLoad(0.5, 3).sample_loads(1000, RngStream(5, 0))
        assert np.all((draws >= 0) & (draws <= 1))


class TestUniformLoad:
    def test_identity_transform(self):
        rng = RngStream(9, 0)
        us = rng.clone().random(100)
        np.testing.assert_array_equal(UniformLoad().sample_loads(100, rng), us)

    def test_conditional_mean_below(self):
        assert UniformLoad().conditional_mean_below(0.4) == 0.2
        with pytest.raises(ValueError):
            UniformLoad().conditional_mean_below(0.0)


class TestSemiPeriodic:
    def test_range_and_periodic_envelope(self):
        model = SemiPeriodicLoad(period=24, base=0.6, amplitude=0.3)
        draws = model.sample_loads(24 * 50, RngStream(1, 1))
        assert np.all((draws >= 0) & (draws <= 1))
        # peak envelope slots should carry more load than trough slots on average
        arr = draws.reshape(50, 24)
        phase_mean = arr.mean(axis=0)
        assert phase_mean.max() > phase_mean.min() + 0.2

    def test_quantiles_are_monotone(self):
        model = SemiPeriodicLoad()
        assert model.quantile(0.05) < model.quantile(0.5) < model.quantile(0.95)

    def test_rejects_bad_envelope(self):
        with pytest.raises(ValueError):
            SemiPeriodicLoad(base=0.9, amplitude=0.3)


class TestRewardModels:
    def test_dirac_is_deterministic(self):
        model = DiracReward((0.6, 0.4))
        assert sample_reward(model, 1, 10) == 0.4
        assert sample_reward(model, 0, 99) == 0.6

    def test_bernoulli_mean(self):
        model = BernoulliReward((0.25, 0.5))
        rng = RngStream(21, 0)
        draws = [model.sample(0, t, rng) for t in range(1, 100_001)]
        assert np.mean(draws) == pytest.approx(0.25, abs=0.01)
        assert set(draws) <= {0.0, 1.0}

    def test_five_arm_vector_from_config(self):
        from opbandit.config import RewardSpec

        spec = RewardSpec.from_dict(
            {"kind": "bernoulli", "means": [0.05, 0.1, 0.15, 0.2, 0.25]}, "reward"
        )
        model = spec.build()
        assert model.means == (0.05, 0.1, 0.15, 0.2, 0.25)

    def test_rejects_out_of_range_mean(self):
        with pytest.raises(ValueError):
            DiracReward((0.5, 1.5))

    def test_rejects_unknown_arm(self):
        with pytest.raises(ValueError):
            BernoulliReward((0.5, 0.5)).sample(2, 1, RngStream(0, 0))


class TestTraces:
    def test_loads_scaled_by_max(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("0.2\n0.4\n0.8\n")
        data = load_trace(p)
        np.testing.assert_allclose(data.loads, [0.25, 0.5, 1.0])
        assert data.scale == 0.8
        assert data.rewards is None

    def test_reward_columns_used_verbatim(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("load,a,b\n2.0,0.5,0.25\n4.0,1.0,0.75\n")
        data = load_trace(p)
        np.testing.assert_allclose(data.loads, [0.5, 1.0])
        np.testing.assert_allclose(data.rewards, [[0.5, 0.25], [1.0, 0.75]])
        model = TraceReward(data)
        assert model.means == (0.75, 0.5)
        assert model.reward_at(1, 2) == 0.75
        assert model.reward_at(0, 3) == 0.5  # wraps to row 1

    def test_rejects_reward_outside_unit_interval(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1.0,0.5,0.2,1.2\n")
        with pytest.raises(ValueError, match="outside"):
            load_trace(p)

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1.0\n2.0\nnope\n")
        with pytest.raises(ValueError, match="line 3"):
            load_trace(p)

    def test_ragged_row_names_line(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1.0,0.5\n2.0\n")
        with pytest.raises(ValueError, match="line 2"):
            load_trace(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="no data rows"):
            load_trace(p)

    def test_trace_load_wraps(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("1.0\n2.0\n")
        model = TraceLoad(load_trace(p))
        np.testing.assert_allclose(model.sample_loads(5, None), [0.5, 1.0, 0.5, 1.0, 0.5])

    def test_trace_quantile_nearest_rank(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("".join(f"{v}\n" for v in range(1, 11)))
        model = TraceLoad(load_trace(p))
        assert model.quantile(0.05) == pytest.approx(0.1)
        assert model.quantile(0.95) == pytest.approx(1.0)
