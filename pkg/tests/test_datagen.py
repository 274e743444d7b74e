"""Seeded noise generation, synthetic regression data and kurtosis."""

import hashlib
import math

import numpy as np
import pytest
from scipy import stats

from jointcatoni import ConfigError, InputError
from jointcatoni.datagen import (LinearModelSpec, NoiseSpec, default_beta, gen_linear_data,
                                 kurtosis, make_rng, replication_seed, sample_noise)
from jointcatoni.estimators import ols

THETA_STAR = (5.0, 0.0, -8.0, 0.0, 2.0)
# sha256 over X then y bytes, recorded from the first run of this generator
LINEAR_DIGEST = "30ed4b956d98cf08c480f89d2866a860878ab6f6f1c330d135417501f1697ef6"


class TestNoiseSpec:
    @pytest.mark.parametrize("text", ["normal:1", "t:2.1", "pareto:1:2.1", "frechet:0:1:2.1",
                                      "dpareto:1:2.1", "halft:2.1"])
    def test_round_trip(self, text):
        spec = NoiseSpec.parse(text)
        assert NoiseSpec.parse(str(spec)) == spec

    def test_t_form(self):
        spec = NoiseSpec.parse("t:2.1")
        assert spec.family == "t" and spec.params == (2.1,)

    @pytest.mark.parametrize("text", ["gauss:1", "t", "pareto:1", "t:-1", "normal:-1",
                                      "pareto:1:0.9", "frechet:0:1:1.0", "halft:1"])
    def test_rejected(self, text):
        with pytest.raises(ConfigError):
            NoiseSpec.parse(text)

    def test_uncentred_heavy_allowed(self):
        spec = NoiseSpec.parse("pareto:1:0.9", center=False)
        assert spec.tail_index == 0.9

    def test_analytic_means(self):
        assert NoiseSpec.parse("pareto:2:3", center=False).raw_mean() == pytest.approx(3.0)
        fr = NoiseSpec.parse("frechet:1:2:3", center=False)
        assert fr.raw_mean() == pytest.approx(1 + 2 * math.gamma(1 - 1 / 3))
        ht = NoiseSpec.parse("halft:3", center=False)
        assert ht.raw_mean() == pytest.approx(2 * stats.t(3).expect(lambda x: x, lb=0))
        assert NoiseSpec.parse("pareto:1:2.1").mean() == 0.0

    def test_analytic_std(self):
        assert NoiseSpec.parse("t:5").std() == pytest.approx(math.sqrt(5 / 3))
        assert NoiseSpec.parse("pareto:1:2.1").std() ** 2 == pytest.approx(
            2.1 / (1.1 ** 2 * 0.1))
        assert NoiseSpec.parse("pareto:1:2.1").std() ** 2 == pytest.approx(17.36, abs=0.01)
        assert NoiseSpec.parse("frechet:0:1:3").std() == pytest.approx(
            stats.invweibull(3).std())
        assert NoiseSpec.parse("dpareto:1:3").std() == pytest.approx(
            stats.lomax(3).moment(2) ** 0.5)


class TestSampleNoise:
    def test_zero_sigma(self):
        assert np.all(sample_noise(NoiseSpec("normal", (0.0,)), 50, seed=1) == 0.0)

    def test_deterministic(self):
        spec = NoiseSpec.parse("frechet:0:1:2.1")
        a = sample_noise(spec, 1000, seed=99)
        b = sample_noise(spec, 1000, seed=99)
        assert a.tobytes() == b.tobytes()
        assert a.tobytes() != sample_noise(spec, 1000, seed=100).tobytes()

    def test_needs_seed(self):
        with pytest.raises(InputError):
            sample_noise(NoiseSpec.parse("t:3"), 5)

    @pytest.mark.parametrize("text,k", [("pareto:1:2.1", 3), ("frechet:0:1:2.1", 5)])
    def test_centering(self, text, k):
        spec = NoiseSpec.parse(text)
        x = sample_noise(spec, 10 ** 6, seed=2024)
        assert abs(x.mean()) <= k * spec.std() / 1000

    def test_pareto_support(self):
        x = sample_noise(NoiseSpec.parse("pareto:2:3", center=False), 10_000, seed=1)
        assert x.min() >= 2.0

    @pytest.mark.parametrize("text,dist", [
        ("t:3", stats.t(3)),
        ("pareto:1:2.5", stats.pareto(2.5)),
        ("frechet:0:1:2.5", stats.invweibull(2.5)),
    ])
    def test_distribution(self, text, dist):
        x = sample_noise(NoiseSpec.parse(text, center=False), 20_000, seed=8)
        assert stats.kstest(x, dist.cdf).pvalue > 1e-3

    def test_half_t(self):
        x = sample_noise(NoiseSpec.parse("halft:3", center=False), 20_000, seed=8)
        assert stats.kstest(x, lambda q: 2 * stats.t(3).cdf(q) - 1).pvalue > 1e-3

    def test_double_pareto_symmetric(self):
        x = sample_noise(NoiseSpec.parse("dpareto:1:3"), 200_000, seed=3)
        assert abs(np.mean(x > 0) - 0.5) < 0.005
        assert stats.kstest(np.abs(x), stats.lomax(3).cdf).pvalue > 1e-3

    def test_t_kurtosis(self):
        x = sample_noise(NoiseSpec.parse("t:10"), 10 ** 6, seed=11)
        want = 3 + 6 / (10 - 4)
        assert abs(kurtosis(x) - want) <= 0.2 * want


class TestSeeds:
    def test_replication_seed(self):
        assert replication_seed(12, 5) == 12 ^ 5
        assert len({replication_seed(7, r) for r in range(1000)}) == 1000

    def test_generator_pinned(self):
        a = make_rng(5).random(3)
        b = np.random.Generator(np.random.PCG64(5)).random(3)
        assert a.tolist() == b.tolist()


class TestLinearData:
    def test_zero_model(self):
        spec = LinearModelSpec((0.0,) * 4, 30, NoiseSpec("normal", (0.0,)), seed=1)
        X, y = gen_linear_data(spec)
        assert X.shape == (30, 4) and np.all(y == 0)

    def test_exact_fit(self):
        X, y = gen_linear_data(LinearModelSpec(THETA_STAR, 50, NoiseSpec("normal", (0.0,)), 3))
        np.testing.assert_allclose(ols(X, y), THETA_STAR, atol=1e-12)

    def test_digest(self):
        X, y = gen_linear_data(LinearModelSpec(THETA_STAR, 500, NoiseSpec.parse("t:2.1"),
                                               seed=20240611))
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(X).tobytes())
        h.update(np.ascontiguousarray(y).tobytes())
        assert h.hexdigest() == LINEAR_DIGEST

    def test_invalid(self):
        with pytest.raises(ConfigError):
            LinearModelSpec((), 10, NoiseSpec.parse("t:3"))
        with pytest.raises(ConfigError):
            LinearModelSpec((1.0,), 0, NoiseSpec.parse("t:3"))


class TestKurtosis:
    def test_two_point(self):
        assert kurtosis([-1, 1, -1, 1]) == 1.0

    def test_normal(self):
        assert abs(kurtosis(make_rng(0).standard_normal(10 ** 6)) - 3) <= 0.05

    def test_matches_scipy(self):
        x = make_rng(1).standard_t(7, 1000)
        assert kurtosis(x) == pytest.approx(stats.kurtosis(x, fisher=False, bias=True))

    def test_degenerate(self):
        with pytest.raises(InputError):
            kurtosis([2.0] * 10)
        with pytest.raises(InputError):
            kurtosis([1.0, 2.0, 3.0])


class TestDefaultBeta:
    def test_values(self):
        assert default_beta(NoiseSpec.parse("normal:1")) == 2.0
        assert default_beta(NoiseSpec.parse("t:5")) == 2.0
        assert default_beta(NoiseSpec.parse("t:2.1")) == pytest.approx((2.1 - 0.01) / 2)
        assert default_beta(NoiseSpec.parse("pareto:1:3")) == pytest.approx(1.495)

    def test_too_heavy(self):
        with pytest.raises(ConfigError):
            default_beta(NoiseSpec.parse("t:1.5"))
