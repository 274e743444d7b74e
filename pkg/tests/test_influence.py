"""Influence functions: closed-form values, envelopes, oddness, monotonicity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcatoni import ConfigError, InputError
from jointcatoni.influence import (NARROW, WIDE, InfluenceSpec, Variant, check_envelope,
                                   eval_psi1, eval_psi2, lower_envelope, mixed, psi,
                                   upper_envelope)

BETAS = (1.05, 1.5, 2.0)
VARIANTS = (WIDE, NARROW, mixed(0.5), mixed(0.2))


def ref_psi(kind, x, beta):
    """Scalar reference written straight from the closed forms."""
    a = abs(x)
    s = math.copysign(1.0, x) if x != 0 else 0.0
    if kind == "wide":
        return s * math.log(1 + a + a ** beta / beta)
    if a >= 1:
        return s * math.log(beta)
    return -s * math.log(1 - a + a ** beta / beta)


class TestClosedForms:
    def test_wide_zero(self):
        assert eval_psi1(InfluenceSpec(), 0.0) == 0.0

    def test_wide_one(self):
        assert eval_psi1(InfluenceSpec(), 1.0) == pytest.approx(math.log(2.5), abs=1e-15)
        assert eval_psi1(InfluenceSpec(), 1.0) == pytest.approx(0.916291, abs=1e-6)

    def test_narrow_saturates_at_log2(self):
        spec = InfluenceSpec(psi1=NARROW)
        assert eval_psi1(spec, 2.0) == pytest.approx(0.693147, abs=1e-6)
        assert eval_psi1(spec, 1e9) == pytest.approx(math.log(2), abs=1e-15)

    def test_narrow_negative_branch(self):
        spec = InfluenceSpec(psi1=NARROW)
        assert eval_psi1(spec, -0.5) == pytest.approx(math.log(0.625), abs=1e-15)
        assert eval_psi1(spec, -0.5) == pytest.approx(-0.470004, abs=1e-6)

    def test_psi2_wide_beta2(self):
        spec = InfluenceSpec(beta=2.0)
        assert eval_psi2(spec, 0.0) == 0.0
        assert eval_psi2(spec, 1.0) == pytest.approx(0.916291, abs=1e-6)

    def test_psi2_narrow_saturates_at_log_beta(self):
        spec = InfluenceSpec(psi2=NARROW, beta=1.5)
        assert eval_psi2(spec, 3.0) == pytest.approx(math.log(1.5), abs=1e-15)
        assert eval_psi2(spec, 3.0) == pytest.approx(0.405465, abs=1e-6)

    def test_narrow_continuous_at_one(self):
        for beta in BETAS:
            inside = psi(NARROW, np.nextafter(1.0, 0.0), beta)
            assert float(inside) == pytest.approx(math.log(beta), abs=1e-12)

    @pytest.mark.parametrize("kind", ["wide", "narrow"])
    @pytest.mark.parametrize("beta", BETAS)
    def test_matches_scalar_reference(self, kind, beta):
        xs = np.linspace(-4, 4, 801)
        got = psi(Variant(kind), xs, beta)
        want = [ref_psi(kind, float(x), beta) for x in xs]
        np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-15)

    def test_vector_and_scalar_agree(self):
        xs = np.array([-3.0, -0.2, 0.0, 0.7, 5.0])
        spec = InfluenceSpec(psi1=NARROW, psi2=WIDE, beta=1.3)
        vec = eval_psi1(spec, xs)
        assert [eval_psi1(spec, float(x)) for x in xs] == list(vec)


class TestValidation:
    @pytest.mark.parametrize("beta", [1.0, 2.5, 0.5, float("nan")])
    def test_beta_out_of_range(self, beta):
        with pytest.raises(ConfigError):
            InfluenceSpec(beta=beta)

    def test_non_finite_input(self):
        with pytest.raises(InputError):
            eval_psi1(InfluenceSpec(), float("inf"))
        with pytest.raises(InputError):
            eval_psi2(InfluenceSpec(), np.array([0.0, np.nan]))

    def test_variant_parsing(self):
        assert Variant.parse("wide") == WIDE
        assert Variant.parse("narrow") == NARROW
        assert Variant.parse("mixed") == mixed(0.5)
        assert Variant.parse("mixed:0.25") == mixed(0.25)
        assert Variant.parse(str(mixed(0.25))) == mixed(0.25)
        with pytest.raises(ConfigError):
            Variant.parse("medium")
        with pytest.raises(ConfigError):
            Variant.parse("mixed:1.5")

    def test_string_fields_accepted(self):
        spec = InfluenceSpec("narrow", "mixed:0.3", 1.2)
        assert spec.psi1 == NARROW and spec.psi2 == mixed(0.3)


class TestEnvelope:
    grid = np.linspace(-10, 10, 2001)

    def test_wide_grid(self):
        assert check_envelope(InfluenceSpec(), self.grid)

    def test_mixed_grid(self):
        assert check_envelope(InfluenceSpec(mixed(0.5), mixed(0.5)), self.grid)

    def test_corrupted_variant_rejected(self):
        assert not check_envelope(InfluenceSpec(), self.grid, psi1=lambda x: 2 * x)

    def test_non_monotone_rejected(self):
        bumpy = lambda x: np.log1p(np.abs(x)) * np.sign(x) * (1 - 0.5 * (np.abs(x) > 3))
        assert not check_envelope(InfluenceSpec(), self.grid, psi2=bumpy)

    @pytest.mark.parametrize("variant", VARIANTS, ids=str)
    @pytest.mark.parametrize("beta", BETAS)
    def test_random_points(self, variant, beta):
        x = np.random.default_rng(11).uniform(-50, 50, 10_000)
        y = psi(variant, x, beta)
        slack = 1e-12 * (1 + np.abs(y))
        assert np.all(lower_envelope(x, 2.0) - slack <= psi(variant, x, 2.0))
        assert np.all(psi(variant, x, 2.0) <= upper_envelope(x, 2.0) + slack)
        assert np.all(lower_envelope(x, beta) - slack <= y)
        assert np.all(y <= upper_envelope(x, beta) + slack)


class TestProperties:
    @pytest.mark.parametrize("variant", VARIANTS, ids=str)
    @pytest.mark.parametrize("beta", BETAS)
    def test_oddness(self, variant, beta):
        x = np.random.default_rng(3).uniform(-50, 50, 10_000)
        assert np.max(np.abs(psi(variant, x, beta) + psi(variant, -x, beta))) <= 1e-12

    @pytest.mark.parametrize("variant", VARIANTS, ids=str)
    @pytest.mark.parametrize("beta", BETAS)
    def test_monotone_on_sorted_grid(self, variant, beta):
        x = np.sort(np.random.default_rng(5).uniform(-50, 50, 10_000))
        assert np.all(np.diff(psi(variant, x, beta)) >= 0)

    def test_mixture_endpoints(self):
        x = np.random.default_rng(9).uniform(-20, 20, 5_000)
        for beta in BETAS:
            np.testing.assert_allclose(psi(mixed(1.0), x, beta), psi(WIDE, x, beta),
                                       rtol=0, atol=1e-15)
            np.testing.assert_allclose(psi(mixed(0.0), x, beta), psi(NARROW, x, beta),
                                       rtol=0, atol=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(x=st.floats(-1e6, 1e6), w=st.floats(0, 1), beta=st.floats(1.01, 2.0))
    def test_mixture_identity(self, x, w, beta):
        want = w * ref_psi("wide", x, beta) + (1 - w) * ref_psi("narrow", x, beta)
        assert float(psi(mixed(w), x, beta)) == pytest.approx(want, rel=1e-12, abs=1e-14)

    @settings(max_examples=300, deadline=None)
    @given(a=st.floats(-1e3, 1e3), b=st.floats(-1e3, 1e3), beta=st.floats(1.01, 2.0),
           kind=st.sampled_from(["wide", "narrow"]))
    def test_monotone_pairs(self, a, b, beta, kind):
        lo, hi = min(a, b), max(a, b)
        assert float(psi(Variant(kind), lo, beta)) <= float(psi(Variant(kind), hi, beta))

    def test_zero_is_exact(self):
        for v in VARIANTS:
            for beta in BETAS:
                assert float(psi(v, 0.0, beta)) == 0.0
