import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import lambertw as scipy_w

from kometo.fidelity import Cutoff, ExpDecay, PolyDecay
from kometo.instances import SmoothnessProfile
from kometo.partition import DomainError
from kometo.theory import (BoundQuery, CaseError, corollary4_rate, fixed_point_residuals, inverse_phi, lambert_w,
                           lambert_w_lower, lemma6_bound, lemma7_bound, lemma7_conditions, theorem1_constants,
                           theorem1_lower, theorem3_bound)

HALF = SmoothnessProfile(1, 0.5, 0, 2, 2)
MODELS = [PolyDecay(1, 1), PolyDecay(0.2, 2), ExpDecay(1, 1, 1), ExpDecay(50, 2, 0.5), Cutoff(1), Cutoff(30)]
PROFILES = [SmoothnessProfile.with_min_constant(nu, rho, d, K)
            for nu, rho, d, K in [(1, 0.5, 0, 2), (1, 0.5, 0.5, 2), (1, 0.5, 1, 2), (2, 0.7, 0.5, 3)]]


class TestLambertW:
    @pytest.mark.parametrize("x, w", [(0.0, 0.0), (math.e, 1.0), (1.0, 0.5671432904097838)])
    def test_values(self, x, w):
        assert lambert_w(x) == pytest.approx(w, abs=1e-12)

    def test_negative(self):
        with pytest.raises(DomainError):
            lambert_w(-0.1)

    @pytest.mark.parametrize("k", range(-6, 13))
    def test_identity_residual(self, k):
        x = 10.0**k
        w = lambert_w(x)
        assert abs(w * math.exp(w) - x) / max(x, 1.0) <= 1e-12
        assert w == pytest.approx(scipy_w(x).real, rel=1e-12)

    @given(st.floats(math.e, 1e300))
    def test_log_bound_above_e(self, x):
        assert lambert_w(x) >= math.log(x) - math.log(math.log(x)) - 1e-12

    @given(st.floats(0, math.e))
    def test_linear_bound_below_e(self, x):
        assert lambert_w(x) >= x / math.e - 1e-15
        assert lambert_w_lower(x) == x / math.e


class TestUpperBound:
    def test_cutoff_example(self):
        ub = theorem3_bound(BoundQuery(HALF, Cutoff(1), 80))
        assert ub.h == pytest.approx(80 / (8 * math.e), rel=1e-12)
        assert ub.regret_bound == pytest.approx(0.15616, abs=1e-4)
        assert ub.regime == "high"

    def test_poly_example(self):
        ub = theorem3_bound(BoundQuery(HALF, PolyDecay(1, 1), 1000))
        w = scipy_w(1000 * math.log(2) / (8 * math.e)).real
        assert w == pytest.approx(2.532, abs=1e-3)
        assert ub.h1 == pytest.approx(w / math.log(2), rel=1e-10)
        assert ub.h1 == pytest.approx(3.653, abs=1e-3)
        assert ub.regime == "high"
        assert ub.regret_bound == pytest.approx(3 / 0.5 * 0.5**ub.h1 + 2 / 1000, rel=1e-12)

    def test_degenerate(self):
        ub = theorem3_bound(BoundQuery(HALF, PolyDecay(), 0))
        assert (ub.regime, ub.regret_bound) == ("low", 2.0)

    def test_from_budget(self):
        assert BoundQuery.from_budget(HALF, Cutoff(1), 1e6).eff_budget == 719

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    @pytest.mark.parametrize("profile", PROFILES, ids=lambda p: f"d={p.d},K={p.K}")
    def test_fixed_points(self, profile, model):
        for L in np.logspace(0.5, 8, 12):
            res = fixed_point_residuals(BoundQuery(profile, model, int(L)))
            assert all(r <= 1e-9 for r in res.values()), res

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    @pytest.mark.parametrize("profile", PROFILES, ids=lambda p: f"d={p.d},K={p.K}")
    def test_non_increasing_in_budget(self, profile, model):
        bounds = [theorem3_bound(BoundQuery(profile, model, L)).regret_bound for L in range(1, 3000, 7)]
        assert all(b2 <= b1 * (1 + 1e-12) for b1, b2 in zip(bounds, bounds[1:]))

    @given(L=st.integers(0, 10**7), model=st.sampled_from(MODELS), profile=st.sampled_from(PROFILES))
    def test_single_regime(self, L, model, profile):
        ub = theorem3_bound(BoundQuery(profile, model, L))
        assert ub.regime in ("high", "low")
        assert math.isfinite(ub.regret_bound)
        # rho**h leaves the double range near h ln(1/rho) = 745
        assert ub.regret_bound > 0 or ub.h * profile.log_inv_rho > 700


class TestRates:
    def test_tags(self):
        q = BoundQuery.from_budget(PROFILES[1], PolyDecay(1, 1), 1e6)
        r = corollary4_rate(q)
        assert r.regime == "high" and r.tag == "Θ̃(Λ^{−1/(d+1/α)})" and r.exponent == pytest.approx(-1 / 1.5)
        assert corollary4_rate(BoundQuery.from_budget(HALF, Cutoff(1), 1e6)).tag == "exp(−Θ̃(Λ))"

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    @pytest.mark.parametrize("profile", PROFILES, ids=lambda p: f"d={p.d},K={p.K}")
    def test_envelope_dominates(self, profile, model):
        env = corollary4_rate(BoundQuery.from_budget(profile, model, 1e4)).envelope
        for lam in np.logspace(0, 8, 25):
            e = env(lam)
            ub = theorem3_bound(BoundQuery.from_budget(profile, model, lam))
            assert math.isfinite(e)
            assert e > 0 or ub.h * profile.log_inv_rho > 700
            assert e >= ub.regret_bound * (1 - 1e-12)


class TestLowerBound:
    def test_poly_constant(self):
        p = SmoothnessProfile(1, 0.5, 1, 1, 2)
        lb = theorem1_lower(p, PolyDecay(1, 1), 1e4)
        assert lb.constant == pytest.approx(2**-2.5, rel=1e-12)
        assert lb.value == pytest.approx(2**-2.5 * 1e-2, rel=1e-12)

    def test_cutoff_positive_dimension(self):
        p = SmoothnessProfile(1, 0.5, 1, 1, 2)
        lb = theorem1_lower(p, Cutoff(2), 100)
        assert theorem1_constants(p, Cutoff(2))["D5"] == pytest.approx(0.125)
        assert lb.value == pytest.approx(0.125 / 100)

    def test_case_error(self):
        from kometo.theory import d3_constant
        with pytest.raises(CaseError):
            d3_constant(HALF)

    def test_lemma6_cutoff_empty(self):
        assert lemma6_bound(HALF, Cutoff(1), 1.0, "a") == 0.0

    @pytest.mark.parametrize("lam", [1e3, 1e5, 1e7])
    def test_lemma6_matches_closed_form(self, lam):
        p = SmoothnessProfile(1, 0.5, 1, 1, 2)
        lb = theorem1_lower(p, PolyDecay(1, 1), lam)
        assert lam >= lb.valid_above
        assert lemma6_bound(p, PolyDecay(1, 1), lam, "a") == pytest.approx(lb.value, rel=1e-9)

    @pytest.mark.parametrize("variant", ["a", "b"])
    @pytest.mark.parametrize("model", MODELS[:4], ids=repr)
    def test_lemma6_non_increasing(self, variant, model):
        p = PROFILES[1]
        vals = [lemma6_bound(p, model, lam, variant) for lam in np.logspace(0, 6, 20)]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))

    @given(y=st.floats(1e-6, 10), model=st.sampled_from(MODELS))
    def test_inverse_phi(self, y, model):
        c = inverse_phi(model, y)
        if math.isfinite(c):
            assert model.phi(c * (1 + 1e-9)) <= y * (1 + 1e-9)
        numeric = inverse_phi(model.phi, y)
        if math.isfinite(c) and not isinstance(model, Cutoff):
            assert numeric == pytest.approx(c, rel=1e-9)


class TestLemma7:
    def test_examples(self):
        assert lemma7_conditions(HALF, Cutoff(1), 80, 0, 3)
        assert not lemma7_conditions(HALF, Cutoff(1), 20, 0, 3)
        assert not lemma7_conditions(HALF, Cutoff(5), 80, 0, 3)

    def test_bound(self):
        assert lemma7_bound(HALF, Cutoff(1), 80, 3) == pytest.approx(6 * 0.125)
