import math

import numpy as np
import pytest
from scipy.integrate import quad

from semcom.bounds import (
    Empirical,
    Exponential,
    GaussianEncoder,
    InfeasibleDesignError,
    design_lambda2,
    hypoexp_pdf,
    hypoexp_survival,
    lemma1_bound,
    lemma2_bound,
)
from semcom.decode import Concept, ConceptSet
from semcom.space import SemanticPoint

from conftest import binomial_se

# Example-style design inputs: alpha = (0.5, 0.25, 0.25), tau = (3, 2, 1)
DESIGN_TAUS = (3.0, 2.0, 1.0)
DESIGN_ALPHAS = (0.5, 0.25, 0.25)
# weighted survival of exp(2)+exp(1.5) over those radii, confirmed by
# quadrature and Monte Carlo (see TestDesignExample)
WEIGHTED_SURVIVAL_AT_1P5 = 0.17617890173376868
DESIGN_FLOOR = 0.03965210661966993  # sum alpha_j exp(-2 tau_j)
DESIGN_ROOT = 9.660722730132882  # bisection root for target 0.05, frozen


@pytest.fixture(scope="module")
def design_set(vret_space=None):
    protos = (
        SemanticPoint(((0.1, 0.1), (0.1, 0.1))),
        SemanticPoint(((0.2, 0.2), (0.2, 0.2))),
        SemanticPoint(((0.3, 0.3), (0.3, 0.3))),
    )
    return ConceptSet(
        concepts=tuple(
            Concept(i + 1, f"c{i + 1}", p) for i, p in enumerate(protos)
        ),
        priors=DESIGN_ALPHAS,
    )


def survival_by_quadrature(t, lam1, lam2):
    val, err = quad(lambda x: hypoexp_pdf(x, lam1, lam2), t, np.inf)
    assert err < 5e-9  # keeps the 1e-8 agreement checks meaningful
    return val


class TestHypoexpPdf:
    def test_vanishes_at_zero(self):
        assert hypoexp_pdf(0.0, 2.0, 1.5) == 0.0

    def test_direct_arithmetic_point(self):
        # (l1 l2 / (l2 - l1)) (e^{-l1 x} - e^{-l2 x}) at l1=2, l2=1, x=1
        expected = 2.0 * (math.exp(-1.0) - math.exp(-2.0))
        assert hypoexp_pdf(1.0, 2.0, 1.0) == pytest.approx(expected, rel=1e-12)
        assert hypoexp_pdf(1.0, 2.0, 1.0) == pytest.approx(0.46508831586965, abs=1e-10)

    def test_normalizes_to_one(self):
        for lam1, lam2 in ((2.0, 1.5), (0.5, 4.0), (2.0, 50.0)):
            total, err = quad(lambda x: hypoexp_pdf(x, lam1, lam2), 0, np.inf)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_rejects_equal_rates(self):
        with pytest.raises(ValueError, match="distinct"):
            hypoexp_pdf(1.0, 2.0, 2.0)

    def test_rejects_negative_x(self):
        with pytest.raises(ValueError, match="x >= 0"):
            hypoexp_pdf(-0.1, 2.0, 1.0)


class TestHypoexpSurvival:
    def test_total_probability_at_zero(self):
        assert hypoexp_survival(0.0, 2.0, 1.5) == pytest.approx(1.0, abs=1e-15)

    def test_matches_quadrature(self):
        got = hypoexp_survival(3.0, 2.0, 1.5)
        assert got == pytest.approx(survival_by_quadrature(3.0, 2.0, 1.5), abs=1e-10)
        assert got == pytest.approx(0.03699972962297014, abs=1e-10)

    def test_fast_channel_limit(self):
        # as lam2 grows the channel contributes nothing: survival -> e^{-lam1 tau}
        got = hypoexp_survival(1.0, 2.0, 50.0)
        assert got == pytest.approx(0.14097425337147204, abs=1e-10)
        assert abs(got - math.exp(-2.0)) < 0.01

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(2024)
        n = 1_000_000
        for lam1, lam2, t in ((2.0, 1.0, 1.0), (2.0, 1.5, 2.0), (4.0, 0.5, 1.5)):
            s = rng.exponential(1 / lam1, n) + rng.exponential(1 / lam2, n)
            p_emp = (s > t).mean()
            p = hypoexp_survival(t, lam1, lam2)
            assert abs(p - p_emp) <= 3 * binomial_se(p, n)

    def test_strictly_decreasing_in_tau_and_rates(self):
        taus = np.linspace(0.0, 5.0, 30)
        vals = hypoexp_survival(taus, 2.0, 1.5)
        assert np.all(np.diff(vals) < 0)
        for t in (0.5, 1.0, 3.0):
            assert hypoexp_survival(t, 2.5, 1.5) < hypoexp_survival(t, 2.0, 1.5)
            assert hypoexp_survival(t, 2.0, 1.7) < hypoexp_survival(t, 2.0, 1.5)

    def test_bounds_of_range(self):
        taus = np.linspace(0.0, 50.0, 200)
        vals = hypoexp_survival(taus, 2.0, 1.5)
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        assert hypoexp_survival(1e6, 2.0, 1.5) == pytest.approx(0.0, abs=1e-12)


class TestLemma1Bound:
    def test_closed_form_on_design_example(self, design_set):
        rep = lemma1_bound(design_set, DESIGN_TAUS, Exponential(2.0), Exponential(1.5))
        assert rep.sample_count == 0
        assert rep.confidence_halfwidth == 0.0
        assert rep.bound_value == pytest.approx(WEIGHTED_SURVIVAL_AT_1P5, abs=1e-12)
        # report invariant: weighted per-concept terms reproduce the bound
        recomputed = sum(a * t for a, t in zip(design_set.priors, rep.per_concept_terms))
        assert rep.bound_value == pytest.approx(recomputed, abs=1e-12)

    def test_closed_form_matches_quadrature(self, design_set):
        rep = lemma1_bound(design_set, DESIGN_TAUS, Exponential(2.0), Exponential(1.5))
        by_quad = sum(
            a * survival_by_quadrature(t, 2.0, 1.5)
            for a, t in zip(DESIGN_ALPHAS, DESIGN_TAUS)
        )
        assert rep.bound_value == pytest.approx(by_quad, abs=1e-8)

    def test_monte_carlo_matches_closed_form(self, design_set):
        exact = lemma1_bound(design_set, DESIGN_TAUS, Exponential(2.0), Exponential(1.5))
        mc = lemma1_bound(
            design_set,
            DESIGN_TAUS,
            Empirical(np.random.default_rng(5).exponential(0.5, 400_000)),
            Exponential(1.5),
            n=400_000,
            seed=17,
        )
        assert mc.sample_count == 400_000
        assert abs(mc.bound_value - exact.bound_value) <= 3 * mc.confidence_halfwidth

    def test_huge_radii_drive_bound_to_zero(self, design_set):
        rep = lemma1_bound(design_set, (1e9, 1e9, 1e9), Exponential(2.0), Exponential(1.5))
        assert rep.bound_value == pytest.approx(0.0, abs=1e-12)

    def test_point_masses_at_zero(self, design_set):
        zero = Empirical(np.zeros(4))
        rep = lemma1_bound(design_set, DESIGN_TAUS, zero, zero, n=1000, seed=0)
        assert rep.bound_value == 0.0

    def test_hopeless_empirical_model_returns_one(self, design_set):
        big = Empirical(np.full(8, 100.0))
        rep = lemma1_bound(design_set, DESIGN_TAUS, big, big, n=1000, seed=0)
        assert rep.bound_value == 1.0

    def test_mc_report_invariant(self, design_set):
        rep = lemma1_bound(
            design_set,
            DESIGN_TAUS,
            Empirical(np.random.default_rng(2).exponential(0.5, 10_000)),
            Exponential(1.5),
            n=50_000,
            seed=3,
        )
        recomputed = sum(a * t for a, t in zip(design_set.priors, rep.per_concept_terms))
        assert rep.bound_value == pytest.approx(recomputed, abs=1e-12)

    def test_rejects_infinite_tau(self, design_set):
        with pytest.raises(ValueError, match="finite"):
            lemma1_bound(design_set, (math.inf, 2.0, 1.0), Exponential(2.0), Exponential(1.5))


class TestLemma2Bound:
    def test_closed_form_example(self):
        rep = lemma2_bound(1.0, Exponential(2.0), Exponential(1.0))
        # (2 e^{-1} - e^{-2}) / (2 - 1) by direct arithmetic
        expected = 2.0 * math.exp(-1.0) - math.exp(-2.0)
        assert rep.bound_value == pytest.approx(expected, rel=1e-12)
        assert rep.bound_value == pytest.approx(0.60042359910627, abs=1e-10)

    def test_zero_radius_is_certain_exceedance(self):
        rep = lemma2_bound(0.0, Exponential(2.0), Exponential(1.0))
        assert rep.bound_value == 1.0

    def test_dominates_lemma1_with_shared_seed(self, design_set):
        enc = Empirical(np.random.default_rng(8).exponential(0.5, 100_000))
        ch = Exponential(1.5)
        r1 = lemma1_bound(design_set, DESIGN_TAUS, enc, ch, n=200_000, seed=99)
        r2 = lemma2_bound(min(DESIGN_TAUS), enc, ch, n=200_000, seed=99)
        assert r2.bound_value >= r1.bound_value

    def test_dominates_lemma1_closed_form(self, design_set):
        r1 = lemma1_bound(design_set, DESIGN_TAUS, Exponential(2.0), Exponential(1.5))
        r2 = lemma2_bound(min(DESIGN_TAUS), Exponential(2.0), Exponential(1.5))
        assert r2.bound_value >= r1.bound_value


class TestGaussianEncoderModel:
    def test_mean_distortion_matches_rayleigh_identity(self, vret_space, vret_concepts):
        # two 2-d domains: E[distortion] = 2 sigma sqrt(pi/2)
        sigma = 0.05
        model = GaussianEncoder(sigma_e=sigma, cset=vret_concepts, space=vret_space)
        samples = model.sample(200_000, np.random.default_rng(4))
        expected = 2.0 * sigma * math.sqrt(math.pi / 2.0)
        se = samples.std() / math.sqrt(samples.size)
        assert abs(samples.mean() - expected) <= 3 * se

    def test_samples_are_nonnegative(self, vret_space, vret_concepts):
        model = GaussianEncoder(sigma_e=0.2, cset=vret_concepts, space=vret_space)
        assert np.all(model.sample(1000, np.random.default_rng(0)) >= 0)


class TestDesignLambda2:
    def test_paper_style_inputs_are_inconsistent_with_half_target(self, design_set):
        # the commonly quoted rate 1.5 yields ~0.176, not 0.05; both oracles agree
        direct = lemma1_bound(design_set, DESIGN_TAUS, Exponential(2.0), Exponential(1.5))
        assert direct.bound_value == pytest.approx(WEIGHTED_SURVIVAL_AT_1P5, abs=1e-9)
        assert abs(direct.bound_value - 0.05) > 0.12

    def test_root_for_five_percent_target(self, design_set):
        lam2 = design_lambda2(design_set, DESIGN_TAUS, 2.0, 0.05)
        assert lam2 == pytest.approx(DESIGN_ROOT, abs=1e-6)
        back = sum(
            a * hypoexp_survival(t, 2.0, lam2)
            for a, t in zip(DESIGN_ALPHAS, DESIGN_TAUS)
        )
        assert back == pytest.approx(0.05, abs=1e-9)

    def test_infeasible_target_reports_floor(self, design_set):
        with pytest.raises(InfeasibleDesignError) as exc:
            design_lambda2(design_set, DESIGN_TAUS, 2.0, 0.039)
        assert exc.value.floor == pytest.approx(DESIGN_FLOOR, abs=1e-12)
        assert "0.039652" in str(exc.value)

    def test_single_concept_near_floor(self, vret_space, vret_concepts):
        single = ConceptSet(concepts=(vret_concepts.concepts[0],), priors=(1.0,))
        target = math.exp(-2.0) + 1e-6
        lam2 = design_lambda2(single, (1.0,), 2.0, target)
        assert lam2 > 1e4
        assert hypoexp_survival(1.0, 2.0, lam2) == pytest.approx(target, abs=1e-10)

    def test_target_of_one_rejected(self, design_set):
        with pytest.raises(ValueError, match="below 1"):
            design_lambda2(design_set, DESIGN_TAUS, 2.0, 1.0)


class TestDistortionModels:
    def test_exponential_needs_positive_rate(self):
        with pytest.raises(ValueError):
            Exponential(0.0)

    def test_empirical_needs_nonnegative_samples(self):
        with pytest.raises(ValueError, match="nonnegative"):
            Empirical(np.array([0.5, -0.1]))

    def test_empirical_needs_samples(self):
        with pytest.raises(ValueError, match="nonempty"):
            Empirical(np.array([]))

    def test_exponential_sampling_matches_rate(self):
        s = Exponential(2.0).sample(200_000, np.random.default_rng(6))
        assert s.mean() == pytest.approx(0.5, abs=0.005)
