import math

import numpy as np
import pytest
from scipy import stats

from semcom.decode import nearest_concept, prototype_matrix, tau
from semcom.encoders import (
    TheoreticalEncoderConfig,
    encode_theoretical,
    encoder_floor,
    sample_concept,
    sample_in_tau_ball,
)
from semcom.space import SemanticPoint, distortion_rows

from conftest import binomial_se

# semantic error rate of the sigma=0.15 clipped encoder against a clean
# channel, n=1e7 draws, seed 0; regression constant
FLOOR_SIGMA15_N1E7_SEED0 = 0.0447488


class TestSampleConcept:
    def test_degenerate_prior_always_wins(self, vret_concepts):
        from dataclasses import replace

        loaded = replace(vret_concepts, priors=(1.0, 0.0, 0.0))
        rng = np.random.default_rng(0)
        assert all(sample_concept(loaded, rng) == 1 for _ in range(200))

    def test_frequencies_match_priors(self, vret_concepts):
        from dataclasses import replace

        skewed = replace(vret_concepts, priors=(0.5, 0.25, 0.25))
        rng = np.random.default_rng(1)
        n = 200_000
        draws = np.array([sample_concept(skewed, rng) for _ in range(n)])
        for j, alpha in enumerate(skewed.priors, start=1):
            f = (draws == j).mean()
            assert abs(f - alpha) <= 3 * binomial_se(alpha, n)

    def test_uniform_prior_passes_chi_square(self, vret_concepts):
        rng = np.random.default_rng(2)
        n = 100_000
        draws = np.array([sample_concept(vret_concepts, rng) for _ in range(n)])
        counts = [(draws == j).sum() for j in (1, 2, 3)]
        _, p = stats.chisquare(counts)
        assert p > 0.001


class TestEncodeTheoretical:
    def test_zero_noise_returns_prototype(self, vret_space, vret_concepts):
        cfg = TheoreticalEncoderConfig(sigma_e=0.0)
        rng = np.random.default_rng(0)
        for j in (1, 2, 3):
            z = encode_theoretical(vret_space, vret_concepts, j, cfg, rng)
            assert np.array_equal(
                z.flat(), vret_concepts.concept(j).prototype.flat()
            )

    def test_mean_distortion_matches_rayleigh_identity(self, vret_space, vret_concepts):
        sigma = 0.01
        cfg = TheoreticalEncoderConfig(sigma_e=sigma, clip=False)
        rng = np.random.default_rng(3)
        protos = prototype_matrix(vret_concepts)
        n = 100_000
        pts = np.stack(
            [encode_theoretical(vret_space, vret_concepts, 1, cfg, rng).flat() for _ in range(200)]
        )
        # batched equivalent for volume (same code path underneath)
        noise = protos[0] + sigma * np.random.default_rng(4).standard_normal((n, 4))
        d = distortion_rows(vret_space, noise, protos[0][None, :])
        expected = 2.0 * sigma * math.sqrt(math.pi / 2.0)
        se = d.std() / math.sqrt(n)
        assert abs(d.mean() - expected) <= 3 * se
        assert expected == pytest.approx(0.025066282746310004, abs=1e-12)
        small = distortion_rows(vret_space, pts, protos[0][None, :])
        assert abs(small.mean() - expected) <= 4 * small.std() / math.sqrt(small.size)

    def test_per_coordinate_variance(self, vret_space, vret_concepts):
        sigma = 0.05
        cfg = TheoreticalEncoderConfig(sigma_e=sigma, clip=False)
        rng = np.random.default_rng(5)
        pts = np.stack(
            [
                encode_theoretical(vret_space, vret_concepts, 2, cfg, rng).flat()
                for _ in range(20_000)
            ]
        )
        var = pts.var(axis=0)
        assert np.all(np.abs(var - sigma**2) < 0.05 * sigma**2)

    def test_gaussianity_skewness_without_clip(self, vret_space, vret_concepts):
        cfg = TheoreticalEncoderConfig(sigma_e=0.05, clip=False)
        protos = prototype_matrix(vret_concepts)
        rng = np.random.default_rng(6)
        from semcom.encoders import _encode_batch

        js = np.zeros(1_000_000, dtype=np.int64)
        pts = _encode_batch(vret_space, protos, js, cfg, rng)
        centered = pts - protos[0]
        skew = stats.skew(centered, axis=0)
        assert np.all(np.abs(skew) < 0.05)

    def test_clip_keeps_points_in_range(self, vret_space, vret_concepts):
        cfg = TheoreticalEncoderConfig(sigma_e=0.5, clip=True)
        rng = np.random.default_rng(7)
        for _ in range(100):
            z = encode_theoretical(vret_space, vret_concepts, 3, cfg, rng)
            flat = z.flat()
            assert np.all(flat >= 0.0) and np.all(flat <= 1.0)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            TheoreticalEncoderConfig(sigma_e=-0.1)


class TestEncoderFloor:
    def test_zero_noise_floor_is_zero(self, vret_space, vret_concepts):
        cfg = TheoreticalEncoderConfig(sigma_e=0.0)
        assert encoder_floor(vret_space, vret_concepts, cfg, 10_000, seed=0) == 0.0

    def test_small_noise_floor_is_exactly_zero_at_1e6(self, vret_space, vret_concepts):
        # tau is 35 noise sigmas away: a single error at this n means a bug
        cfg = TheoreticalEncoderConfig(sigma_e=0.01)
        assert encoder_floor(vret_space, vret_concepts, cfg, 1_000_000, seed=0) == 0.0

    def test_regression_value_sigma_015(self, vret_space, vret_concepts):
        cfg = TheoreticalEncoderConfig(sigma_e=0.15, clip=True)
        got = encoder_floor(vret_space, vret_concepts, cfg, 10_000_000, seed=0)
        assert got == pytest.approx(FLOOR_SIGMA15_N1E7_SEED0, abs=1e-12)

    def test_monotone_in_sigma(self, vret_space, vret_concepts):
        sigmas = (0.05, 0.10, 0.15, 0.20, 0.25)
        n = 400_000
        floors = [
            encoder_floor(
                vret_space, vret_concepts, TheoreticalEncoderConfig(sigma_e=s), n, seed=11
            )
            for s in sigmas
        ]
        for lo, hi in zip(floors, floors[1:]):
            slack = 3 * (binomial_se(lo, n) + binomial_se(hi, n))
            assert hi >= lo - slack

    def test_deterministic_given_seed(self, vret_space, vret_concepts):
        cfg = TheoreticalEncoderConfig(sigma_e=0.15)
        a = encoder_floor(vret_space, vret_concepts, cfg, 100_000, seed=42)
        b = encoder_floor(vret_space, vret_concepts, cfg, 100_000, seed=42)
        assert a == b


class TestSampleInTauBall:
    def test_small_fraction_hugs_the_prototype(self, vret_space, vret_concepts):
        rng = np.random.default_rng(8)
        proto = prototype_matrix(vret_concepts)[0]
        for _ in range(50):
            z = sample_in_tau_ball(vret_space, vret_concepts, 1, 1e-4, rng)
            d = distortion_rows(vret_space, z.flat()[None, :], proto[None, :])[0]
            assert d <= 1e-4 * tau(vret_space, vret_concepts, 1)

    def test_every_sample_decodes_home(self, vret_space, vret_concepts):
        rng = np.random.default_rng(9)
        for j in (1, 2, 3):
            for _ in range(100):
                z = sample_in_tau_ball(vret_space, vret_concepts, j, 1.0, rng)
                assert nearest_concept(vret_space, vret_concepts, z).index == j

    def test_sample_mean_decodes_home(self, vret_space, vret_concepts):
        # the ball is convex, so the empirical mean stays inside it
        from semcom.decode import sample_ball

        rng = np.random.default_rng(10)
        t = tau(vret_space, vret_concepts, 2)
        samples = sample_ball(vret_space, vret_concepts, 2, t, 100_000, rng)
        mean_pt = SemanticPoint.from_flat(vret_space, samples.mean(axis=0))
        assert nearest_concept(vret_space, vret_concepts, mean_pt).index == 2

    def test_fraction_validated(self, vret_space, vret_concepts):
        with pytest.raises(ValueError, match="fraction"):
            sample_in_tau_ball(
                vret_space, vret_concepts, 1, 1.5, np.random.default_rng(0)
            )
