import math

import numpy as np
import pytest

from phantomplan.probkit import (DetectorModel, ManeuverWeights, TruncatedNormal,
                                 detection_weights, detection_weights_raw,
                                 erf_approx)

from oracles import erf_reference, normal_cdf_reference, truncated_moments_reference

SQRT_2_OVER_PI = 0.7978845608028654  # closed-form half-normal mean, MC-confirmed


class TestErfApprox:
    def test_zero(self):
        assert erf_approx(0.0) == 0.0

    def test_odd_symmetry_bit_exact(self):
        for x in [1e-8, 0.3, 1.0, 2.5, 5.9, 17.0]:
            assert erf_approx(-x) == -erf_approx(x)

    def test_frozen_point(self):
        # reference value 0.8427007929497148 from the series oracle
        assert abs(erf_approx(1.0) - 0.8427007929) <= 1.2e-7

    def test_error_bound_on_grid(self):
        xs = np.linspace(-6.0, 6.0, 10_001)
        worst = max(abs(erf_approx(float(x)) - erf_reference(float(x))) for x in xs)
        assert worst <= 1.2e-7

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_nonfinite_rejected(self, bad):
        with pytest.raises(ValueError):
            erf_approx(bad)

    def test_range_open_interval(self):
        for x in [-40.0, -6.0, 6.0, 40.0]:
            assert -1.0 < erf_approx(x) < 1.0 or abs(erf_approx(x)) == 1.0


class TestTruncatedNormal:
    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            TruncatedNormal(0.0, 0.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            TruncatedNormal(0.0, 1.0, 1.0, 1.0)

    def test_cdf_symmetric_midpoint(self):
        d = TruncatedNormal(0.0, 1.0, -1.0, 1.0)
        assert d.cdf(0.0) == pytest.approx(0.5, abs=1e-12)

    def test_cdf_boundaries(self):
        d = TruncatedNormal(2.0, 0.7, 1.0, 4.0)
        assert d.cdf(d.lower) == 0.0
        assert d.cdf(d.upper) == 1.0
        assert d.cdf(d.lower - 5.0) == 0.0
        assert d.cdf(d.upper + 5.0) == 1.0

    def test_cdf_against_integration_oracle(self):
        from scipy.integrate import quad
        d = TruncatedNormal(0.0, 1.0, -1e6, 1e6)
        expected, err = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
                             -30.0, 1.0)
        assert err < 1e-10
        assert d.cdf(1.0) == pytest.approx(0.8413447, abs=1e-6)
        assert d.cdf(1.0) == pytest.approx(expected, abs=1e-6)

    def test_cdf_monotone(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            mu = rng.uniform(-5, 5)
            sigma = rng.uniform(0.2, 3.0)
            lo = mu - rng.uniform(0.5, 4.0) * sigma
            hi = mu + rng.uniform(0.5, 4.0) * sigma
            d = TruncatedNormal(mu, sigma, lo, hi)
            x1, x2 = sorted(rng.uniform(lo - 1, hi + 1, size=2))
            assert d.cdf(x1) <= d.cdf(x2) + 1e-15

    def test_degenerate_mass_raises(self):
        d = TruncatedNormal(0.0, 1.0, 50.0, 51.0)
        with pytest.raises(ArithmeticError):
            d.cdf(50.5)

    def test_half_normal_mean(self):
        d = TruncatedNormal(0.0, 1.0, 0.0, 1e6)
        mean, _ = d.moments()
        assert mean == pytest.approx(SQRT_2_OVER_PI, abs=1e-6)

    @pytest.mark.slow
    def test_half_normal_mean_against_monte_carlo(self):
        mc_mean, mc_var = truncated_moments_reference(0.0, 1.0, 0.0, 1e6)
        d = TruncatedNormal(0.0, 1.0, 0.0, 1e6)
        mean, var = d.moments()
        assert mean == pytest.approx(mc_mean, abs=1e-3)
        assert var == pytest.approx(mc_var, abs=1e-3)

    def test_symmetric_truncation_mean_zero(self):
        for a in (0.5, 1.0, 2.7):
            d = TruncatedNormal(0.0, 1.3, -a, a)
            mean, _ = d.moments()
            assert mean == pytest.approx(0.0, abs=1e-12)

    def test_wide_bounds_recover_parent(self):
        d = TruncatedNormal(5.0, 1.0, -1e6, 1e6)
        mean, var = d.moments()
        assert mean == pytest.approx(5.0, abs=1e-6)
        assert var == pytest.approx(1.0, abs=1e-6)

    def test_variance_shrinks_under_truncation(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            mu = rng.uniform(-3, 3)
            sigma = rng.uniform(0.3, 2.0)
            lo = mu - rng.uniform(0.3, 6.0) * sigma
            hi = mu + rng.uniform(0.3, 6.0) * sigma
            _, var = TruncatedNormal(mu, sigma, lo, hi).moments()
            assert var < sigma ** 2

    def test_pdf_integrates_to_cdf(self):
        d = TruncatedNormal(1.0, 0.8, -0.5, 2.5)
        xs = np.linspace(-0.5, 1.7, 4001)
        integral = np.trapezoid(d.pdf(xs), xs)
        assert integral == pytest.approx(d.cdf(1.7), abs=1e-6)

    def test_shifted(self):
        d = TruncatedNormal(3.0, 1.0, 1.0, 5.0)
        e = d.shifted(2.0)
        assert (e.mu, e.lower, e.upper) == (5.0, 3.0, 7.0)
        assert e.cdf(4.0) == pytest.approx(d.cdf(2.0), abs=1e-12)


PERFECT = DetectorModel(p_tp=1.0, p_fp=0.0, p_tn=1.0, p_fn=0.0)
SYMMETRIC = DetectorModel(p_tp=0.9, p_fp=0.1, p_tn=0.9, p_fn=0.1)


class TestDetectionWeights:
    def test_certain_object_perfect_detector(self):
        w = detection_weights(1.0, PERFECT)
        assert (w.w_a, w.w_b) == (0.0, 1.0)

    def test_coin_flip_perfect_detector(self):
        w = detection_weights(0.5, PERFECT)
        assert w.w_a == pytest.approx(0.5, abs=1e-15)
        assert w.w_b == pytest.approx(0.5, abs=1e-15)

    def test_hand_evaluated_point(self):
        raw = detection_weights_raw(0.3, SYMMETRIC)
        assert raw[0] == pytest.approx(0.66, abs=1e-12)
        assert raw[1] == pytest.approx(0.34, abs=1e-12)
        w = detection_weights(0.3, SYMMETRIC)
        assert w.w_a == pytest.approx(0.66, abs=1e-12)
        assert w.w_b == pytest.approx(0.34, abs=1e-12)

    def test_symmetric_detector_raw_sum_is_one(self):
        for p in np.linspace(0.0, 1.0, 21):
            ra, rb = detection_weights_raw(float(p), SYMMETRIC)
            assert ra + rb == pytest.approx(1.0, abs=1e-12)

    def test_affine_in_p(self):
        det = DetectorModel(p_tp=0.8, p_fp=0.15, p_tn=0.7, p_fn=0.25)
        _, rb0 = detection_weights_raw(0.0, det)
        for p in (0.25, 0.5, 1.0):
            _, rb = detection_weights_raw(p, det)
            assert rb - rb0 == pytest.approx(p * (det.p_tp - det.p_fn), abs=1e-12)

    def test_normalization(self):
        det = DetectorModel(p_tp=0.6, p_fp=0.3, p_tn=0.5, p_fn=0.2)
        w = detection_weights(0.7, det)
        assert w.w_a + w.w_b == pytest.approx(1.0, abs=1e-15)

    def test_degenerate_detector_raises(self):
        det = DetectorModel(p_tp=0.0, p_fp=0.0, p_tn=0.0, p_fn=0.0)
        with pytest.raises(ArithmeticError):
            detection_weights(0.5, det)

    def test_out_of_range_p_rejected(self):
        with pytest.raises(ValueError):
            detection_weights(1.5, PERFECT)

    def test_weights_invariants(self):
        with pytest.raises(ValueError):
            ManeuverWeights(-0.1, 0.5)
        with pytest.raises(ValueError):
            ManeuverWeights(0.0, 0.0)
