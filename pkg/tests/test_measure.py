import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from vjump.errors import ConfigError, DenominatorNotPositive, ZeroMomentum
from vjump.measure import (Atomic, TabulatedRadial, UniformBall,
                           UniformInterval, measure_from_config)

# closed-form reference values used throughout; each one comes from an
# antiderivative or a series worked out independently of the code under test
BALL3_RESOLVENT_E1_H2 = 4.5 - 6.0 * math.log(2.0)    # = 0.3411169166403285
LOG5_HALF = math.log(5.0) / 2.0                       # interval resolvent


def interval_resolvent(p, h):
    return math.log((1.0 + h + p) / (1.0 + h - p)) / (2.0 * p)


class TestSupport:

    def test_interval_mu_is_signed_endpoint(self, interval):
        q = interval.support_mu([2.0])
        assert q.mu == 2.0
        assert q.maximizers.tolist() == [[1.0]]
        q = interval.support_mu([-3.0])
        assert q.mu == 3.0
        assert q.maximizers.tolist() == [[-1.0]]

    def test_interval_mu_zero_momentum_degenerate(self, interval):
        q = interval.support_mu([0.0])
        assert q.mu == 0.0
        assert q.degenerate

    def test_ball_mu_radial(self, ball3):
        p = np.array([1.0, 2.0, 2.0])
        q = ball3.support_mu(p)
        assert q.mu == pytest.approx(3.0, abs=1e-14)
        np.testing.assert_allclose(q.maximizers[0], p / 3.0, atol=1e-14)

    def test_atomic_mu_and_ties(self, skewed_atoms):
        q = skewed_atoms.support_mu([2.0])
        assert q.mu == 2.0 and not q.degenerate
        sym = Atomic([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
                     [0.25] * 4)
        q = sym.support_mu([0.0, 0.0])
        assert q.degenerate

    def test_support_radius(self, interval, ball2, skewed_atoms):
        assert interval.support_radius() == 1.0
        assert ball2.support_radius() == 1.0
        assert UniformBall(2, 4.0).support_radius() == 4.0
        assert skewed_atoms.support_radius() == 1.0

    @given(st.floats(0.1, 20.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    def test_mu_positively_homogeneous(self, lam, px, py):
        m = UniformBall(2, 1.0)
        p = np.array([px, py])
        if not np.any(p):
            return
        mu1 = m.support_mu(p).mu
        mu2 = m.support_mu(lam * p).mu
        assert mu2 == pytest.approx(lam * mu1, rel=1e-12, abs=1e-12)

    def test_origin_must_be_interior(self):
        with pytest.raises(ValueError, match="origin"):
            UniformInterval(0.5, 2.0)
        with pytest.raises(ValueError, match="origin"):
            Atomic([[1.0]], [1.0])

    def test_interior_escape_hatch_for_simulation(self):
        m = Atomic([[1.0]], [1.0], require_interior=False)
        assert not m.origin_interior
        assert m.to_config()["require_interior"] is False


class TestSingularIntegral:

    def test_ball_closed_form(self):
        # uniform ball: the radial integral evaluates to n/((n-1) R s)
        for n in (2, 3, 4):
            m = UniformBall(n, 1.0)
            p = np.zeros(n)
            p[0] = 2.0
            expected = n / ((n - 1) * 1.0 * 2.0)
            assert m.singular_integral(p) == pytest.approx(expected,
                                                           abs=1e-10)

    def test_ball_radius_scaling(self):
        m = UniformBall(2, 4.0)
        p = np.array([3.0, 0.0])
        assert m.singular_integral(p) == pytest.approx(2.0 / (4.0 * 3.0),
                                                       abs=1e-10)

    def test_interval_diverges(self, interval):
        assert interval.singular_integral([1.0]) == math.inf

    def test_atomic_diverges(self, skewed_atoms):
        assert skewed_atoms.singular_integral([1.0]) == math.inf

    def test_zero_momentum_rejected(self, ball3):
        with pytest.raises(ZeroMomentum):
            ball3.singular_integral([0.0, 0.0, 0.0])

    @given(st.floats(0.5, 4.0), st.floats(0.25, 4.0))
    def test_homogeneity_in_radius_direction(self, s, rho):
        # I(rho p) = I(p) / rho for the 3-D ball
        m = UniformBall(3, 1.0)
        p = np.array([s, 0.0, 0.0])
        base = m.singular_integral(p)
        scaled = m.singular_integral(rho * p)
        assert scaled == pytest.approx(base / rho, rel=1e-9)


class TestResolvent:

    def test_interval_log_form(self, interval):
        assert interval.resolvent_integral([1.0], 0.5) == pytest.approx(
            LOG5_HALF, abs=1e-14)
        for p, h in [(0.3, 0.1), (2.0, 1.5), (-1.2, 0.7)]:
            assert interval.resolvent_integral([p], h) == pytest.approx(
                interval_resolvent(p, h), rel=1e-13)

    def test_ball3_antiderivative_value(self, ball3):
        got = ball3.resolvent_integral([1.0, 0.0, 0.0], 2.0)
        assert got == pytest.approx(BALL3_RESOLVENT_E1_H2, abs=1e-12)

    def test_atomic_direct_sum(self, skewed_atoms):
        got = skewed_atoms.resolvent_integral([0.8], 0.7)
        expected = 0.25 / (1.7 + 0.8) + 0.75 / (1.7 - 0.8)
        assert got == pytest.approx(expected, abs=1e-14)

    def test_moments_against_antiderivative(self, interval):
        # squared-denominator moments at p = 1, h = 0.5:
        # m0 = (1/2) [1/(c-v)] and m1 = (1/2) [c/(c-v) + ln(c-v)], c = 3/2
        m0 = interval.resolvent_moment([1.0], 0.5, 0)
        m1 = interval.resolvent_moment([1.0], 0.5, 1)
        assert m0 == pytest.approx(0.8, abs=1e-13)
        expected_m1 = 0.5 * (1.5 / 0.5 + math.log(0.5)
                             - (1.5 / 2.5 + math.log(2.5)))
        assert m1[0] == pytest.approx(expected_m1, rel=1e-12)

    def test_denominator_guard(self, interval, ball3):
        with pytest.raises(DenominatorNotPositive):
            interval.resolvent_integral([1.0], -0.5)
        with pytest.raises(DenominatorNotPositive):
            ball3.resolvent_integral([2.0, 0.0, 0.0], 0.5)

    @given(st.floats(0.2, 3.0), st.floats(0.05, 2.0), st.floats(0.05, 1.0))
    def test_resolvent_decreasing_in_h(self, p, h, dh):
        m = UniformInterval(-1.0, 1.0)
        assume(1.0 + h > p + 1e-6)
        hi_val = m.resolvent_integral([p], h + dh)
        lo_val = m.resolvent_integral([p], h)
        assert hi_val <= lo_val + 1e-12

    def test_tabulated_matches_ball(self, ball3, tabulated3):
        for p, h in [([0.7, 0.0, 0.0], 0.4), ([1.0, 1.0, 1.0], 2.0)]:
            a = ball3.resolvent_integral(p, h)
            b = tabulated3.resolvent_integral(p, h)
            assert b == pytest.approx(a, rel=1e-9)
        sa = ball3.singular_integral([2.0, 0.0, 0.0])
        sb = tabulated3.singular_integral([2.0, 0.0, 0.0])
        assert sb == pytest.approx(sa, rel=1e-9)


class TestQuadratureAndSampling:

    def test_interval_quadrature_is_probability(self, interval):
        nodes, w = interval.projected_quadrature()
        assert w.sum() == pytest.approx(1.0, abs=1e-13)
        assert nodes.min() > -1.0 and nodes.max() < 1.0
        assert (nodes * w).sum() == pytest.approx(0.0, abs=1e-13)

    def test_ball_projected_moments(self, ball3):
        # projection of the uniform ball onto one axis has variance R^2/(n+2)
        nodes, w = ball3.projected_quadrature()
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert (w * nodes ** 2).sum() == pytest.approx(1.0 / 5.0, abs=1e-10)

    def test_sampling_statistics(self, ball2, skewed_atoms):
        rng = np.random.default_rng(7)
        v = ball2.sample_velocities(rng, 4000)
        assert v.shape == (4000, 2)
        assert np.linalg.norm(v, axis=1).max() <= 1.0 + 1e-12
        assert abs(v.mean(axis=0)).max() < 0.05

        v = skewed_atoms.sample_velocities(rng, 8000)
        frac = (v[:, 0] > 0).mean()
        assert frac == pytest.approx(0.75, abs=0.02)

    def test_tabulated_sampling_radius(self, tabulated3):
        rng = np.random.default_rng(3)
        v = tabulated3.sample_velocities(rng, 1000)
        r = np.linalg.norm(v, axis=1)
        assert r.max() <= 1.0 + 1e-12


class TestConfig:

    def test_round_trip_fingerprint(self, interval, ball3, skewed_atoms,
                                    tabulated3):
        for m in (interval, ball3, skewed_atoms, tabulated3):
            again = measure_from_config(m.to_config())
            assert again.fingerprint() == m.fingerprint()

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError) as err:
            measure_from_config({"kind": "uniform_ball", "dimension": 2,
                                 "radius": 1.0, "colour": "red"})
        assert "colour" in str(err.value)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError, match="kind"):
            measure_from_config({"kind": "gaussian"})

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="dimension"):
            measure_from_config({"kind": "uniform_interval",
                                 "dimension": 2,
                                 "endpoints": [-1.0, 1.0]})

    def test_bad_weights_rejected(self):
        with pytest.raises(ConfigError):
            measure_from_config({
                "kind": "atomic",
                "atoms": [{"velocity": [-1.0], "weight": 0.5},
                          {"velocity": [1.0], "weight": 0.6}]})

    def test_fingerprints_distinguish_measures(self, interval, ball2):
        assert interval.fingerprint() != ball2.fingerprint()
        assert UniformBall(2, 1.0).fingerprint() == ball2.fingerprint()
