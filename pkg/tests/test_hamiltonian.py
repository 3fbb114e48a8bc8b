import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from vjump.errors import (DegenerateMaximizer, OutsideHull, ZeroMomentum)
from vjump.hamiltonian import (Regime, classify, eigenpair, grad_H, legendre,
                               rate_function, sing_boundary_radius, solve_H,
                               solve_H_many)
from vjump.measure import Atomic, UniformBall, UniformInterval

# frozen reference values, each produced by an independent high-precision
# oracle (mpmath bisection of the logarithmic root equation, or the closed
# forms named inline) before the solver below was written
INTERVAL_H_AT_1 = 0.313035285499331304
INTERVAL_DH_AT_1 = 0.588973624533020837
BALL3_H = {
    0.5: 0.0503696863205236,
    1.0: 0.206682372269217367,
    1.4: 0.424678263655366395,
    1.499: 0.499108280235837606,
}
INTERVAL_L_AT_HALF = 0.195314727915760939
INTERVAL_PSTAR_AT_HALF = 0.816153296358740283


def interval_H(p):
    # closed form for the symmetric unit interval: p coth p - 1
    return p / math.tanh(p) - 1.0 if p != 0.0 else 0.0


class TestSolve:

    def test_interval_frozen_point(self, interval):
        ev = solve_H(interval, [1.0])
        assert ev.regime is Regime.REGULAR
        assert ev.H == pytest.approx(INTERVAL_H_AT_1, abs=1e-12)
        assert ev.residual <= 1e-12

    def test_interval_closed_form_curve(self, interval):
        ps = np.linspace(1e-3, 5.0, 23)
        H, singular, _, _ = solve_H_many(interval, ps[:, None])
        expected = np.array([interval_H(p) for p in ps])
        np.testing.assert_allclose(H, expected, atol=1e-11)
        assert not singular.any()

    def test_asymmetric_interval(self):
        # mu(p) = max(ap, bp); root of the same log equation, checked by an
        # in-test bisection of the closed-form resolvent
        a, b = -0.5, 2.0
        m = UniformInterval(a, b)
        p = 1.3

        def F(h):
            return math.log((1 + h - a * p) / (1 + h - b * p)) \
                / ((b - a) * p)
        lo, hi = b * p - 1 + 1e-13, b * p + 10.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if F(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        ev = solve_H(m, [p])
        assert ev.H == pytest.approx(0.5 * (lo + hi), abs=1e-10)

    def test_ball2_parabola_then_cone(self, ball2):
        for s in (0.25, 0.8, 1.5, 1.999):
            ev = solve_H(ball2, [s, 0.0])
            assert ev.regime is Regime.REGULAR
            assert ev.H == pytest.approx(s * s / 4.0, abs=1e-11)
        for s in (2.0, 2.5, 4.0):
            ev = solve_H(ball2, [0.0, s])
            assert ev.regime is Regime.SINGULAR
            assert ev.H == s - 1.0

    def test_ball3_frozen_points(self, ball3):
        for s, expected in BALL3_H.items():
            ev = solve_H(ball3, [s, 0.0, 0.0])
            assert ev.H == pytest.approx(expected, abs=1e-12), s
            assert ev.regime is Regime.REGULAR
        ev = solve_H(ball3, [1.5, 0.0, 0.0])
        assert ev.regime is Regime.SINGULAR
        assert ev.H == 0.5

    def test_atomic_quadratic_closed_form(self, skewed_atoms):
        # two atoms at -1, +1 with weights 1/4, 3/4: clearing denominators
        # in the resolvent equation gives 1 + H = (1 + sqrt(1 + 4 (p^2
        # + p/2))) / 2
        p = 0.8
        expected = (1.0 + math.sqrt(1.0 + 4.0 * (p * p + 0.5 * p))) / 2.0 - 1.0
        ev = solve_H(skewed_atoms, [p])
        assert ev.H == pytest.approx(expected, abs=1e-12)

    def test_H_vanishes_at_origin(self, interval, ball3, skewed_atoms):
        for m in (interval, ball3, skewed_atoms):
            p = np.zeros(m.dimension)
            ev = solve_H(m, p)
            assert abs(ev.H) <= 1e-12
            assert ev.regime is Regime.REGULAR

    def test_rotation_invariance(self, ball3):
        s = 1.2
        base = solve_H(ball3, [s, 0.0, 0.0]).H
        for u in ([0.0, s, 0.0], [s / math.sqrt(2), 0.0, s / math.sqrt(2)],
                  [s / math.sqrt(3)] * 3):
            assert solve_H(ball3, u).H == pytest.approx(base, abs=1e-11)

    @given(st.floats(0.05, 4.5), st.floats(0.05, 4.5))
    def test_midpoint_convexity_interval(self, p, q):
        m = UniformInterval(-1.0, 1.0)
        batch = np.array([[p], [q], [0.5 * (p + q)]])
        H, _, _, _ = solve_H_many(m, batch, with_grad=False)
        assert H[2] <= 0.5 * (H[0] + H[1]) + 1e-9

    @given(st.floats(-3.0, 3.0), st.floats(-3.0, 3.0),
           st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
    def test_midpoint_convexity_ball2(self, px, py, qx, qy):
        m = UniformBall(2, 1.0)
        batch = np.array([[px, py], [qx, qy],
                          [0.5 * (px + qx), 0.5 * (py + qy)]])
        H, _, _, _ = solve_H_many(m, batch, with_grad=False)
        assert H[2] <= 0.5 * (H[0] + H[1]) + 1e-9

    def test_above_support_asymptote(self, interval, ball3):
        # H >= mu - 1 everywhere, touching it exactly on the singular set
        for m, rows in ((interval, [[0.3], [2.0], [-4.0]]),
                        (ball3, [[1.0, 0, 0], [2.0, 0, 0], [0, 0, 3.0]])):
            for row in rows:
                ev = solve_H(m, row)
                mu = m.support_mu(np.asarray(row, dtype=float)).mu
                assert ev.H >= mu - 1.0 - 1e-12


class TestRegimeAndGrad:

    def test_classify_matches_solver(self, ball3):
        assert classify(ball3, [1.4, 0, 0]) is Regime.REGULAR
        assert classify(ball3, [1.5, 0, 0]) is Regime.SINGULAR
        assert classify(ball3, [3.0, 0, 0]) is Regime.SINGULAR
        assert classify(ball3, [0.0, 0, 0]) is Regime.REGULAR

    def test_grad_matches_finite_differences(self, interval, ball3):
        for m, p in ((interval, [0.9]), (ball3, [0.8, 0.4, 0.1])):
            p = np.asarray(p, dtype=float)
            g = grad_H(m, p)
            h = 1e-6
            for i in range(p.size):
                e = np.zeros_like(p)
                e[i] = h
                fd = (solve_H(m, p + e).H - solve_H(m, p - e).H) / (2 * h)
                assert g[i] == pytest.approx(fd, abs=5e-7)

    def test_interval_grad_frozen(self, interval):
        g = grad_H(interval, [1.0])
        assert g[0] == pytest.approx(INTERVAL_DH_AT_1, abs=1e-11)

    def test_singular_grad_is_maximizer(self, ball3):
        g = grad_H(ball3, [0.0, 2.0, 0.0])
        np.testing.assert_allclose(g, [0.0, 1.0, 0.0], atol=1e-14)

    def test_grad_at_origin_is_mean(self, skewed_atoms):
        g = grad_H(skewed_atoms, [0.0])
        assert g[0] == pytest.approx(0.5, abs=1e-10)


class TestEigen:

    def test_regular_scale_normalizes(self, ball3):
        p = np.array([1.0, 0.0, 0.0])
        ep = eigenpair(ball3, p)
        assert ep.regime is Regime.REGULAR
        assert ep.atom_weight == 0.0 and ep.atom_location is None
        # c / F(H) integrates the density to one and F(H) = 1 at the root
        assert ep.density_scale == pytest.approx(1.0, abs=1e-10)
        total = ep.density_scale * ball3.resolvent_integral(p, ep.H)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_singular_atom_weight(self, ball3):
        ep = eigenpair(ball3, [3.0, 0.0, 0.0])
        assert ep.regime is Regime.SINGULAR
        assert ep.atom_weight == pytest.approx(0.5, abs=1e-10)
        np.testing.assert_allclose(ep.atom_location, [1.0, 0.0, 0.0],
                                   atol=1e-12)
        # continuum mass + atom = 1
        cont = ball3.singular_integral([3.0, 0.0, 0.0])
        assert cont + ep.atom_weight == pytest.approx(1.0, abs=1e-10)

    def test_boundary_has_no_atom(self, ball3):
        ep = eigenpair(ball3, [1.5, 0.0, 0.0])
        assert ep.regime is Regime.SINGULAR
        assert ep.atom_weight == pytest.approx(0.0, abs=1e-10)
        assert ep.atom_location is None

    def test_density_callable(self, ball3):
        ep = eigenpair(ball3, [3.0, 0.0, 0.0])
        # 1 + H = mu on the singular set, so the density at the maximizer
        # direction blows up towards the atom; check a regular sample point
        val = ep.density(np.array([0.0, 0.5, 0.0]))
        assert val == pytest.approx(1.0 / (1.0 + 2.0), abs=1e-12)

    def test_zero_momentum_raises(self, ball3):
        with pytest.raises(ZeroMomentum):
            eigenpair(ball3, [0.0, 0.0, 0.0])

    def test_tie_break_is_lexicographic(self):
        m = Atomic([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
                   [0.25] * 4)
        sq = m.support_mu(np.array([1.0, 1.0]))
        assert sq.degenerate
        np.testing.assert_allclose(sq.maximizers[0], [0.0, 1.0])


class TestSingBoundary:

    def test_ball_family(self):
        for n in (2, 3, 4):
            m = UniformBall(n, 1.0)
            u = np.zeros(n)
            u[-1] = 1.0
            expected = n / (n - 1.0)
            assert sing_boundary_radius(m, u) == pytest.approx(expected,
                                                               abs=1e-8)

    def test_radius_scaling(self):
        m = UniformBall(2, 4.0)
        assert sing_boundary_radius(m, [1.0, 0.0]) == pytest.approx(
            0.5, abs=1e-8)

    def test_interval_never_singular(self, interval):
        assert sing_boundary_radius(interval, [1.0]) == math.inf

    def test_direction_normalization(self, ball3):
        a = sing_boundary_radius(ball3, [1.0, 0.0, 0.0])
        b = sing_boundary_radius(ball3, [17.0, 0.0, 0.0])
        assert a == pytest.approx(b, abs=1e-9)

    def test_zero_direction_rejected(self, ball3):
        with pytest.raises(ZeroMomentum):
            sing_boundary_radius(ball3, [0.0, 0.0, 0.0])


class TestLegendre:

    def test_interval_frozen_point(self, interval):
        le = legendre(interval, [0.5])
        assert le.L == pytest.approx(INTERVAL_L_AT_HALF, abs=1e-9)
        assert le.argmax_p[0] == pytest.approx(INTERVAL_PSTAR_AT_HALF,
                                               abs=1e-6)
        assert not le.boundary

    def test_zero_velocity_zero_rate(self, interval, ball2):
        for m in (interval, ball2):
            le = legendre(m, np.zeros(m.dimension))
            assert le.L == pytest.approx(0.0, abs=1e-12)

    def test_ball2_quadratic_rate(self, ball2):
        # H = |p|^2/4 on the regular range, so L(v) = |v|^2 inside
        for v in ([0.3, 0.0], [0.0, -0.7], [0.5, 0.5]):
            le = legendre(ball2, v)
            expected = float(np.dot(v, v))
            assert le.L == pytest.approx(expected, abs=1e-9)

    def test_boundary_velocity(self, interval):
        le = legendre(interval, [1.0])
        assert le.boundary
        assert le.L == pytest.approx(1.0, abs=1e-9)

    def test_outside_hull_raises(self, interval, ball2):
        with pytest.raises(OutsideHull):
            legendre(interval, [1.5])
        with pytest.raises(OutsideHull):
            legendre(ball2, [1.2, 0.3])

    @given(st.floats(-0.95, 0.95), st.floats(-4.0, 4.0))
    def test_fenchel_young(self, v, p):
        m = UniformInterval(-1.0, 1.0)
        L = legendre(m, [v]).L
        H = solve_H(m, [p]).H
        assert v * p <= L + H + 1e-8

    def test_rate_zero_at_mean_velocity(self, interval, ball2, skewed_atoms):
        for m in (interval, ball2, skewed_atoms):
            le = legendre(m, m.mean_velocity())
            assert le.L == pytest.approx(0.0, abs=1e-9)


class TestRateFunction:

    def test_lattice_matches_direct(self, interval):
        rf = rate_function(interval)
        for v in (-0.6, 0.0, 0.25, 0.5, 0.85):
            direct = legendre(interval, [v]).L
            assert float(rf(v)) == pytest.approx(direct, abs=5e-7)

    def test_outside_lattice_is_inf(self, interval):
        rf = rate_function(interval)
        assert rf(1.5) == math.inf
        assert rf(-1.01) == math.inf

    def test_cache_returns_same_object(self, ball2):
        assert rate_function(ball2) is rate_function(UniformBall(2, 1.0))

    def test_rotational_lattice(self, ball2):
        rf = rate_function(ball2)
        # radial lattice: L(|v|) with the quadratic profile
        assert float(rf(0.5)) == pytest.approx(0.25, abs=1e-6)

    def test_unsupported_kind_pointwise_still_works(self):
        m = Atomic([[0.6, 0.0], [-0.6, 0.0], [0.0, 0.6], [0.0, -0.6]],
                   [0.25] * 4)
        with pytest.raises(NotImplementedError):
            rate_function(m)
        le = legendre(m, [0.1, 0.1])
        assert le.L >= 0.0
