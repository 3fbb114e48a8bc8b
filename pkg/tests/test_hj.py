import numpy as np
import pytest
from hypothesis import given, strategies as st

from vjump.errors import BoundViolation, CflViolation
from vjump.hamiltonian import legendre, solve_H
from vjump.hj import (GridSpec, GridField, hopf_lax, hopf_lax_field,
                      lax_friedrichs_solve)
from vjump.measure import Atomic, UniformInterval


def cone(x):
    return np.minimum(np.abs(x), 1.0)


def cone_wrapped(x, width=4.0):
    d = np.abs(np.asarray(x, dtype=float)) % width
    return np.minimum(np.minimum(d, width - d), 1.0)


class TestGridSpec:

    def test_periodic_axis_excludes_endpoint(self):
        g = GridSpec([-2.0], [2.0], [8], "periodic")
        ax = g.axes()[0]
        assert ax[0] == -2.0 and ax[-1] < 2.0
        assert ax.size == 8
        assert g.spacing()[0] == pytest.approx(0.5)

    def test_extrapolate_axis_includes_endpoint(self):
        g = GridSpec([0.0], [1.0], [5], "extrapolate")
        ax = g.axes()[0]
        assert ax[0] == 0.0 and ax[-1] == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec([0.0], [1.0], [3])
        with pytest.raises(ValueError):
            GridSpec([1.0], [0.0], [8])
        with pytest.raises(ValueError):
            GridSpec([0.0], [1.0], [8], "reflect")
        with pytest.raises(ValueError):
            GridSpec([0.0, 0.0], [1.0], [8])

    def test_2d_meshes(self):
        g = GridSpec([0.0, 0.0], [1.0, 2.0], [4, 6], "extrapolate")
        X, Y = g.meshes()
        assert X.shape == (4, 6)
        assert Y[0, -1] == 2.0


class TestHopfLax:

    def test_time_zero_identity(self, interval):
        for x in (-1.5, 0.0, 0.3, 2.0):
            assert hopf_lax(interval, cone, 0.0, x) == cone(x)

    def test_vertex_stays_pinned(self, interval):
        # the minimum over velocities includes v = 0 with zero rate, so the
        # cone vertex cannot rise
        assert hopf_lax(interval, cone, 0.5, 0.0) == pytest.approx(0.0,
                                                                   abs=1e-12)

    def test_plane_wave_closed_form(self, interval):
        # affine data propagates as x p - t H(p)
        p = 0.6
        H = solve_H(interval, [p]).H
        for x in (-0.8, 0.0, 0.7):
            got = hopf_lax(interval, lambda y: p * y, 0.4, x)
            assert got == pytest.approx(p * x - 0.4 * H, abs=1e-7)

    def test_cone_inside_fan(self, interval):
        # within the spreading fan the solution is t L(x / t)
        t, x = 0.5, 0.05
        got = hopf_lax(interval, cone, t, x)
        assert got == pytest.approx(t * legendre(interval, [x / t]).L,
                                    abs=5e-7)
        assert got == pytest.approx(0.0037556468, abs=1e-7)

    def test_cone_outside_fan(self, interval):
        # far from the vertex the slope-1 branch dominates: |x| - t H(1)
        t, x = 0.5, 0.9
        H1 = solve_H(interval, [1.0]).H
        assert hopf_lax(interval, cone, t, x) == pytest.approx(
            x - t * H1, abs=1e-7)
        assert hopf_lax(interval, cone, t, -x) == pytest.approx(
            x - t * H1, abs=1e-7)

    def test_field_snapshots(self, interval):
        grid = GridSpec([-2.0], [2.0], [64], "periodic")
        fld = hopf_lax_field(interval, cone_wrapped, [0.0, 0.25, 0.5], grid)
        assert fld.values.shape == (3, 64)
        np.testing.assert_array_equal(fld.values[0],
                                      cone_wrapped(grid.axes()[0]))
        assert fld.values[2].max() <= fld.values[0].max() + 1e-12
        assert fld.meta["scheme"] == "hopf_lax"
        fld.check_invariants()

    def test_field_matches_pointwise(self, interval):
        grid = GridSpec([-2.0], [2.0], [16], "periodic")
        fld = hopf_lax_field(interval, cone_wrapped, [0.3], grid)
        x = grid.axes()[0]
        for j in (0, 5, 11):
            assert fld.values[0, j] == pytest.approx(
                hopf_lax(interval, cone_wrapped, 0.3, x[j]), abs=1e-12)

    def test_2d_rotational(self, ball2):
        grid = GridSpec([-2.0, -2.0], [2.0, 2.0], [32, 32], "extrapolate")

        def cone2(x, y):
            return np.minimum(np.sqrt(x * x + y * y), 1.0)

        fld = hopf_lax_field(ball2, cone2, [0.0, 0.3], grid)
        assert fld.values.shape == (2, 32, 32)
        assert fld.values[1].min() >= -1e-12
        assert fld.values[1].max() <= 1.0 + 1e-12
        # strict decay where the initial profile was positive
        X, Y = grid.meshes()
        inside = (np.sqrt(X ** 2 + Y ** 2) > 0.2) \
            & (np.sqrt(X ** 2 + Y ** 2) < 0.9)
        assert (fld.values[1][inside] < fld.values[0][inside]).all()

    @given(st.floats(0.05, 0.5), st.floats(-1.5, 1.5))
    def test_never_exceeds_initial_sup(self, t, x):
        m = UniformInterval(-1.0, 1.0)
        assert hopf_lax(m, cone, t, x) <= 1.0 + 1e-12


class TestLaxFriedrichs:

    def test_plane_wave_exact_on_open_grid(self, interval):
        p = 0.5
        H = solve_H(interval, [p]).H
        grid = GridSpec([-2.0], [2.0], [201], "extrapolate")
        fld = lax_friedrichs_solve(interval, lambda y: p * y, 0.3, grid,
                                   output_times=[0.3])
        x = grid.axes()[0]
        np.testing.assert_allclose(fld.values[-1], p * x - 0.3 * H,
                                   atol=1e-9)

    def test_cone_matches_hopf_lax(self, interval):
        grid = GridSpec([-2.0], [2.0], [400], "periodic")
        fld = lax_friedrichs_solve(interval, cone_wrapped, 0.5, grid,
                                   output_times=[0.5])
        ref = hopf_lax_field(interval, cone_wrapped, fld.times, grid)
        err = np.abs(fld.values[-1] - ref.values[-1]).max()
        assert err < 0.04

    def test_discrete_monotonicity(self, interval):
        # comparison principle holds exactly for the monotone scheme
        grid = GridSpec([-2.0], [2.0], [64], "periodic")
        below = lax_friedrichs_solve(interval, cone_wrapped, 0.2, grid,
                                     output_times=[0.2])
        above = lax_friedrichs_solve(
            interval, lambda y: cone_wrapped(y) + 0.05, 0.2, grid,
            output_times=[0.2])
        gap = above.values[-1] - below.values[-1]
        assert gap.min() >= -1e-10
        assert gap.max() == pytest.approx(0.05, abs=1e-10)

    def test_cfl_guard(self, interval):
        grid = GridSpec([-2.0], [2.0], [64], "periodic")
        with pytest.raises(CflViolation):
            lax_friedrichs_solve(interval, cone_wrapped, 0.5, grid, dt=1.0)
        with pytest.raises(CflViolation):
            lax_friedrichs_solve(interval, cone_wrapped, 0.5, grid, cfl=1.5)

    def test_output_times_snap_to_steps(self, interval):
        grid = GridSpec([-2.0], [2.0], [64], "periodic")
        fld = lax_friedrichs_solve(interval, cone_wrapped, 0.5, grid,
                                   output_times=[0.0, 0.21, 0.5])
        dt = fld.meta["dt"]
        for t in fld.times:
            assert t / dt == pytest.approx(round(t / dt), abs=1e-9)
        assert fld.times[0] == 0.0
        assert fld.times[-1] == pytest.approx(0.5, abs=1e-12)
        assert fld.meta["steps"] * dt == pytest.approx(0.5, abs=1e-12)

    def test_2d_radial_cone(self, ball2):
        grid = GridSpec([-2.0, -2.0], [2.0, 2.0], [64, 64], "periodic")

        def data(x, y):
            dx = np.minimum(np.abs(x) % 4.0, 4.0 - np.abs(x) % 4.0)
            dy = np.minimum(np.abs(y) % 4.0, 4.0 - np.abs(y) % 4.0)
            return np.minimum(np.sqrt(dx * dx + dy * dy), 1.0)

        fld = lax_friedrichs_solve(ball2, data, 0.3, grid,
                                   output_times=[0.3])
        ref = hopf_lax_field(ball2, data, fld.times, grid)
        err = np.abs(fld.values[-1] - ref.values[-1])
        # the cone vertex smears at first order; away from it the two
        # fields agree much more tightly
        assert err.max() < 0.25
        X, Y = grid.meshes()
        away = np.sqrt(X ** 2 + Y ** 2) > 0.5
        assert err[away].max() < 0.12

    def test_direct_table_mode(self):
        # anisotropic atoms have no 1-D or radial shortcut, driving the
        # direct Hamiltonian lookup path
        m = Atomic([[0.8, 0.0], [-0.8, 0.0], [0.0, 0.5], [0.0, -0.5]],
                   [0.25] * 4)
        grid = GridSpec([-1.0, -1.0], [1.0, 1.0], [16, 16], "periodic")

        def data(x, y):
            return 0.1 * np.cos(np.pi * x) * np.cos(np.pi * y) + 0.1

        fld = lax_friedrichs_solve(m, data, 0.05, grid,
                                   output_times=[0.05])
        assert fld.meta["h_table"] == "direct"
        assert np.isfinite(fld.values).all()
        fld.check_invariants()


class TestInvariants:

    def test_range_violation_detected(self, interval):
        grid = GridSpec([-2.0], [2.0], [32], "periodic")
        fld = hopf_lax_field(interval, cone_wrapped, [0.0, 0.2], grid)
        bad = GridField(times=fld.times, axes=fld.axes,
                        values=fld.values.copy(), bc="periodic",
                        lip0=fld.lip0)
        bad.values[1, 3] = 2.5
        with pytest.raises(BoundViolation):
            bad.check_invariants()

    def test_lipschitz_violation_detected(self, interval):
        grid = GridSpec([-2.0], [2.0], [32], "periodic")
        fld = hopf_lax_field(interval, cone_wrapped, [0.0, 0.2], grid)
        bad = GridField(times=fld.times, axes=fld.axes,
                        values=fld.values.copy(), bc="periodic",
                        lip0=fld.lip0 * 0.2)
        with pytest.raises(BoundViolation):
            bad.check_invariants()

    def test_open_grid_range_reported_not_enforced(self, interval):
        # a plane wave legitimately drifts below its initial minimum
        p = 0.5
        grid = GridSpec([-2.0], [2.0], [64], "extrapolate")
        fld = lax_friedrichs_solve(interval, lambda y: p * y, 0.4, grid,
                                   output_times=[0.0, 0.4])
        report = fld.check_invariants()
        assert report["range"][0] < report["initial_range"][0]
        assert report["lipschitz"] <= report["lipschitz_bound"]
