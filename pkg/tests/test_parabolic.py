import numpy as np
import pytest

from sigflow import (
    ForceLaw,
    MovingDomain,
    ParabolicBoundary,
    rescale_to_unit,
    solve_parabolic,
    step_viscous,
)
from sigflow.parabolic import _trapezoid_mass, node_grid, node_state, unit_to_physical


def fixed_domain(n=40, left=0.0, right=100.0):
    return MovingDomain(left=left, right_of_t=right, n_cells=n)


def const_boundary(v, rho, right_v="extrapolate"):
    return ParabolicBoundary(
        left_v=lambda t: v, left_rho=lambda t: rho, right_v=right_v
    )


class TestGeometry:
    def test_rescale_identity_on_uniform(self):
        x = np.linspace(0.0, 100.0, 21)
        y, vals = rescale_to_unit(x, np.full(21, 3.0), 0.0, 100.0, 21)
        np.testing.assert_allclose(vals, 3.0)
        assert y[0] == 0.0 and y[-1] == 1.0

    def test_rescale_linear_profile(self):
        x = np.linspace(0.0, 100.0, 201)
        vals = 2.0 + 0.05 * x
        y, out = rescale_to_unit(x, vals, 0.0, 100.0, 11)
        np.testing.assert_allclose(out, 2.0 + 5.0 * y)

    def test_unit_round_trip(self):
        y = np.linspace(0.0, 1.0, 9)
        np.testing.assert_allclose(unit_to_physical(y, 10.0, 50.0), 10.0 + 40.0 * y)

    def test_rejects_degenerate_interval(self):
        with pytest.raises(ValueError):
            rescale_to_unit(np.arange(4.0), np.arange(4.0), 5.0, 5.0, 4)

    def test_node_grid_centers_are_nodes(self):
        g = node_grid(0.0, 100.0, 20)
        np.testing.assert_allclose(g.centers, np.linspace(0.0, 100.0, 21))

    def test_moving_domain_nodes(self):
        dom = MovingDomain(left=0.0, right_of_t=lambda t: 100.0 + 10.0 * t, n_cells=10)
        np.testing.assert_allclose(dom.nodes(2.0), np.linspace(0.0, 120.0, 11))

    def test_right_must_exceed_left(self):
        dom = MovingDomain(left=50.0, right_of_t=lambda t: 50.0 - t, n_cells=10)
        with pytest.raises(ValueError):
            dom.right(1.0)


class TestStepViscous:
    def test_uniform_state_is_fixed_point(self):
        dom = fixed_domain()
        n = dom.n_cells
        v = np.full(n + 1, 8.0)
        rho = np.full(n + 1, 0.1)
        bc = const_boundary(8.0, 0.1, right_v=lambda t: 8.0)
        v1, rho1, rep = step_viscous(v, rho, 0.0, 1e-3, 2.0, bc, dom, None)
        np.testing.assert_allclose(v1, 8.0, rtol=0, atol=1e-13)
        np.testing.assert_allclose(rho1, 0.1, rtol=0, atol=1e-15)
        assert rep.clamped == 0.0

    def test_dirichlet_values_imposed_exactly(self):
        dom = fixed_domain()
        n = dom.n_cells
        rng = np.random.default_rng(7)
        v = 5.0 + rng.uniform(-1.0, 1.0, n + 1)
        rho = np.full(n + 1, 0.1)
        bc = const_boundary(4.25, 0.09, right_v=lambda t: 6.5)
        v1, rho1, _ = step_viscous(v, rho, 0.0, 1e-3, 2.0, bc, dom, None)
        assert v1[0] == 4.25
        assert v1[-1] == 6.5
        assert rho1[0] == 0.09

    def test_zero_gradient_right_closure(self):
        dom = fixed_domain()
        n = dom.n_cells
        v = np.linspace(4.0, 9.0, n + 1)
        rho = np.full(n + 1, 0.1)
        bc = const_boundary(4.0, 0.1)
        v1, _, _ = step_viscous(v, rho, 0.0, 1e-3, 2.0, bc, dom, None)
        assert v1[-1] == pytest.approx(v1[-2], rel=1e-13)

    def test_density_update_matches_donor_cell_formula(self):
        # independent re-derivation of one conservative upwind step on the
        # interior nodes, fixed domain
        dom = fixed_domain(n=10, right=10.0)
        n, dt = dom.n_cells, 1e-3
        dy = 1.0 / n
        rng = np.random.default_rng(3)
        v = 6.0 + rng.uniform(-0.5, 0.5, n + 1)
        rho = 0.1 + rng.uniform(0.0, 0.05, n + 1)
        bc = const_boundary(float(v[0]), float(rho[0]), right_v=lambda t: float(v[-1]))
        v1, rho1, _ = step_viscous(v, rho, 0.0, dt, 2.0, bc, dom, None)

        L = 10.0
        w = 0.5 * (v1[:-1] + v1[1:])  # face speeds; the mesh is at rest
        up = np.where(w > 0, rho[:-1], rho[1:])
        flux = up * w
        expect = rho[1:-1] - (dt / (dy * L)) * np.diff(flux)
        np.testing.assert_allclose(rho1[1:-1], expect, rtol=0, atol=1e-15)

    def test_moving_mesh_preserves_uniform_density(self):
        dom = MovingDomain(left=0.0, right_of_t=lambda t: 100.0 + 20.0 * t, n_cells=40)
        n = dom.n_cells
        v = np.zeros(n + 1)
        rho = np.full(n + 1, 0.1)
        bc = const_boundary(0.0, 0.1, right_v=lambda t: 0.0)
        for k in range(200):
            v, rho, _ = step_viscous(v, rho, k * 1e-3, 1e-3, 2.0, bc, dom, None)
        np.testing.assert_allclose(rho, 0.1, rtol=0, atol=1e-13)
        np.testing.assert_array_equal(v, 0.0)

    def test_rejects_advective_cfl_violation(self):
        dom = fixed_domain(n=40, right=10.0)  # dy L = 0.25
        n = dom.n_cells
        v = np.full(n + 1, 10.0)
        rho = np.full(n + 1, 0.1)
        bc = const_boundary(10.0, 0.1)
        with pytest.raises(RuntimeError):
            step_viscous(v, rho, 0.0, 0.1, 2.0, bc, dom, None)

    def test_rejects_non_positive_dt(self):
        dom = fixed_domain()
        n = dom.n_cells
        with pytest.raises(ValueError):
            step_viscous(
                np.zeros(n + 1), np.full(n + 1, 0.1), 0.0, 0.0, 2.0,
                const_boundary(0.0, 0.1), dom, None,
            )


class TestSolveParabolic:
    def test_stopped_traffic_stays_stopped(self):
        dom = fixed_domain(n=30)
        n = dom.n_cells
        rho = 0.1 + 0.04 * np.sin(np.linspace(0.0, np.pi, n + 1))
        v = np.zeros(n + 1)
        bc = const_boundary(0.0, float(rho[0]), right_v=lambda t: 0.0)
        res = solve_parabolic(rho, v, dom, bc, 2.0, None, 0.0, 3.0, 1e-3,
                              snapshot_interval=1.0)
        np.testing.assert_array_equal(res.final.v, 0.0)
        np.testing.assert_allclose(res.final.rho, rho, rtol=0, atol=1e-14)

    def test_uniform_acceleration_under_force(self):
        dom = fixed_domain(n=30)
        n = dom.n_cells
        rho = np.full(n + 1, 0.1)
        v = np.full(n + 1, 5.0)
        ramp = lambda t: 5.0 + 1.5 * t
        bc = ParabolicBoundary(left_v=ramp, left_rho=lambda t: 0.1, right_v=ramp)
        res = solve_parabolic(rho, v, dom, bc, 2.0, ForceLaw(1.5, 16.0, 4.0),
                              0.0, 2.0, 1e-3)
        np.testing.assert_allclose(res.final.v, 8.0, rtol=0, atol=1e-10)

    def test_mass_ledger_closes(self):
        dom = MovingDomain(left=0.0, right_of_t=lambda t: 100.0 + 15.0 * t, n_cells=30)
        n = dom.n_cells
        rng = np.random.default_rng(11)
        rho = 0.1 + rng.uniform(0.0, 0.05, n + 1)
        v = 8.0 + rng.uniform(-1.0, 1.0, n + 1)
        bc = ParabolicBoundary(
            left_v=lambda t: float(v[0]), left_rho=lambda t: float(rho[0])
        )
        res = solve_parabolic(rho, v, dom, bc, 2.0, None, 0.0, 2.0, 1e-3,
                              snapshot_interval=0.5)
        m0 = res.ledger[0]["total_mass"]
        m1 = res.ledger[-1]["total_mass"]
        residual = (m1 - m0) - (res.influx - res.outflux + res.clamped)
        assert abs(residual) < 1e-11 * max(m0, 1.0)

    def test_compatibility_residual_reported(self):
        dom = fixed_domain(n=20)
        n = dom.n_cells
        rho = np.full(n + 1, 0.1)
        v = np.full(n + 1, 7.0)
        bc = const_boundary(7.0, 0.1, right_v=lambda t: 6.25)
        res = solve_parabolic(rho, v, dom, bc, 2.0, None, 0.0, 0.1, 1e-3)
        assert res.metadata["compatibility_residual"] == pytest.approx(0.75)

    def test_snapshots_carry_boundary_nodes(self):
        dom = MovingDomain(left=0.0, right_of_t=lambda t: 100.0 + 10.0 * t, n_cells=20)
        n = dom.n_cells
        rho = np.full(n + 1, 0.1)
        v = np.zeros(n + 1)
        bc = const_boundary(0.0, 0.1, right_v=lambda t: 0.0)
        res = solve_parabolic(rho, v, dom, bc, 2.0, None, 0.0, 2.0, 1e-3,
                              snapshot_interval=1.0)
        assert [s.t for s in res.snapshots] == [0.0, 1.0, 2.0]
        for snap in res.snapshots:
            np.testing.assert_allclose(snap.grid.centers[0], 0.0, atol=1e-12)
            np.testing.assert_allclose(
                snap.grid.centers[-1], dom.right(snap.t), atol=1e-12
            )

    def test_rejects_wrong_field_length(self):
        dom = fixed_domain(n=20)
        with pytest.raises(ValueError):
            solve_parabolic(np.full(20, 0.1), np.zeros(20), dom,
                            const_boundary(0.0, 0.1), 2.0, None, 0.0, 1.0, 1e-3)


class TestTrapezoidMass:
    def test_matches_node_state_cell_sum(self):
        dom = fixed_domain(n=16)
        n = dom.n_cells
        rng = np.random.default_rng(5)
        rho = 0.1 + rng.uniform(0.0, 0.1, n + 1)
        mass = _trapezoid_mass(rho, 100.0, 1.0 / n)
        # the node snapshot weights the end nodes fully; correct for that
        snap = node_state(dom, 0.0, rho, np.zeros(n + 1))
        s = snap.grid.dx
        assert snap.total_mass - 0.5 * s * (rho[0] + rho[-1]) == pytest.approx(mass)
