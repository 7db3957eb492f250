import math

import numpy as np
import pytest

from solitonlab.integrate import (
    HORIZON_REACHED,
    INVARIANT_VIOLATED,
    ORIGIN_REACHED,
    STEP_FAILURE,
    IntegrationControls,
    Violation,
    integrate,
    monitor_bounds,
)
from solitonlab.model import quantities, validate_config, vector_field


def logistic_field(s, y):
    return 2.0 * y * (y - 1.0)


class TestOracles:
    def test_logistic_closed_form(self):
        # J' = 2J(J-1), J(0) = 1/2 has J(s) = 1/(1 + e^{2s}).
        ctl = IntegrationControls(rtol=1e-9, atol=1e-12, s_max=1.0, record_every=0.25)
        traj = integrate(logistic_field, np.array([0.5]), ctl)
        exact = 1.0 / (1.0 + math.e**2)
        assert exact == pytest.approx(0.1192029, abs=1e-7)
        assert abs(traj.states[-1, 0] - exact) <= 1e-8
        # interpolated interior samples hold to the same bound
        for s, y in zip(traj.s, traj.states[:, 0]):
            assert abs(y - 1.0 / (1.0 + math.exp(2 * s))) <= 1e-8

    @pytest.mark.parametrize("w0, eps", [(1.0, 1.0), (0.5, 2.0)])
    def test_separable_cubic_decay(self, w0, eps):
        # W' = -(eps/2) W^3 has W(s) = W0 / sqrt(1 + eps W0^2 s).
        ctl = IntegrationControls(rtol=1e-9, atol=1e-12, s_max=3.0, record_every=0.5)
        traj = integrate(lambda s, y: -0.5 * eps * y**3, np.array([w0]), ctl)
        for s, w in zip(traj.s, traj.states[:, 0]):
            assert abs(w - w0 / math.sqrt(1.0 + eps * w0**2 * s)) <= 1e-8

    def test_zero_field(self):
        ctl = IntegrationControls(s_max=5.0, record_every=1.0)
        traj = integrate(lambda s, y: np.zeros_like(y), np.array([1.0, -2.0]), ctl)
        assert traj.stats.rejected == 0
        assert np.all(traj.states == np.array([1.0, -2.0]))
        assert traj.termination.kind == HORIZON_REACHED


class TestStepControl:
    def test_tolerance_proportionality(self):
        ctl = IntegrationControls(rtol=1e-8, atol=1e-11, s_max=1.0, record_every=0.5)
        coarse = integrate(logistic_field, np.array([0.5]), ctl)
        fine = integrate(
            logistic_field,
            np.array([0.5]),
            IntegrationControls(rtol=5e-9, atol=5e-12, s_max=1.0, record_every=0.5),
        )
        diff = abs(coarse.states[-1, 0] - fine.states[-1, 0])
        assert diff < 10.0 * coarse.stats.error_accum

    def test_time_reversal(self, cfg_r1):
        # short arc of the phase flow, forward then backward
        z0 = np.array([0.2, 0.5, 0.55])
        ctl = IntegrationControls(s_max=5.0, record_every=1.0)
        fwd = integrate(lambda s, y: vector_field(y, cfg_r1), z0, ctl)
        z1 = fwd.states[-1]
        back = integrate(lambda s, y: -vector_field(y, cfg_r1), z1, ctl)
        tol = 100.0 * (ctl.atol + ctl.rtol * np.linalg.norm(z0))
        assert np.max(np.abs(back.states[-1] - z0)) <= tol

    def test_dense_grid_spacing(self):
        ctl = IntegrationControls(s_max=2.0, record_every=0.125)
        traj = integrate(logistic_field, np.array([0.5]), ctl)
        assert np.all(np.diff(traj.s) > 0)
        grid = traj.s[:-1]  # final point coincides with the horizon here
        assert np.allclose(np.diff(grid), 0.125, atol=1e-12)
        assert traj.s[-1] == pytest.approx(2.0, abs=1e-12)

    def test_rejects_bad_controls(self):
        with pytest.raises(ValueError):
            IntegrationControls(rtol=0.0)
        with pytest.raises(ValueError):
            IntegrationControls(s_max=-1.0)
        with pytest.raises(ValueError):
            IntegrationControls(stop_radius=-0.1)


class TestTermination:
    def test_stop_radius_bisection(self):
        # y' = -y from |y| = 1: crosses radius 1/2 at s = ln 2.
        ctl = IntegrationControls(s_max=10.0, stop_radius=0.5, record_every=0.1)
        traj = integrate(lambda s, y: -y, np.array([1.0]), ctl)
        assert traj.termination.kind == ORIGIN_REACHED
        assert traj.termination.s == pytest.approx(math.log(2.0), abs=1e-8)
        assert abs(traj.states[-1, 0]) == pytest.approx(0.5, abs=1e-8)

    def test_step_underflow(self):
        # finite-time blow-up drives h below the floor
        ctl = IntegrationControls(s_max=1.0, record_every=0.01, max_steps=100000)
        traj = integrate(lambda s, y: y / (0.5 - s), np.array([1.0]), ctl)
        assert traj.termination.kind == STEP_FAILURE
        assert traj.termination.s == pytest.approx(0.5, abs=1e-6)

    def test_max_steps(self):
        ctl = IntegrationControls(s_max=1.0, record_every=0.5, max_steps=3)
        traj = integrate(logistic_field, np.array([0.5]), ctl)
        assert traj.termination.kind == STEP_FAILURE
        assert "max_steps" in traj.termination.detail

    def test_monitor_trips(self):
        def monitor(s, y):
            if y[0] > 2.0:
                return Violation("y cap", float(y[0]), 2.0)
            return None

        ctl = IntegrationControls(s_max=5.0, record_every=0.1)
        traj = integrate(lambda s, y: y, np.array([1.0]), ctl, monitors=[monitor])
        assert traj.termination.kind == INVARIANT_VIOLATED
        assert traj.termination.violation.name == "y cap"
        assert traj.termination.s == traj.s[-1]

    def test_rejects_nonfinite_start(self):
        with pytest.raises(ValueError):
            integrate(logistic_field, np.array([math.nan]))


class TestMonitorBounds:
    def test_clean_state_passes(self, cfg_r1, soliton_r1):
        k = len(soliton_r1.s) // 2
        z = soliton_r1.states[k, : cfg_r1.phase_dim]
        q = quantities(z, soliton_r1.u[k], cfg_r1)
        assert monitor_bounds(z, q, cfg_r1) is None

    def test_w_cap(self, cfg_r1):
        z = np.array([math.sqrt(2.0) + 0.01, 0.1, 0.1])
        q = quantities(z, 0.0, cfg_r1)
        v = monitor_bounds(z, q, cfg_r1)
        assert v is not None and v.name == "W upper bound"

    def test_positivity(self, cfg_r1):
        z = np.array([0.1, 0.1, -0.1])
        v = monitor_bounds(z, quantities(z, 0.0, cfg_r1), cfg_r1)
        assert v is not None and "Y_1" in v.name

    def test_einstein_profile_allows_equalities(self, cfg_r2):
        z = np.zeros(cfg_r2.phase_dim)
        z[0] = math.sqrt(2.0 / (cfg_r2.n * cfg_r2.epsilon))
        z[1 : cfg_r2.r + 1] = cfg_r2.sqrt_d / cfg_r2.n
        q = quantities(z, 0.0, cfg_r2)
        assert monitor_bounds(z, q, cfg_r2, profile="einstein") is None
        z_off = z.copy()
        z_off[1] += 1e-3
        q_off = quantities(z_off, 0.0, cfg_r2)
        assert monitor_bounds(z_off, q_off, cfg_r2, profile="einstein") is not None


class TestConservationOnRuns:
    def test_constant_along_soliton_run(self, soliton_r1):
        q = soliton_r1.quantities
        drift = np.max(np.abs(q["C"] - q["C"][0])) / (1.0 + abs(q["C"][0]))
        # default shot starts near the seed where C is read with float64
        # conditioning ~1e-4 of a unit; the constant holds at that level
        assert drift <= 1e-4

    def test_quantities_table_matches_scalar(self, soliton_r1, cfg_r1):
        k = len(soliton_r1.s) // 3
        z = soliton_r1.states[k, : cfg_r1.phase_dim]
        q = quantities(z, soliton_r1.u[k], cfg_r1)
        table = soliton_r1.quantities
        assert table["L"][k] == q.L
        assert table["H"][k] == q.H
        assert table["C"][k] == q.C
