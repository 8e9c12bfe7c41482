import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penflow import (ControlSchedule, GridSpec, LineState, ValidationError,
                     delay_oracle, init_line, output, run_schedule, step)


@pytest.fixture
def half_cfl_grid():
    return GridSpec(dx=0.1, lam=4.0, dt=0.0125, T=1.0)


def ramp_schedule(grid, t_hi):
    # u(t) = t, sampled at step starts.
    n = grid.step_of(t_hi)
    return ControlSchedule(0.0, grid.dt, np.arange(n) * grid.dt)


class TestGridSpec:
    def test_case_grid_shape(self, case_grid):
        assert case_grid.n_cells == 10
        assert case_grid.n_steps == 40
        assert case_grid.transit_steps == 10
        assert case_grid.cfl == 1.0

    def test_rejects_cfl_violation(self):
        with pytest.raises(ValidationError, match="CFL"):
            GridSpec(dx=0.5, lam=1.0, dt=1.0, T=2.0)

    def test_rejects_noninteger_cell_count(self):
        with pytest.raises(ValidationError):
            GridSpec(dx=0.3, lam=1.0, dt=0.1, T=1.0)

    def test_rejects_noninteger_step_count(self):
        with pytest.raises(ValidationError):
            GridSpec(dx=0.1, lam=1.0, dt=0.03, T=1.0)

    def test_rejects_off_grid_time_lookup(self, case_grid):
        with pytest.raises(ValidationError):
            case_grid.step_of(0.26)


class TestStep:
    def test_zero_state_stays_zero(self, case_grid):
        s0 = init_line(case_grid)
        s1 = step(s0, 0.0)
        assert np.all(s1.z == 0.0)
        assert s1.t == pytest.approx(case_grid.dt)

    def test_unit_cfl_is_exact_shift(self, case_grid):
        z = np.arange(10.0)
        s = LineState(case_grid, z, 0)
        s1 = step(s, -7.0)
        assert s1.z[0] == -7.0
        assert np.array_equal(s1.z[1:], z[:-1])

    def test_constant_state_is_fixed_point_at_half_cfl(self, half_cfl_grid):
        s = LineState(half_cfl_grid, np.ones(10), 0)
        s1 = step(s, 1.0)
        assert np.array_equal(s1.z, np.ones(10))

    def test_rejects_stepping_past_horizon(self, case_grid):
        s = LineState(case_grid, np.zeros(10), case_grid.n_steps)
        with pytest.raises(ValidationError):
            step(s, 0.0)


class TestOutput:
    def test_zero_state(self, case_grid):
        assert output(init_line(case_grid)) == 0.0

    def test_constant_inflow_arrives_after_transit(self, case_grid):
        s = init_line(case_grid)
        for k in range(case_grid.transit_steps):
            assert output(s) == 0.0  # finite propagation speed
            s = step(s, 3.5)
        assert output(s) == 3.5


class TestRunSchedule:
    def test_zero_schedule_zero_trace(self, case_grid):
        u = ControlSchedule(0.0, case_grid.dt, np.zeros(30))
        _, trace = run_schedule(init_line(case_grid), u, case_grid.T)
        assert np.all(trace == 0.0)

    def test_ramp_matches_shifted_ramp(self, case_grid):
        # u(t) = t on [0, 0.75): y(t) = t - 0.25 once the ramp arrives.
        u = ramp_schedule(case_grid, 0.75)
        _, trace = run_schedule(init_line(case_grid), u, case_grid.T)
        for k in range(1, case_grid.n_steps + 1):
            t = k * case_grid.dt
            want = max(0.0, min(t, 0.75 + case_grid.dt) - 0.25) if t >= 0.25 else 0.0
            if t < 0.25:
                assert trace[k - 1] == 0.0
            else:
                assert trace[k - 1] == pytest.approx(u.value_at(t - 0.25), abs=0.0)

    def test_random_schedules_match_delay_oracle(self, case_grid):
        rng = np.random.default_rng(5)
        for _ in range(25):
            u = ControlSchedule(0.0, case_grid.dt, rng.uniform(-4.0, 6.0, 30))
            _, trace = run_schedule(init_line(case_grid), u, case_grid.T)
            for k in range(case_grid.transit_steps, case_grid.n_steps + 1):
                got = trace[k - 1]
                want = delay_oracle(u, case_grid.lam, k * case_grid.dt)
                assert abs(got - want) <= 1e-13

    def test_rejects_misaligned_schedule(self, case_grid):
        u = ControlSchedule(0.0, 0.05, np.zeros(15))
        with pytest.raises(ValidationError):
            run_schedule(init_line(case_grid), u, case_grid.T)

    def test_rejects_short_schedule(self, case_grid):
        u = ControlSchedule(0.0, case_grid.dt, np.zeros(5))
        with pytest.raises(ValidationError):
            run_schedule(init_line(case_grid), u, case_grid.T)

    def test_holds_last_value_past_schedule_end(self, case_grid):
        u = ControlSchedule(0.0, case_grid.dt, np.full(30, 2.0))
        state, _ = run_schedule(init_line(case_grid), u, case_grid.T)
        assert np.all(state.z == 2.0)  # held inflow kept feeding the line


class TestDelayOracle:
    def test_constant_schedule(self, case_grid):
        u = ControlSchedule(0.0, case_grid.dt, np.full(30, 1.5))
        for s in (0.25, 0.5, 1.0):
            assert delay_oracle(u, 4.0, s) == 1.5

    def test_ramp_shift(self, case_grid):
        u = ramp_schedule(case_grid, 0.75)
        assert delay_oracle(u, 4.0, 0.5) == pytest.approx(0.25)

    def test_rejects_pre_arrival_time(self, case_grid):
        u = ControlSchedule(0.0, case_grid.dt, np.ones(30))
        with pytest.raises(ValidationError):
            delay_oracle(u, 4.0, 0.2)


@settings(max_examples=40, deadline=None)
@given(values=st.lists(st.floats(-5.0, 5.0), min_size=30, max_size=30),
       bumps=st.lists(st.floats(0.0, 3.0), min_size=30, max_size=30),
       cfl_half=st.booleans())
def test_monotone_in_the_schedule(values, bumps, cfl_half):
    # u1 <= u2 pointwise implies y1 <= y2 pointwise (monotone scheme).
    grid = GridSpec(dx=0.1, lam=4.0, dt=0.0125 if cfl_half else 0.025, T=1.0)
    n = grid.n_steps - grid.transit_steps
    u1 = np.resize(np.asarray(values), n)
    u2 = u1 + np.resize(np.asarray(bumps), n)
    _, tr1 = run_schedule(init_line(grid), ControlSchedule(0.0, grid.dt, u1), grid.T)
    _, tr2 = run_schedule(init_line(grid), ControlSchedule(0.0, grid.dt, u2), grid.T)
    assert np.all(tr1 <= tr2 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(values=st.lists(st.floats(-5.0, 5.0), min_size=30, max_size=30),
       z0=st.lists(st.floats(-5.0, 5.0), min_size=10, max_size=10),
       cfl_half=st.booleans())
def test_max_norm_bound(values, z0, cfl_half):
    # The state never exceeds the larger of initial content and inflow.
    grid = GridSpec(dx=0.1, lam=4.0, dt=0.0125 if cfl_half else 0.025, T=1.0)
    n = grid.n_steps - grid.transit_steps
    u = np.resize(np.asarray(values), n)
    state = LineState(grid, np.asarray(z0), 0)
    bound = max(np.max(np.abs(np.asarray(z0))), np.max(np.abs(u)))
    sched = ControlSchedule(0.0, grid.dt, u)
    for _ in range(grid.n_steps):
        state = step(state, sched.value_for_step(state.k))
        assert np.max(np.abs(state.z)) <= bound + 1e-12
