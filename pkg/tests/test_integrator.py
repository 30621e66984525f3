import logging
import math
from unittest import mock

import numpy as np
import pytest

from src.cases.scenarios import build_case, initial_state
from src.cli.reference import acoustic_dt, reference_context, reference_explicit_step
from src.core.errors import ConfigurationError, SolverError, StateError
from src.elliptic.helmholtz import EllipticSolveError
from src.integrator.imex import (StageWork, StepError, advance_step, check_final_stage, explicit_stage,
                                 first_order_step, implicit_stage)
from src.integrator.spatial import compute_dt, spatial_operator
from src.integrator.tableau import load_tableau


@pytest.fixture(scope="module")
def imex3():
    return load_tableau("imex3")


def assert_at_rest(state, scenario, atol=1e-12):
    grid = scenario.grid
    bg = scenario.hydro.sample(grid)
    assert np.max(np.abs(grid.interior_view(state.rho - bg.rho0))) < atol
    assert np.max(np.abs(grid.interior_view(state.q))) < atol
    assert np.max(np.abs(grid.interior_view(state.E - bg.E0))) < atol


class TestTimeStep:
    def test_dt_independent_of_small_eps(self, isothermal):
        scenario, _, state = isothermal
        params = scenario.params
        small, moderate = params.with_overrides(eps=0.1), params.with_overrides(eps=0.8)
        assert compute_dt(state, scenario.grid, small) == compute_dt(state, scenario.grid, moderate)

    def test_acoustic_dt_shrinks_with_eps(self, isothermal):
        scenario, ctx, state = isothermal
        assert acoustic_dt(state, ctx) < compute_dt(state, scenario.grid, scenario.params)


class TestAdvanceStep:
    def test_zero_dt_copies(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d
        new = advance_step(state, 0.0, imex3, ctx)
        assert new is not state
        np.testing.assert_array_equal(new.data, state.data)

    def test_equilibrium_preserved(self, isothermal, imex3):
        scenario, ctx, state = isothermal
        for _ in range(3):
            state = advance_step(state, compute_dt(state, scenario.grid, scenario.params), imex3, ctx)
        assert_at_rest(state, scenario)
        assert ctx.stats.steps == 3

    def test_solves_per_step(self, accuracy1d, imex3):
        scenario, ctx, state = accuracy1d
        advance_step(state, compute_dt(state, scenario.grid, scenario.params), imex3, ctx)
        assert ctx.stats.elliptic_solves == 4

    def test_fully_explicit_skips_solver(self, imex3, make_context):
        scenario = build_case("isothermal", nx=10, ny=10, eps=1.0)
        ctx = make_context(scenario)
        state = initial_state(scenario)
        state = advance_step(state, compute_dt(state, scenario.grid, scenario.params), imex3, ctx)
        assert ctx.stats.elliptic_solves == 0
        assert_at_rest(state, scenario)

    def test_imex1_pair_matches_first_order_step(self, accuracy1d):
        scenario, ctx, state = accuracy1d
        dt = compute_dt(state, scenario.grid, scenario.params)
        a = advance_step(state, dt, load_tableau("imex1"), ctx)
        b = first_order_step(state, dt, ctx)
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12, atol=1e-14)

    def test_steady_solution_stays_close(self, accuracy1d, imex3):
        scenario, ctx, state = accuracy1d
        initial = state.copy()
        for _ in range(2):
            state = advance_step(state, compute_dt(state, scenario.grid, scenario.params), imex3, ctx)
        grid = scenario.grid
        drift = np.max(np.abs(grid.interior_view(state.rho - initial.rho)))
        assert drift < 1e-6

    def test_solver_failure_becomes_step_error(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d
        with mock.patch("src.integrator.imex.solve_rho2", side_effect=EllipticSolveError("no convergence", 500)):
            with pytest.raises(StepError) as info:
                advance_step(state, 1e-3, imex3, ctx)
        assert isinstance(info.value.__cause__, EllipticSolveError)
        assert ctx.stats.steps == 0

    def test_first_order_failure(self, accuracy1d):
        _, ctx, state = accuracy1d
        with mock.patch("src.integrator.imex.solve_rho2", side_effect=EllipticSolveError("singular")):
            with pytest.raises(StepError, match="First-order step"):
                first_order_step(state, 1e-3, ctx)

    def test_missing_perturbation_becomes_step_error(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d
        state = state.copy()
        state.perturbation = None
        with mock.patch("src.integrator.imex.perturbation_extract", side_effect=StateError("no rho2 yet")):
            with pytest.raises(StepError) as info:
                advance_step(state, 1e-3, imex3, ctx)
        assert isinstance(info.value.__cause__, StateError)

    def test_final_combination_must_match_last_stage(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d

        def shifted(work, i, dt=None):
            U_I = implicit_stage(work, i, dt)
            if i == work.pair.stages - 1:
                U_I.data[0] += 1e-6
            return U_I

        with mock.patch("src.integrator.imex.implicit_stage", side_effect=shifted):
            with pytest.raises(StepError, match="last implicit stage"):
                advance_step(state, 1e-3, imex3, ctx)
        assert ctx.stats.steps == 0

    def test_final_stage_check_tolerates_roundoff(self, accuracy1d):
        scenario, _, state = accuracy1d
        last = state.copy()
        last.data[(0,) + scenario.grid.interior] *= 1.0 + 1e-15
        check_final_stage(state, last, 1e-3)


class TestPeriodicConservation:
    def test_one_step_keeps_mass(self, vortex, imex3):
        scenario, ctx, state = vortex
        grid = scenario.grid
        new = advance_step(state, compute_dt(state, grid, scenario.params), imex3, ctx)
        before = math.fsum(grid.interior_view(state.rho).ravel())
        after = math.fsum(grid.interior_view(new.rho).ravel())
        assert np.max(np.abs(grid.interior_view(new.q - state.q))) > 0.0
        assert abs(after - before) <= 1e-12 * before

    def test_first_order_step_keeps_mass(self, vortex):
        scenario, ctx, state = vortex
        grid = scenario.grid
        new = first_order_step(state, compute_dt(state, grid, scenario.params), ctx)
        before = math.fsum(grid.interior_view(state.rho).ravel())
        assert abs(math.fsum(grid.interior_view(new.rho).ravel()) - before) <= 1e-12 * before


class TestStageWork:
    def test_implicit_before_explicit(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d
        work = StageWork(imex3, state, 1e-3, ctx)
        with pytest.raises(SolverError):
            implicit_stage(work, 1)

    def test_first_explicit_stage_is_the_base_state(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d
        work = StageWork(imex3, state, 1e-3, ctx)
        assert explicit_stage(work, 0) is state
        assert work.explicit_states[0] is state
        assert explicit_stage(work, 0, dt=2e-3) is state and work.dt == 2e-3

    def test_stage_index_checked(self, accuracy1d, imex3):
        _, ctx, state = accuracy1d
        work = StageWork(imex3, state, 1e-3, ctx)
        with pytest.raises(IndexError):
            implicit_stage(work, 5)

    def test_split_operator_total(self, isothermal):
        _, ctx, state = isothermal
        split = spatial_operator(state, state, state.perturbation, ctx)
        np.testing.assert_allclose(split.total, split.explicit + split.implicit)
        assert np.max(np.abs(split.total)) < 1e-10


class TestReferenceStep:
    def test_context_switches_to_unsplit(self, isothermal):
        _, ctx, _ = isothermal
        ref = reference_context(ctx)
        assert ref.params.unsplit and ref.params.fully_explicit
        assert reference_context(ref) is ref
        assert not ctx.params.unsplit

    def test_rejects_eps_zero(self, make_context):
        scenario = build_case("accuracy1d", nx=16, eps=0.0)
        with pytest.raises(ConfigurationError):
            reference_context(make_context(scenario))

    def test_equilibrium_and_counter(self, isothermal):
        scenario, ctx, state = isothermal
        new = reference_explicit_step(state, acoustic_dt(state, ctx), ctx)
        assert_at_rest(new, scenario)
        assert ctx.stats.steps == 1

    def test_warns_above_cfl(self, isothermal, caplog):
        _, ctx, state = isothermal
        with caplog.at_level(logging.WARNING):
            reference_explicit_step(state, 10.0 * acoustic_dt(state, ctx), ctx)
        assert "exceeds the acoustic CFL limit" in caplog.text
