import math
from fractions import Fraction

import numpy as np
import pandas as pd
import pytest

from src.cases.analysis import component_names, convergence_table, diagnostics, exact_solution, l1_error
from src.cases.scenarios import ReferenceScales, build_case, initial_state, list_cases
from src.core.errors import ConfigurationError
from src.core.hydrostatic import hydrostatic_residual
from src.core.params import WeightsMode

SMALL = {"accuracy1d": {"nx": 16}, "shocktube": {"nx": 16}, "accuracy2d": {"nx": 8},
         "vortex": {"nx": 16}, "isothermal": {"nx": 8}, "bubble": {"nx": 10}, "igw": {"nx": 24}}


class TestBuildCase:
    def test_case_names(self):
        assert list_cases() == ["accuracy1d", "shocktube", "accuracy2d", "vortex", "isothermal", "bubble", "igw"]

    @pytest.mark.parametrize("name", list(SMALL))
    def test_background_is_hydrostatic(self, name):
        scenario = build_case(name, **SMALL[name])
        assert hydrostatic_residual(scenario.hydro, scenario.grid) <= 1e-12

    @pytest.mark.parametrize("name", list(SMALL))
    def test_initial_state_is_valid(self, name):
        scenario = build_case(name, **SMALL[name])
        state = initial_state(scenario)
        assert np.all(np.isfinite(state.data))
        assert np.all(state.pressure(scenario.params) > 0.0)
        assert state.perturbation is not None

    def test_accuracy1d_density_at_origin(self):
        scenario = build_case("accuracy1d", eps=1.0)
        assert scenario.initial.rho(np.array([0.0]))[0] == pytest.approx(2.0, rel=1e-15)

    def test_shocktube_states(self):
        scenario = build_case("shocktube", nx=20)
        state = initial_state(scenario)
        grid = scenario.grid
        rho = grid.interior_view(state.rho)
        p = state.pressure(scenario.params, interior=True)
        assert scenario.params.eps == 0.9
        np.testing.assert_allclose(rho[:10], 1.0)
        np.testing.assert_allclose(rho[10:], 0.125)
        np.testing.assert_allclose(p[:10], 1.0, rtol=1e-14)
        np.testing.assert_allclose(p[10:], 0.1, rtol=1e-14)
        assert np.all(grid.interior_view(state.q) == 0.0)

    @pytest.mark.parametrize("name, eps", [("bubble", 1e-2), ("igw", 1e-3)])
    def test_atmospheric_mach_numbers(self, name, eps):
        scenario = build_case(name, **SMALL[name])
        assert scenario.params.eps == pytest.approx(eps, rel=1e-15)
        assert scenario.scales.eps == pytest.approx(eps, rel=1e-15)

    def test_igw_defaults(self):
        scenario = build_case("igw")
        assert scenario.grid.counts == (400, 50)
        assert scenario.params.cfl == 0.01
        assert scenario.scales.to_dimensional_time(scenario.t_end) == pytest.approx(3000.0)

    def test_nx_keeps_aspect_ratio(self):
        assert build_case("vortex", nx=40).grid.counts == (40, 20)
        assert build_case("vortex", nx=40, ny=8).grid.counts == (40, 8)

    def test_none_overrides_are_ignored(self):
        assert build_case("shocktube", nx=None, eps=None).grid.nx == 200

    def test_weights_mode_override(self):
        scenario = build_case("accuracy1d", nx=16, weights_mode="linear")
        assert scenario.params.weights_mode is WeightsMode.LINEAR

    @pytest.mark.parametrize("name, overrides", [
        ("tsunami", {}),
        ("bubble", {"perturbed": True}),
        ("shocktube", {"ny": 10}),
        ("vortex", {"eps": 0.5}),
        ("bubble", {"eps": 0.1}),
        ("shocktube", {"eps": 0.0}),
        ("accuracy1d", {"eps": -1.0}),
        ("accuracy1d", {"t_end": -0.1}),
        ("accuracy2d", {"p2_variant": "mirrored"}),
    ])
    def test_rejected_overrides(self, name, overrides):
        with pytest.raises(ConfigurationError):
            build_case(name, **overrides)

    def test_p2_variants_differ_in_y_slope(self):
        symmetric = build_case("accuracy2d", nx=8)
        printed = build_case("accuracy2d", nx=8, p2_variant="printed")
        x, y = np.array([0.5]), np.array([1.0])
        assert symmetric.initial.p2(x, y)[0] != pytest.approx(printed.initial.p2(x, y)[0])
        assert printed.constants["p2_variant"] == "printed"

    def test_eps_zero_accuracy_case(self):
        scenario = build_case("accuracy1d", nx=16, eps=0.0)
        state = initial_state(scenario)
        np.testing.assert_allclose(state.rho, scenario.hydro.sample(scenario.grid).rho0)
        np.testing.assert_allclose(state.perturbation.rho2[3:-3],
                                   1.0 + 0.2 * np.sin(np.pi * scenario.grid.interior_view(scenario.grid.coords[0])))

    def test_isothermal_hump(self):
        scenario = build_case("isothermal", nx=15, perturbed=True)
        state = initial_state(scenario)
        grid = scenario.grid
        p = state.pressure(scenario.params, interior=True)
        p0 = grid.interior_view(scenario.hydro.sample(grid).p0)
        hump = (p - p0) / scenario.params.eps2
        assert np.max(hump) == pytest.approx(1.0 / 810.0, rel=1e-6)
        assert not scenario.steady


class TestReferenceScales:
    def test_bubble_scales(self):
        scales = ReferenceScales(p_ref=1.0e5, rho_ref=10.0, l_ref=1.0e3, t_ref=1.0e3)
        assert scales.u_ref == 1.0
        assert scales.gravity(9.8) == pytest.approx(0.98)
        assert scales.length(500.0) == 0.5
        assert scales.to_dimensional_theta(1.0) == pytest.approx(1.0e4 / 287.058)


class TestExactSolution:
    def test_steady_case_returns_initial(self):
        scenario = build_case("accuracy1d", nx=16)
        exact = exact_solution(scenario, 0.37)
        np.testing.assert_array_equal(exact.data, initial_state(scenario).data)

    def test_unsteady_case(self):
        assert exact_solution(build_case("shocktube", nx=16), 0.1) is None

    def test_isothermal_unperturbed_is_steady(self):
        assert exact_solution(build_case("isothermal", nx=8), 1.0) is not None
        assert exact_solution(build_case("isothermal", nx=8, perturbed=True), 1.0) is None

    def test_negative_time(self):
        with pytest.raises(ConfigurationError):
            exact_solution(build_case("accuracy1d", nx=16), -1.0)


class TestErrors:
    def test_component_names(self):
        assert component_names(1) == ["rho", "qx", "E", "theta2"]
        assert component_names(2) == ["rho", "qx", "qy", "E", "theta2"]

    def test_identical_fields(self):
        state = initial_state(build_case("accuracy1d", nx=16))
        assert all(v == 0.0 for v in l1_error(state, state.copy()).values())

    def test_constant_offset_on_unit_domain(self):
        state = initial_state(build_case("shocktube", nx=16))
        shifted = state.copy()
        shifted.data[0] += 0.25
        errors = l1_error(shifted, state)
        assert errors["rho"] == pytest.approx(0.25, rel=1e-15)
        assert errors["qx"] == 0.0

    def test_compensated_sum(self, rng):
        scenario = build_case("accuracy2d", nx=16)
        a, b = initial_state(scenario), initial_state(scenario)
        a.data[...] = rng.normal(scale=1e3, size=a.data.shape)
        grid = scenario.grid
        diff = np.abs(grid.interior_view(a.data) - grid.interior_view(b.data))[0]
        oracle = float(sum(Fraction(v) for v in diff.ravel()) * Fraction(grid.cell_volume))
        assert l1_error(a, b)["rho"] == pytest.approx(oracle, rel=1e-15)

    def test_grid_mismatch(self):
        a = initial_state(build_case("accuracy1d", nx=16))
        b = initial_state(build_case("accuracy1d", nx=32))
        with pytest.raises(ConfigurationError):
            l1_error(a, b)


class TestConvergenceTable:
    @pytest.mark.parametrize("errors, order", [
        ((9.19e-05, 2.94e-06), 4.96),
        ((1.0e-3, 1.0e-3 / 32.0), 5.0),
        ((4.86e-04, 3.70e-05), 3.72),
    ])
    def test_observed_order(self, errors, order):
        table = convergence_table({16: errors[0], 32: errors[1]})
        assert list(table.columns) == ["N", "error", "order"]
        assert math.isnan(table["order"].iloc[0])
        assert table["order"].iloc[1] == pytest.approx(order, abs=1e-2)

    def test_non_doubling(self):
        with pytest.raises(ConfigurationError):
            convergence_table({16: 1e-3, 48: 1e-5})

    def test_sorted_by_n(self):
        table = convergence_table({64: 1e-6, 16: 1e-3, 32: 1e-4})
        assert isinstance(table, pd.DataFrame)
        assert list(table["N"]) == [16, 32, 64]


class TestDiagnostics:
    def test_equilibrium_has_no_deviation(self, isothermal):
        scenario, _, state = isothermal
        record = diagnostics(state, scenario)
        for key in ("div_q_max", "div_rho0_u_max", "p_dev_max", "rho_dev_max", "theta2_max"):
            assert record[key] <= 1e-13, key
        assert record["mass"] > 0.0 and record["lambda"] > 0.0
        assert "dtheta_max_K" not in record

    def test_bubble_amplitude_in_kelvin(self):
        scenario = build_case("bubble")
        record = diagnostics(initial_state(scenario), scenario)
        assert record["dtheta_max_K"] == pytest.approx(0.5, abs=5e-3)
        assert record["dtheta_min_K"] == pytest.approx(0.0, abs=1e-12)
        assert "exner_dev_max" in record

    def test_vortex_divergence_is_recorded(self):
        scenario = build_case("vortex", nx=32)
        record = diagnostics(initial_state(scenario), scenario)
        assert np.isfinite(record["div_q_max"])
        assert record["div_q_max"] > 0.0
