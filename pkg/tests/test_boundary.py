import numpy as np
import pytest

from src.boundary.ghosts import (BoundaryKind, BoundarySpec, extrapolate_ghosts, fill_array_ghosts,
                                 fill_ghosts, fill_momentum_ghosts, ghost_index_map, side_axis)
from src.core.errors import ConfigurationError
from src.core.grid import Grid
from src.core.hydrostatic import HydrostaticState
from src.core.params import SimParams
from src.core.state import ConservedField


def spec_2d(x_kind, y_kind):
    return BoundarySpec({"x-": x_kind, "x+": x_kind, "y-": y_kind, "y+": y_kind})


class TestBoundarySpec:
    def test_side_axis(self):
        assert side_axis("x-") == (0, False)
        assert side_axis("y+") == (1, True)
        with pytest.raises(ConfigurationError):
            side_axis("z+")

    def test_unpaired_periodic(self):
        with pytest.raises(ConfigurationError):
            BoundarySpec({"x-": "periodic", "x+": "outflow"})

    def test_missing_side(self, grid2d):
        spec = BoundarySpec.uniform(BoundaryKind.PERIODIC, 1)
        with pytest.raises(ConfigurationError):
            spec.check_grid(grid2d)

    def test_inflow_needs_pinned_data(self, grid1d):
        spec = BoundarySpec.uniform(BoundaryKind.INFLOW, 1)
        with pytest.raises(ConfigurationError):
            fill_array_ghosts(np.zeros(grid1d.shape), grid1d, spec, lead=0)


class TestScalarFill:
    def test_periodic(self, grid1d):
        arr = np.zeros(grid1d.shape)
        arr[3:-3] = np.arange(16.0)
        fill_array_ghosts(arr, grid1d, BoundarySpec.uniform(BoundaryKind.PERIODIC, 1), lead=0)
        np.testing.assert_array_equal(arr[:3], [13.0, 14.0, 15.0])
        np.testing.assert_array_equal(arr[-3:], [0.0, 1.0, 2.0])

    def test_outflow_copies_edge(self, grid1d):
        arr = np.zeros(grid1d.shape)
        arr[3:-3] = np.arange(1.0, 17.0)
        fill_array_ghosts(arr, grid1d, BoundarySpec.uniform(BoundaryKind.OUTFLOW, 1), lead=0)
        np.testing.assert_array_equal(arr[:3], 1.0)
        np.testing.assert_array_equal(arr[-3:], 16.0)

    def test_inflow_uses_pinned(self, grid1d):
        spec = BoundarySpec.uniform(BoundaryKind.INFLOW, 1)
        pinned = np.arange(float(grid1d.shape[0]))
        spec.pin("p2", pinned)
        pinned[:] = -1.0
        arr = np.zeros(grid1d.shape)
        fill_array_ghosts(arr, grid1d, spec, lead=0, pinned=spec.pinned["p2"])
        np.testing.assert_array_equal(arr[:3], [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(arr[-3:], pinned.size - np.array([3.0, 2.0, 1.0]))

    def test_x_sides_before_y_sides(self, grid2d):
        arr = np.zeros(grid2d.shape)
        arr[3:-3, 3:-3] = 1.0
        fill_array_ghosts(arr, grid2d, spec_2d(BoundaryKind.OUTFLOW, BoundaryKind.OUTFLOW), lead=0)
        assert np.all(arr == 1.0)

    def test_extrapolation_exact_for_cubics(self, grid2d):
        x, y = grid2d.coords
        f = (x ** 3 - 2.0 * x + 1.0) * (y ** 2 + y)
        garbled = f.copy()
        garbled[:3] = 99.0
        garbled[:, -3:] = -7.0
        np.testing.assert_allclose(extrapolate_ghosts(garbled[None], grid2d)[0], f, rtol=1e-10, atol=1e-10)


class TestStateFill:
    def make_hydro(self):
        return HydrostaticState(rho0=lambda x, y: np.exp(-y), p0=lambda x, y: np.exp(-y),
                                phi=lambda x, y: y, grad_phi=lambda x, y: (0.0 * x, 1.0 + 0.0 * y), gamma=1.4)

    def test_wall_flips_normal_momentum(self, grid2d):
        params = SimParams(eps=0.5)
        hydro = self.make_hydro()
        spec = spec_2d(BoundaryKind.PERIODIC, BoundaryKind.INVISCID_WALL)
        bg = hydro.sample(grid2d)
        shape = grid2d.shape
        state = ConservedField.from_primitive(grid2d, bg.rho0, [np.full(shape, 0.2), np.full(shape, 0.3)],
                                              bg.p0, np.zeros(shape), params)
        fill_ghosts(state, spec, hydro)
        G, ny = grid2d.ghost, grid2d.ny
        for k in range(G):
            low_ghost, low_mirror = G - 1 - k, G + k
            np.testing.assert_allclose(state.q[1][:, low_ghost], -state.q[1][:, low_mirror])
            np.testing.assert_allclose(state.q[0][:, low_ghost], state.q[0][:, low_mirror])
            high_ghost, high_mirror = G + ny + k, G + ny - 1 - k
            np.testing.assert_allclose(state.q[1][:, high_ghost], -state.q[1][:, high_mirror])

    def test_mirrored_sides_keep_equilibrium(self, grid2d):
        params = SimParams(eps=0.5)
        hydro = self.make_hydro()
        bg = hydro.sample(grid2d)
        shape = grid2d.shape
        state = ConservedField.from_primitive(grid2d, np.ones(shape), [np.zeros(shape)] * 2, np.ones(shape),
                                              np.zeros(shape), params)
        state.data[:, 3:-3, 3:-3] = 0.0
        state.data[0, 3:-3, 3:-3] = bg.rho0[3:-3, 3:-3]
        state.data[3, 3:-3, 3:-3] = bg.E0[3:-3, 3:-3]
        fill_ghosts(state, spec_2d(BoundaryKind.TRANSMISSIVE_SPLIT, BoundaryKind.INVISCID_WALL), hydro)
        np.testing.assert_allclose(state.rho, bg.rho0, rtol=1e-15)
        np.testing.assert_allclose(state.E, bg.E0, rtol=1e-15)

    def test_momentum_fill_uses_wall_parity(self, grid1d):
        q = np.zeros((1,) + grid1d.shape)
        q[0, 3:-3] = 1.0
        fill_momentum_ghosts(q, grid1d, BoundarySpec.uniform(BoundaryKind.INVISCID_WALL, 1))
        np.testing.assert_array_equal(q[0, :3], -1.0)


class TestGhostIndexMap:
    def test_periodic_sources(self, grid1d):
        mapping = ghost_index_map(grid1d, BoundarySpec.uniform(BoundaryKind.PERIODIC, 1))
        assert list(mapping[:3]) == [16, 17, 18]
        assert list(mapping[-3:]) == [3, 4, 5]
        np.testing.assert_array_equal(mapping[3:-3], np.arange(3, 19))

    def test_inflow_marks_pinned(self, grid1d):
        mapping = ghost_index_map(grid1d, BoundarySpec.uniform(BoundaryKind.INFLOW, 1))
        assert list(mapping[:3]) == [-1, -2, -3]
        assert np.all(mapping[3:-3] >= 0)
