import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qais.grid import (GridSpec, HyperRect, cell_bounds, cell_widths, coords_to_linear,
                       linear_to_coords, rect_volume)


@st.composite
def specs(draw, max_n=26):
    d = draw(st.integers(1, 5))
    qubits = draw(st.lists(st.integers(1, 8), min_size=d, max_size=d))
    if sum(qubits) > max_n:
        qubits = [max(1, q * max_n // sum(qubits)) for q in qubits]
    bounds = [(a, a + w) for a, w in draw(st.lists(
        st.tuples(st.floats(-5, 5), st.floats(0.1, 10)), min_size=d, max_size=d))]
    return GridSpec(tuple(qubits), tuple(bounds))


class TestCellWidths:
    def test_one_dim(self):
        assert cell_widths(GridSpec((5,))) == (0.03125,)

    def test_two_dim(self):
        assert cell_widths(GridSpec((2, 2))) == (0.25, 0.25)

    def test_pentagon_split(self):
        assert cell_widths(GridSpec((8, 4, 4)))[0] == 1 / 256


class TestLinearCoords:
    spec = GridSpec((2, 2))

    @pytest.mark.parametrize("lin, coords", [(0, (0, 0)), (6, (1, 2)), (15, (3, 3))])
    def test_examples(self, lin, coords):
        assert linear_to_coords(self.spec, lin) == coords
        assert coords_to_linear(self.spec, coords) == lin

    def test_unequal_split_puts_axis1_last(self):
        spec = GridSpec((1, 3))
        # axis 2 has 8 cells and is the most significant block
        assert linear_to_coords(spec, 5) == (2, 1)

    @pytest.mark.parametrize("qubits", [(12,), (3, 4, 5), (2, 2, 2, 2, 2, 2), (7, 5)])
    def test_exhaustive_roundtrip(self, qubits):
        spec = GridSpec(qubits)
        lin = np.arange(spec.n_cells)
        coords = linear_to_coords(spec, lin)
        assert np.array_equal(coords_to_linear(spec, coords), lin)
        assert np.all(coords < np.array(spec.dims_be))

    @given(specs(), st.data())
    def test_random_roundtrip(self, spec, data):
        lin = data.draw(st.integers(0, spec.n_cells - 1))
        assert coords_to_linear(spec, linear_to_coords(spec, lin)) == lin

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            linear_to_coords(self.spec, 16)
        with pytest.raises(ValueError):
            coords_to_linear(self.spec, (4, 0))


class TestCellBounds:
    def test_example(self):
        b = cell_bounds(GridSpec((2, 2)), (1, 2))
        assert b == [(0.5, 0.75), (0.25, 0.5)]

    def test_lower_corner(self):
        spec = GridSpec((3, 2), ((-1.0, 1.0), (2.0, 4.0)))
        assert cell_bounds(spec, (0, 0)) == [(-1.0, -0.75), (2.0, 2.5)]

    @pytest.mark.parametrize("qubits", [(4, 3), (2, 2, 2), (6,)])
    def test_cells_tile_domain(self, qubits):
        spec = GridSpec(qubits, tuple((0.0, 1.0 + k) for k in range(len(qubits))))
        boxes = np.array([cell_bounds(spec, c) for c in linear_to_coords(spec, np.arange(spec.n_cells))])
        vols = np.prod(boxes[:, :, 1] - boxes[:, :, 0], axis=1)
        assert math.isclose(vols.sum(), spec.volume, rel_tol=1e-12)
        # disjoint interiors: the cell lower corners are all distinct grid nodes
        assert len({tuple(r) for r in boxes[:, :, 0].round(12)}) == spec.n_cells

    @given(specs(max_n=16), st.data())
    def test_consecutive_axis1_cells_are_adjacent(self, spec, data):
        lin = data.draw(st.integers(0, spec.n_cells - 2))
        c0, c1 = linear_to_coords(spec, lin), linear_to_coords(spec, lin + 1)
        if c0[-1] + 1 == c1[-1]:
            assert cell_bounds(spec, c0)[0][1] == pytest.approx(cell_bounds(spec, c1)[0][0])


class TestRectVolume:
    def test_single_cell(self):
        spec = GridSpec((5, 5))
        assert rect_volume(spec, HyperRect((3, 7), (3, 7))) == pytest.approx(9.765625e-4, abs=0)

    def test_full_grid(self):
        spec = GridSpec((2, 3), ((0.0, 2.0), (1.0, 4.0)))
        assert rect_volume(spec, HyperRect((0, 0), (7, 3))) == pytest.approx(6.0)

    def test_block(self):
        assert rect_volume(GridSpec((2, 2)), HyperRect((1, 0), (2, 3))) == 0.5

    @given(specs(max_n=16))
    @settings(max_examples=30)
    def test_cell_volumes_sum_to_domain(self, spec):
        assert math.isclose(spec.n_cells * spec.cell_volume, spec.volume, rel_tol=1e-12)

    def test_outside(self):
        with pytest.raises(ValueError):
            rect_volume(GridSpec((2, 2)), HyperRect((0, 0), (4, 0)))


class TestGridSpec:
    def test_invariants(self):
        spec = GridSpec((8, 4, 4))
        assert spec.n == 16 and spec.n_cells == 65536 and spec.dims_be == (16, 16, 256)

    @pytest.mark.parametrize("kwargs", [
        dict(qubits=()), dict(qubits=(0, 2)), dict(qubits=(2,), bounds=((1.0, 1.0),)),
        dict(qubits=(20, 7)), dict(qubits=(2, 2), bounds=((0, 1),)),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            GridSpec(**kwargs)

    def test_configurable_max(self):
        assert GridSpec((20, 10), max_qubits=30).n == 30

    def test_config_roundtrip(self):
        spec = GridSpec((8, 4, 4), ((0.0, 1.0), (-1.0, 1.0), (0.0, 0.5)))
        assert GridSpec.from_config(spec.to_config()) == spec
        assert set(spec.to_config()) == {"dims", "qubits", "lower", "upper"}
