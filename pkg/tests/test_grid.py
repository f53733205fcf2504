import pytest
from hypothesis import given, strategies as st

from setmarkov import CellMeasure, GroundGrid, IndexedSet, measure_of
from setmarkov.errors import ConfigError, GridMismatchError


def test_row_major_indexing():
    g = GroundGrid((2, 3))
    assert g.cell_count == 6
    assert g.coords(0) == (0, 0)
    assert g.coords(5) == (1, 2)
    assert g.index((1, 1)) == 4
    for i in range(6):
        assert g.index(g.coords(i)) == i


def test_grid_validation():
    with pytest.raises(ConfigError):
        GroundGrid(())
    with pytest.raises(ConfigError):
        GroundGrid((2, 0))


def test_measure_of_uniform(grid2, uniform2):
    s = IndexedSet.from_cells(grid2, [0, 1])
    assert measure_of(uniform2, s) == pytest.approx(0.5, abs=1e-15)


def test_measure_of_empty(grid2, uniform2):
    assert measure_of(uniform2, IndexedSet(grid2, 0)) == 0.0


def test_measure_of_weighted(grid2):
    # direct summation oracle: weights (1,2,3,4), cells {0,3} -> 1 + 4 = 5
    m = CellMeasure(grid2, [1, 2, 3, 4])
    assert measure_of(m, IndexedSet.from_cells(grid2, [0, 3])) == pytest.approx(5.0)


def test_measure_total_matches_full_grid(grid2):
    m = CellMeasure(grid2, [0.5, 1.5, 2.0, 0.0])
    assert measure_of(m, IndexedSet(grid2, grid2.full_mask)) == pytest.approx(m.total)


def test_probability_measure_must_sum_to_one(grid2):
    with pytest.raises(ConfigError):
        CellMeasure(grid2, [0.5, 0.5, 0.5, 0.5], "probability")
    CellMeasure(grid2, [0.25] * 4, "probability")


def test_dirichlet_measure_needs_positive_total(grid2):
    with pytest.raises(ConfigError):
        CellMeasure(grid2, [0.0] * 4, "dirichlet")


def test_negative_weights_rejected(grid2):
    with pytest.raises(ConfigError):
        CellMeasure(grid2, [1.0, -0.1, 0.0, 0.0])


def test_grid_mismatch(grid2):
    other = GroundGrid((4,))
    m = CellMeasure(other, [1.0] * 4)
    with pytest.raises(GridMismatchError):
        measure_of(m, IndexedSet.from_cells(grid2, [0]))


@given(st.lists(st.floats(0.0, 10.0), min_size=4, max_size=4),
       st.integers(0, 15), st.integers(0, 15))
def test_measure_is_modular(weights, mask_a, mask_b):
    g = GroundGrid((2, 2))
    m = CellMeasure(g, weights)
    a, b = IndexedSet(g, mask_a), IndexedSet(g, mask_b)
    lhs = measure_of(m, a | b) + measure_of(m, a & b)
    rhs = measure_of(m, a) + measure_of(m, b)
    assert lhs == pytest.approx(rhs, abs=1e-12)
