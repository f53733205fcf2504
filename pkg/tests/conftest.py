import pytest

from setmarkov import (
    CellMeasure,
    EmpiricalKernel,
    FddSpec,
    GroundGrid,
    IndexedSet,
    close_under_intersection,
    enumerate_consistent_orderings,
)


@pytest.fixture
def grid2():
    return GroundGrid((2, 2))


@pytest.fixture
def grid4():
    return GroundGrid((4, 4))


@pytest.fixture
def uniform2(grid2):
    return CellMeasure.uniform_probability(grid2)


@pytest.fixture
def lattice3(grid2):
    """Minimal set {0} plus the incomparable pair {0,1} and {0,2}."""
    return close_under_intersection([
        IndexedSet.from_cells(grid2, [0, 1]),
        IndexedSet.from_cells(grid2, [0, 2]),
    ])


@pytest.fixture
def orderings3(lattice3):
    return enumerate_consistent_orderings(lattice3)


@pytest.fixture
def staircase_corners():
    return [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (0, 2)]


@pytest.fixture
def lattice6(grid4, staircase_corners):
    """Six nested staircase rectangles on a 4x4 grid; 16 consistent orderings."""
    rects = [IndexedSet.rectangle(grid4, c) for c in staircase_corners]
    lat = close_under_intersection(rects)
    assert len(lat.members) == 6
    return lat


@pytest.fixture
def uniform4(grid4):
    return CellMeasure.uniform_probability(grid4)


@pytest.fixture
def empirical_spec3(lattice3, uniform2):
    return FddSpec(lattice3, EmpiricalKernel(2, uniform2))
