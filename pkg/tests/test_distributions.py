import math

import numpy as np
import pytest

from setmarkov.distributions import (
    BetaSegment,
    FinitePmf,
    NormalLaw,
    PointMass,
    ShiftedPoisson,
    TwoStage,
    binomial_pmf,
    compound_poisson_dict,
    pmf_csv_rows,
    tv_distance,
)
from setmarkov.errors import ConfigError


def test_binomial_pmf_exact():
    pmf = binomial_pmf(2, 1.0 / 3.0)
    assert pmf.as_dict()[0] == pytest.approx(4 / 9, abs=1e-15)
    assert pmf.as_dict()[1] == pytest.approx(4 / 9, abs=1e-15)
    assert pmf.as_dict()[2] == pytest.approx(1 / 9, abs=1e-15)


def test_finite_pmf_validation():
    with pytest.raises(ConfigError):
        FinitePmf([0, 1], [0.6, 0.6])
    with pytest.raises(ConfigError):
        FinitePmf([0, 1], [1.2, -0.2])


def test_finite_pmf_cdf_and_sampling():
    pmf = FinitePmf([0.0, 1.0, 2.0], [0.2, 0.5, 0.3])
    assert pmf.cdf(-0.5) == 0.0
    assert pmf.cdf(1.0) == pytest.approx(0.7)
    rng = np.random.default_rng(0)
    draws = [pmf.sample(rng) for _ in range(4000)]
    assert np.mean([d == 0.0 for d in draws]) == pytest.approx(0.2, abs=0.03)


def test_point_mass():
    d = PointMass(1.5)
    assert d.cdf(1.4) == 0.0 and d.cdf(1.5) == 1.0
    assert d.sample(np.random.default_rng(0)) == 1.5


def test_normal_law():
    d = NormalLaw(1.0, 0.25)
    assert d.cdf(1.0) == pytest.approx(0.5)
    assert d.cdf(1.5) == pytest.approx(0.841344746, abs=1e-8)
    degenerate = NormalLaw(2.0, 0.0)
    assert degenerate.cdf(1.99) == 0.0 and degenerate.cdf(2.0) == 1.0


def test_shifted_poisson():
    d = ShiftedPoisson(2.0, 1.5)
    assert d.cdf(1.9) == 0.0
    assert d.cdf(2.0) == pytest.approx(math.exp(-1.5))


def test_beta_segment_cdf():
    # Beta(1, 2) on [0, 1]: cdf(z) = 1 - (1 - z)^2
    d = BetaSegment(1.0, 2.0, 0.0)
    assert d.cdf(0.5) == pytest.approx(0.75, abs=1e-12)
    shifted = BetaSegment(1.0, 2.0, 0.5)
    assert shifted.cdf(0.75) == pytest.approx(0.75, abs=1e-12)


def test_beta_segment_degenerate_endpoints():
    assert BetaSegment(2.0, 0.0, 0.3).cdf(0.999) == 0.0  # point mass at 1
    assert BetaSegment(0.0, 2.0, 0.3).cdf(0.3) == 1.0    # no mass to add
    assert BetaSegment(1.0, 1.0, 1.0).sample(np.random.default_rng(0)) == 1.0


def test_two_stage_gaussian_cdf_matches_convolution():
    first = NormalLaw(0.0, 1.0)
    comp = TwoStage(first, lambda y: NormalLaw(y, 0.5))
    direct = NormalLaw(0.0, 1.5)
    for z in (-1.0, 0.0, 0.7, 2.0):
        assert comp.cdf(z) == pytest.approx(direct.cdf(z), abs=1e-7)


def test_two_stage_sampling():
    comp = TwoStage(PointMass(1.0), lambda y: NormalLaw(y, 0.0))
    assert comp.sample(np.random.default_rng(0)) == 1.0


def test_compound_poisson_dict():
    d = compound_poisson_dict(0.5, [1.0, 2.0], [0.5, 0.5])
    assert d[0.0] == pytest.approx(math.exp(-0.5), abs=1e-14)
    # one jump of size 1: e^-l * l * 0.5
    assert d[1.0] == pytest.approx(math.exp(-0.5) * 0.5 * 0.5, abs=1e-14)
    assert sum(d.values()) == pytest.approx(1.0, abs=1e-12)


def test_tv_distance():
    assert tv_distance({0: 0.5, 1: 0.5}, {0: 0.5, 1: 0.5}) == 0.0
    assert tv_distance({0: 1.0}, {1: 1.0}) == pytest.approx(1.0)
    assert tv_distance({0: 0.6, 1: 0.4}, {0: 0.4, 1: 0.6}) == pytest.approx(0.2)


def test_pmf_csv_rows():
    assert pmf_csv_rows(PointMass(2.0)) == [(2.0, 1.0)]
    rows = pmf_csv_rows(binomial_pmf(1, 0.25))
    assert rows == [(0, 0.75), (1, 0.25)]
    with pytest.raises(ConfigError):
        pmf_csv_rows(NormalLaw(0.0, 1.0))
