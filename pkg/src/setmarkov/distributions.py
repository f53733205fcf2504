"""One-dimensional laws used by the transition kernels.

Finite pmfs are exact (dict-backed); the closed-form families carry cdf and
sampler.  ``TwoStage`` represents the composition of two kernels for the
continuous families: it samples by chaining draws and evaluates its cdf by
adaptive quadrature over the intermediate value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .errors import ConfigError

PMF_TOTAL_TOL = 1e-12
COMPOSE_CDF_TOL = 1e-8
_KEY_DECIMALS = 12


def canonical_value(v: float) -> float:
    """Canonical float key so that equal sums reached differently still merge."""
    return round(float(v), _KEY_DECIMALS)


_key = canonical_value


class Distribution:
    """Minimal duck-typed interface: cdf(z) and sample(rng)."""

    def cdf(self, z: float) -> float:
        raise NotImplementedError

    def sample(self, rng) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(Distribution):
    value: float

    def cdf(self, z):
        return 1.0 if z >= self.value else 0.0

    def sample(self, rng):
        return self.value

    def as_dict(self):
        return {_key(self.value): 1.0}


class FinitePmf(Distribution):
    """Exact pmf on a finite set of real support points."""

    def __init__(self, values, probs):
        pairs = sorted(zip(values, probs))
        self.values = tuple(v for v, _ in pairs)
        self.probs = tuple(float(p) for _, p in pairs)
        if any(p < -PMF_TOTAL_TOL for p in self.probs):
            raise ConfigError("pmf has a negative weight")
        total = sum(self.probs)
        if abs(total - 1.0) > PMF_TOTAL_TOL:
            raise ConfigError(f"pmf sums to {total}, not 1")
        self._cum = np.cumsum(self.probs)

    @classmethod
    def from_dict(cls, d):
        return cls(list(d.keys()), list(d.values()))

    def as_dict(self):
        return dict(zip(self.values, self.probs))

    def cdf(self, z):
        return float(sum(p for v, p in zip(self.values, self.probs) if v <= z))

    def sample(self, rng):
        u = rng.random()
        i = int(np.searchsorted(self._cum, u, side="right"))
        return self.values[min(i, len(self.values) - 1)]

    def __repr__(self):
        return f"FinitePmf({dict(zip(self.values, self.probs))})"


def binomial_pmf(trials: int, p: float, shift: int = 0) -> FinitePmf:
    """Exact binomial pmf over shift..shift+trials."""
    if not 0.0 <= p <= 1.0 + 1e-12:
        raise ConfigError(f"binomial success probability {p} outside [0, 1]")
    p = min(p, 1.0)
    q = 1.0 - p
    vals, probs = [], []
    for j in range(trials + 1):
        vals.append(shift + j)
        probs.append(math.comb(trials, j) * p**j * q ** (trials - j))
    return FinitePmf(vals, probs)


@dataclass(frozen=True)
class NormalLaw(Distribution):
    mean: float
    var: float

    def __post_init__(self):
        if self.var < 0:
            raise ConfigError("variance must be nonnegative")

    def cdf(self, z):
        if self.var == 0:
            return 1.0 if z >= self.mean else 0.0
        return float(stats.norm.cdf(z, loc=self.mean, scale=math.sqrt(self.var)))

    def pdf(self, y):
        if self.var == 0:
            return 0.0
        return float(stats.norm.pdf(y, loc=self.mean, scale=math.sqrt(self.var)))

    def sample(self, rng):
        if self.var == 0:
            return self.mean
        return float(rng.normal(self.mean, math.sqrt(self.var)))


@dataclass(frozen=True)
class ShiftedPoisson(Distribution):
    """shift + Poisson(lam), support {shift, shift+1, ...}."""

    shift: float
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("poisson mean must be nonnegative")

    def cdf(self, z):
        return float(stats.poisson.cdf(math.floor(z - self.shift + 1e-12), self.lam))

    def sample(self, rng):
        return self.shift + int(rng.poisson(self.lam))


@dataclass(frozen=True)
class BetaSegment(Distribution):
    """lo + (1-lo) * Beta(a, b): a law on [lo, 1].

    b == 0 degenerates to a point mass at the upper endpoint 1; a == 0 to a
    point mass at lo (no mass left to add).
    """

    a: float
    b: float
    lo: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ConfigError("beta parameters must be nonnegative")
        if not 0.0 <= self.lo <= 1.0:
            raise ConfigError("beta segment start must lie in [0, 1]")

    def _degenerate(self):
        if self.lo >= 1.0 or self.a == 0:
            return PointMass(1.0 if self.lo >= 1.0 else self.lo)
        if self.b == 0:
            return PointMass(1.0)
        return None

    def cdf(self, z):
        d = self._degenerate()
        if d is not None:
            return d.cdf(z)
        y = (z - self.lo) / (1.0 - self.lo)
        return float(stats.beta.cdf(y, self.a, self.b))

    def pdf(self, z):
        d = self._degenerate()
        if d is not None:
            return 0.0
        y = (z - self.lo) / (1.0 - self.lo)
        return float(stats.beta.pdf(y, self.a, self.b) / (1.0 - self.lo))

    def sample(self, rng):
        d = self._degenerate()
        if d is not None:
            return d.value
        return self.lo + (1.0 - self.lo) * float(rng.beta(self.a, self.b))


class TwoStage(Distribution):
    """Composition of two continuous kernels: draw y from ``first`` then the
    final value from ``second_of(y)``.  The cdf integrates the second-stage
    cdf against the first-stage law by adaptive quadrature (abs tol 1e-8),
    with point masses handled exactly."""

    def __init__(self, first: Distribution, second_of):
        self.first = first
        self.second_of = second_of

    def sample(self, rng):
        y = self.first.sample(rng)
        return self.second_of(y).sample(rng)

    def cdf(self, z):
        first = self.first
        if isinstance(first, PointMass):
            return self.second_of(first.value).cdf(z)
        if isinstance(first, FinitePmf):
            return float(
                sum(p * self.second_of(v).cdf(z) for v, p in zip(first.values, first.probs))
            )
        if isinstance(first, NormalLaw):
            if first.var == 0:
                return self.second_of(first.mean).cdf(z)
            lo, hi = -np.inf, np.inf
            val, _ = integrate.quad(
                lambda y: self.second_of(y).cdf(z) * first.pdf(y),
                lo, hi, epsabs=COMPOSE_CDF_TOL, limit=200,
            )
            return float(val)
        if isinstance(first, BetaSegment):
            d = first._degenerate()
            if d is not None:
                return self.second_of(d.value).cdf(z)
            val, _ = integrate.quad(
                lambda y: self.second_of(y).cdf(z) * first.pdf(y),
                first.lo, 1.0, epsabs=COMPOSE_CDF_TOL, limit=200,
                points=[first.lo, 1.0],
            )
            return float(val)
        raise ConfigError(f"cannot integrate against {type(first).__name__}")


def convolve_dicts(a: dict, b: dict) -> dict:
    out: dict[float, float] = {}
    for va, pa in a.items():
        for vb, pb in b.items():
            k = _key(va + vb)
            out[k] = out.get(k, 0.0) + pa * pb
    return out


def compound_poisson_dict(lam: float, jump_values, jump_probs,
                          tail: float = 1e-13) -> dict:
    """Law of a Poisson(lam) number of iid jumps, as a dict pmf.

    The jump count is truncated where the Poisson tail drops below ``tail``;
    the returned weights are left sub-stochastic by that amount.
    """
    if lam < 0:
        raise ConfigError("compound poisson intensity must be nonnegative")
    base = {_key(v): float(p) for v, p in zip(jump_values, jump_probs)}
    if abs(sum(base.values()) - 1.0) > PMF_TOTAL_TOL:
        raise ConfigError("jump pmf must sum to 1")
    kmax = 0
    while stats.poisson.sf(kmax, lam) > tail:
        kmax += 1
    out = {0.0: math.exp(-lam)}
    power = {0.0: 1.0}
    weight = math.exp(-lam)
    for k in range(1, kmax + 1):
        power = convolve_dicts(power, base)
        weight = weight * lam / k
        for v, p in power.items():
            out[v] = out.get(v, 0.0) + weight * p
    return out


def tv_distance(a: dict, b: dict) -> float:
    """Total variation distance between two dict pmfs (sup over events)."""
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def pmf_csv_rows(dist) -> list[tuple[float, float]]:
    """(value, probability) rows for a finite law; raises otherwise."""
    if isinstance(dist, PointMass):
        return [(dist.value, 1.0)]
    if isinstance(dist, FinitePmf):
        return list(zip(dist.values, dist.probs))
    raise ConfigError("only finite laws export as CSV")
