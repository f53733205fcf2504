"""Transition systems between nested set unions.

A kernel maps (B, B', x) with B a subset of B' to the conditional law of the
process value at B' given value x at B.  Four built-in families:

* independent-increment kinds (gaussian / poisson / compound poisson), whose
  law depends on (B, B') only through the intensity of B' minus B;
* the size-n empirical process (binomial steps, states stored as integer
  counts and displayed as count/n);
* the Dirichlet process (beta steps on [0, 1]).

The empirical kernel has a ``corrupted`` switch that drops the conditioning
denominator from the success probability; it deliberately violates the
composition law and is used to show the checks have power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .distributions import (
    BetaSegment,
    FinitePmf,
    NormalLaw,
    PointMass,
    ShiftedPoisson,
    TwoStage,
    binomial_pmf,
    canonical_value,
    compound_poisson_dict,
    tv_distance,
)
from .errors import ConfigError, UnsupportedKernelError
from .grid import CellMeasure, GroundGrid, measure_of
from .lattice import IndexedSet

PROBE_POINTS = 101


def _require_nested(B: IndexedSet, B2: IndexedSet):
    if not B.issubset(B2):
        raise ConfigError("kernel evaluation needs B contained in B'")


class TransitionKernel:
    """Shared plumbing for the built-in kernel families.

    Internal machinery works on *internal states* (integer counts for the
    empirical kernel, reals otherwise); ``display`` converts to user units.
    """

    kind = "abstract"
    finite_state = False

    grid: GroundGrid

    def display(self, state):
        return float(state)

    def step_pmf(self, B, B2, state) -> dict:
        raise UnsupportedKernelError(f"{self.kind} kernel is not finite-state")

    def increment_pmf(self, B, B2, state) -> dict:
        """Law of (value at B2) - (value at B) given the value at B."""
        raise UnsupportedKernelError(f"{self.kind} kernel is not finite-state")

    def initial_pmf_for(self, min_set) -> dict:
        raise UnsupportedKernelError(f"{self.kind} kernel has no finite initial pmf")

    def step_sample(self, rng, B, B2, state):
        raise NotImplementedError

    def initial_sample_for(self, rng, min_set):
        raise NotImplementedError

    def law(self, B, B2, x):
        raise NotImplementedError

    def describe_initial(self, min_set=None) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class EmpiricalKernel(TransitionKernel):
    """n points drawn iid from F; the state at B counts the points inside B."""

    n: int
    F: CellMeasure
    corrupted: bool = False

    kind = "empirical"
    finite_state = True

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("empirical size must be >= 1")
        if self.F.kind != "probability":
            raise ConfigError("empirical kernel needs a probability measure")

    @property
    def grid(self):
        return self.F.grid

    def display(self, state):
        return state / self.n

    def to_count(self, x) -> int:
        k = int(round(x * self.n))
        if not 0 <= k <= self.n or abs(x * self.n - k) > 1e-9:
            raise ConfigError(f"{x} is not a multiple of 1/{self.n} in [0, 1]")
        return k

    def success_probability(self, B, B2) -> float:
        inc = measure_of(self.F, B2 - B)
        if self.corrupted:
            return min(inc, 1.0)
        rest = 1.0 - measure_of(self.F, B)
        if rest <= 1e-15:
            return 0.0
        return min(inc / rest, 1.0)

    def step_pmf(self, B, B2, state) -> dict:
        _require_nested(B, B2)
        k = int(state)
        if B.mask == B2.mask:
            return {k: 1.0}
        p = self.success_probability(B, B2)
        return binomial_pmf(self.n - k, p, shift=k).as_dict()

    def increment_pmf(self, B, B2, state) -> dict:
        _require_nested(B, B2)
        k = int(state)
        if B.mask == B2.mask:
            return {0: 1.0}
        p = self.success_probability(B, B2)
        return binomial_pmf(self.n - k, p).as_dict()

    def initial_pmf_for(self, min_set: IndexedSet) -> dict:
        return binomial_pmf(self.n, measure_of(self.F, min_set)).as_dict()

    def step_sample(self, rng, B, B2, state):
        k = int(state)
        if B.mask == B2.mask:
            return k
        p = self.success_probability(B, B2)
        return k + int(rng.binomial(self.n - k, p))

    def initial_sample_for(self, rng, min_set):
        return int(rng.binomial(self.n, measure_of(self.F, min_set)))

    def law(self, B, B2, x):
        pmf = self.step_pmf(B, B2, self.to_count(x))
        return FinitePmf([self.display(v) for v in pmf], list(pmf.values()))

    def describe_initial(self, min_set=None) -> str:
        p = "F(min)" if min_set is None else f"{measure_of(self.F, min_set):.6g}"
        return f"binomial(n={self.n}, p={p}) / n"


@dataclass(frozen=True)
class GaussianIncrementKernel(TransitionKernel):
    """Independent gaussian increments with variance measure ``lam``."""

    lam: CellMeasure
    initial: str = "normal"  # or "zero"

    kind = "gaussian"
    finite_state = False

    def __post_init__(self):
        if self.initial not in ("normal", "zero"):
            raise ConfigError("gaussian initial law must be 'normal' or 'zero'")

    @property
    def grid(self):
        return self.lam.grid

    def law(self, B, B2, x):
        _require_nested(B, B2)
        var = measure_of(self.lam, B2 - B)
        if var == 0:
            return PointMass(float(x))
        return NormalLaw(float(x), var)

    def step_sample(self, rng, B, B2, state):
        var = measure_of(self.lam, B2 - B)
        if var == 0:
            return float(state)
        return float(state) + float(rng.normal(0.0, math.sqrt(var)))

    def initial_law_for(self, min_set):
        if self.initial == "zero":
            return PointMass(0.0)
        return NormalLaw(0.0, measure_of(self.lam, min_set))

    def initial_sample_for(self, rng, min_set):
        return self.initial_law_for(min_set).sample(rng)

    def describe_initial(self, min_set=None) -> str:
        if self.initial == "zero":
            return "point mass at 0"
        return "normal(0, intensity(min))"


@dataclass(frozen=True)
class PoissonIncrementKernel(TransitionKernel):
    """Independent poisson increments with mean measure ``lam``."""

    lam: CellMeasure
    initial: str = "poisson"  # or "zero"

    kind = "poisson"
    finite_state = True  # integer states; exact tables use a tail truncation

    def __post_init__(self):
        if self.initial not in ("poisson", "zero"):
            raise ConfigError("poisson initial law must be 'poisson' or 'zero'")

    @property
    def grid(self):
        return self.lam.grid

    def law(self, B, B2, x):
        _require_nested(B, B2)
        mean = measure_of(self.lam, B2 - B)
        if mean == 0:
            return PointMass(float(x))
        return ShiftedPoisson(float(x), mean)

    def step_pmf(self, B, B2, state, tail: float = 1e-13) -> dict:
        _require_nested(B, B2)
        return {state + j: p for j, p in self.increment_pmf(B, B2, state, tail).items()}

    def increment_pmf(self, B, B2, state=0, tail: float = 1e-13) -> dict:
        _require_nested(B, B2)
        mean = measure_of(self.lam, B2 - B)
        if mean == 0:
            return {0: 1.0}
        kmax = 0
        while stats.poisson.sf(kmax, mean) > tail:
            kmax += 1
        probs = stats.poisson.pmf(np.arange(kmax + 1), mean)
        return {j: float(probs[j]) for j in range(kmax + 1)}

    def initial_pmf_for(self, min_set, tail: float = 1e-13) -> dict:
        if self.initial == "zero":
            return {0: 1.0}
        mean = measure_of(self.lam, min_set)
        full = IndexedSet(self.grid, 0)
        return self.step_pmf(full, min_set, 0, tail=tail) if mean > 0 else {0: 1.0}

    def step_sample(self, rng, B, B2, state):
        mean = measure_of(self.lam, B2 - B)
        if mean == 0:
            return state
        return state + int(rng.poisson(mean))

    def initial_sample_for(self, rng, min_set):
        if self.initial == "zero":
            return 0
        return int(rng.poisson(measure_of(self.lam, min_set)))

    def describe_initial(self, min_set=None) -> str:
        if self.initial == "zero":
            return "point mass at 0"
        return "poisson(intensity(min))"


@dataclass(frozen=True)
class CompoundPoissonKernel(TransitionKernel):
    """Independent compound-poisson increments: a poisson number of iid jumps
    from a finite jump pmf, intensity measure ``lam``."""

    lam: CellMeasure
    jump_values: tuple[float, ...]
    jump_probs: tuple[float, ...]
    initial: str = "compound"  # or "zero"

    kind = "compound_poisson"
    finite_state = True

    def __post_init__(self):
        if len(self.jump_values) != len(self.jump_probs) or not self.jump_values:
            raise ConfigError("jump pmf needs matching nonempty values and probs")
        if abs(sum(self.jump_probs) - 1.0) > 1e-12:
            raise ConfigError("jump pmf must sum to 1")
        if self.initial not in ("compound", "zero"):
            raise ConfigError("compound poisson initial law must be 'compound' or 'zero'")

    @property
    def grid(self):
        return self.lam.grid

    def step_pmf(self, B, B2, state) -> dict:
        _require_nested(B, B2)
        # canonical float keys so composed sums merge with direct ones
        return {canonical_value(state + v): p
                for v, p in self.increment_pmf(B, B2, state).items()}

    def increment_pmf(self, B, B2, state=0.0) -> dict:
        _require_nested(B, B2)
        mean = measure_of(self.lam, B2 - B)
        if mean == 0:
            return {0.0: 1.0}
        return compound_poisson_dict(mean, self.jump_values, self.jump_probs)

    def initial_pmf_for(self, min_set) -> dict:
        if self.initial == "zero":
            return {0.0: 1.0}
        mean = measure_of(self.lam, min_set)
        return compound_poisson_dict(mean, self.jump_values, self.jump_probs)

    def law(self, B, B2, x):
        pmf = self.step_pmf(B, B2, float(x))
        vals = list(pmf.keys())
        probs = np.array(list(pmf.values()))
        probs = probs / probs.sum()  # renormalize truncation for the public law
        return FinitePmf(vals, probs)

    def step_sample(self, rng, B, B2, state):
        mean = measure_of(self.lam, B2 - B)
        if mean == 0:
            return state
        count = int(rng.poisson(mean))
        if count == 0:
            return state
        draws = rng.choice(len(self.jump_values), size=count, p=self.jump_probs)
        return state + float(sum(self.jump_values[i] for i in draws))

    def initial_sample_for(self, rng, min_set):
        if self.initial == "zero":
            return 0.0
        full = IndexedSet(self.grid, 0)
        return self.step_sample(rng, full, min_set, 0.0)

    def describe_initial(self, min_set=None) -> str:
        if self.initial == "zero":
            return "point mass at 0"
        return "compound poisson(intensity(min))"


@dataclass(frozen=True)
class DirichletKernel(TransitionKernel):
    """Dirichlet random probability measure with parameter measure ``alpha``;
    states live in [0, 1] and the value at the whole grid is 1."""

    alpha: CellMeasure

    kind = "dirichlet"
    finite_state = False

    def __post_init__(self):
        if self.alpha.kind != "dirichlet":
            raise ConfigError("dirichlet kernel needs a dirichlet parameter measure")

    @property
    def grid(self):
        return self.alpha.grid

    def law(self, B, B2, x):
        _require_nested(B, B2)
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise ConfigError("dirichlet state must lie in [0, 1]")
        if x >= 1.0:
            return PointMass(1.0)
        a = measure_of(self.alpha, B2 - B)
        b = measure_of(self.alpha, B2.complement())
        if a == 0 and b == 0:
            return PointMass(x)
        return BetaSegment(a, b, lo=x)

    def step_sample(self, rng, B, B2, state):
        x = float(state)
        if x >= 1.0:
            return 1.0
        a = measure_of(self.alpha, B2 - B)
        b = measure_of(self.alpha, B2.complement())
        if a == 0:
            return x
        if b == 0:
            return 1.0
        return x + (1.0 - x) * float(rng.beta(a, b))

    def initial_law_for(self, min_set):
        a = measure_of(self.alpha, min_set)
        b = measure_of(self.alpha, min_set.complement())
        return BetaSegment(a, b, lo=0.0)

    def initial_sample_for(self, rng, min_set):
        return self.initial_law_for(min_set).sample(rng)

    def describe_initial(self, min_set=None) -> str:
        return "beta(alpha(min), alpha(min complement))"


def kernel_eval(kernel: TransitionKernel, B: IndexedSet, B2: IndexedSet, x):
    """Conditional law of the value at B2 given value x at B, in display units."""
    _require_nested(B, B2)
    if B.mask == B2.mask:
        return PointMass(float(x))
    return kernel.law(B, B2, x)


def compose_kernels(kernel, B, B1, B2, x):
    """Chain the kernel through an intermediate set: B -> B1 -> B2.

    Exact pmf composition for finite-state kinds; a sampling/quadrature
    ``TwoStage`` law for the continuous kinds.
    """
    _require_nested(B, B1)
    _require_nested(B1, B2)
    if kernel.finite_state:
        if kernel.kind == "empirical":
            k = kernel.to_count(x)
            first = kernel.step_pmf(B, B1, k)
            out: dict = {}
            for y, p in first.items():
                for z, q in kernel.step_pmf(B1, B2, y).items():
                    out[z] = out.get(z, 0.0) + p * q
            return FinitePmf([kernel.display(v) for v in out], list(out.values()))
        first = kernel.step_pmf(B, B1, float(x))
        out = {}
        for y, p in first.items():
            for z, q in kernel.step_pmf(B1, B2, y).items():
                out[z] = out.get(z, 0.0) + p * q
        total = sum(out.values())
        return FinitePmf(list(out.keys()), [v / total for v in out.values()])
    first = kernel_eval(kernel, B, B1, x)
    return TwoStage(first, lambda y: kernel_eval(kernel, B1, B2, y))


@dataclass
class CkResult:
    """Chapman-Kolmogorov defect, with Monte Carlo error bars when sampled."""

    defect: float
    se: float | None = None

    @property
    def sigmas(self) -> float | None:
        if self.se is None:
            return None
        return self.defect / max(self.se, 1e-300)


def _probe_grid_gaussian(kernel, B, B2, x):
    var = max(measure_of(kernel.lam, B2 - B), 1e-12)
    half = 5.0 * math.sqrt(var)
    return np.linspace(x - half, x + half, PROBE_POINTS)


def ck_defect(kernel, B, B1, B2, states, mc: tuple[int, int] | None = None) -> CkResult:
    """Deviation of the two-step composition from the direct kernel.

    Finite-state kinds: exact total-variation distance, maximized over
    ``states``.  Gaussian: sup over a 101-point probe grid of the quadrature
    cdf of the composition against the closed-form direct cdf.  Dirichlet:
    Monte Carlo with ``mc=(seed, count)`` two-stage draws against the direct
    cdf, reported with a binomial standard error.
    """
    worst = 0.0
    worst_se = None
    worst_sigmas = -1.0
    for x in states:
        if kernel.finite_state:
            # exact comparison on internal states via the truncated pmfs
            k0 = kernel.to_count(x) if kernel.kind == "empirical" else x
            direct_pmf = kernel.step_pmf(B, B2, k0)
            composed_pmf: dict = {}
            for y, p in kernel.step_pmf(B, B1, k0).items():
                for z, q in kernel.step_pmf(B1, B2, y).items():
                    composed_pmf[z] = composed_pmf.get(z, 0.0) + p * q
            worst = max(worst, tv_distance(composed_pmf, direct_pmf))
            continue
        direct = kernel_eval(kernel, B, B2, x)
        if kernel.kind == "dirichlet" and mc is not None:
            # two-stage sampling against the direct cdf, compared at the
            # direct law's deciles (exact reference probabilities, so each
            # probe has a known binomial standard error)
            if not isinstance(direct, BetaSegment):
                continue  # degenerate point mass: both routes are exact
            seed, count = mc
            rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 7]))
            mid = kernel_eval(kernel, B, B1, x)
            ys = np.asarray([mid.sample(rng) for _ in range(count)])
            zs = np.asarray([kernel.step_sample(rng, B1, B2, y) for y in ys])
            levels = np.linspace(0.1, 0.9, 9)
            probes = np.asarray([direct.lo + (1.0 - direct.lo) *
                                 stats.beta.ppf(q, direct.a, direct.b)
                                 for q in levels])
            emp = np.searchsorted(np.sort(zs), probes, side="right") / count
            gaps = np.abs(emp - levels)
            ses = np.sqrt(levels * (1 - levels) / count)
            i = int(np.argmax(gaps / ses))
            if gaps[i] / ses[i] > worst_sigmas:
                worst_sigmas = float(gaps[i] / ses[i])
                worst, worst_se = float(gaps[i]), float(ses[i])
            continue
        composed = compose_kernels(kernel, B, B1, B2, x)
        if kernel.kind == "gaussian":
            probes = _probe_grid_gaussian(kernel, B, B2, x)
        else:
            probes = np.linspace(0.0, 1.0, PROBE_POINTS)
        d = max(abs(composed.cdf(z) - direct.cdf(z)) for z in probes)
        worst = max(worst, d)
    return CkResult(worst, worst_se)
