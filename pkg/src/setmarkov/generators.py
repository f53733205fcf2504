"""One-parameter semigroups along flows, their closed-form generators, and
the operator identities that tie the two together.

A flow turns the set-indexed kernel into a one-parameter family of
transition operators driven entirely by the measure trace t -> m(f(t))
(piecewise linear between knots).  Finite-state kinds are represented by
matrices; the gaussian and dirichlet kinds by quadrature applied to callables
(Gauss-Hermite, resp. Gauss-Jacobi, which absorbs the beta endpoint
singularities into the weight).

Checks provided:

* finite-difference convergence of (T_{s,s+eps}h - h)/eps to the generator;
* the integral identity  T_{st}h - h = integral_s^t G_v T_{vt} h dv;
* matching of the generator integrals of two flows with shared endpoints;
* the permutation identities relating transport along two consistent
  orderings of the same lattice, in both transition-operator form (exact)
  and generator-integral form (quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special, stats

from .errors import ConfigError, UnsupportedKernelError
from .grid import measure_of
from .kernels import binomial_pmf
from .lattice import ConsistentOrdering, DiscreteFlow, flow_from_ordering

GAUSS_NODES = 32
GH_ORDER = 64
JACOBI_ORDER = 48
GAUSS_STENCIL = 1.0 / 512.0


class Trace:
    """Piecewise-linear nondecreasing measure trace along a flow."""

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ConfigError("trace needs matching 1-d times and values")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("trace times must be strictly increasing")
        if np.any(np.diff(self.values) < -1e-12):
            raise ConfigError("trace values must be nondecreasing")

    @classmethod
    def along_flow(cls, measure, flow: DiscreteFlow) -> "Trace":
        vals = [measure_of(measure, s) for s in flow.stages]
        return cls(flow.times, vals)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float) -> float:
        if not self.t0 - 1e-12 <= t <= self.t1 + 1e-12:
            raise ConfigError(f"time {t} outside trace domain")
        return float(np.interp(t, self.times, self.values))

    def _leg(self, t: float, side: str) -> int:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        on_knot = any(abs(t - k) < 1e-12 for k in self.times)
        if on_knot and side == "-":
            idx = int(np.searchsorted(self.times, t, side="left")) - 1
        return min(max(idx, 0), len(self.times) - 2)

    def slope(self, t: float, side: str = "+") -> float:
        """One-sided derivative; ``side`` resolves the knot ambiguity."""
        if side not in ("+", "-"):
            raise ConfigError("side must be '+' or '-'")
        k = self._leg(t, side)
        return float((self.values[k + 1] - self.values[k]) /
                     (self.times[k + 1] - self.times[k]))

    def breakpoints(self, s: float, t: float) -> list[float]:
        inner = [float(k) for k in self.times if s + 1e-12 < k < t - 1e-12]
        return [s] + inner + [t]


@lru_cache(maxsize=None)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _gauss_segment(a: float, b: float, order: int = GAUSS_NODES):
    x, w = _leggauss(order)
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    return mid + half * x, half * w


@lru_cache(maxsize=None)
def _hermite(order: int):
    z, w = special.roots_hermitenorm(order)
    return z, w / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=None)
def _jacobi01(order: int, a: float, c: float):
    """Nodes/weights on [0, 1] for the weight y^(a-1) (1-y)^(c-1),
    normalized to integrate the constant 1 to 1 (a beta expectation rule)."""
    x, w = special.roots_jacobi(order, c - 1.0, a - 1.0)
    y = (x + 1.0) / 2.0
    w = w / w.sum()
    return y, w


@lru_cache(maxsize=None)
def _jacobi01_raw(order: int, c: float):
    """Nodes/weights on [0, 1] for the weight (1-u)^(c-1), unnormalized."""
    x, w = special.roots_jacobi(order, c - 1.0, 0.0)
    u = (x + 1.0) / 2.0
    return u, w * 2.0 ** (-c)


class EmpiricalFlowSemigroup:
    """Binomial transition matrices along a flow of a size-n empirical process.

    The trace G(t) is the sampling probability of the flow stage; the success
    probability between s and t is (G(t)-G(s))/(1-G(s)).  ``corrupted``
    reproduces the broken kernel that skips the denominator.
    """

    finite_state = True

    def __init__(self, n: int, trace: Trace, corrupted: bool = False):
        self.n = n
        self.trace = trace
        self.corrupted = corrupted
        self.states = np.arange(n + 1)

    def success(self, s: float, t: float) -> float:
        gs, gt = self.trace(s), self.trace(t)
        if self.corrupted:
            return min(max(gt - gs, 0.0), 1.0)
        rest = 1.0 - gs
        if rest <= 1e-14:
            return 0.0
        return min(max(gt - gs, 0.0) / rest, 1.0)

    def matrix(self, s: float, t: float) -> np.ndarray:
        n = self.n
        p = self.success(s, t)
        M = np.zeros((n + 1, n + 1))
        for k in range(n + 1):
            for j, q in binomial_pmf(n - k, p).as_dict().items():
                M[k, k + j] = q
        return M

    def generator_matrix(self, s: float, side: str = "+") -> np.ndarray:
        n = self.n
        slope = self.trace.slope(s, side)
        if self.corrupted:
            rate = slope
        else:
            rest = 1.0 - self.trace(s)
            rate = 0.0 if slope == 0.0 else slope / rest
        G = np.zeros((n + 1, n + 1))
        for k in range(n):
            G[k, k] = -(n - k) * rate
            G[k, k + 1] = (n - k) * rate
        return G

    def apply(self, s, t, h):
        return self.matrix(s, t) @ np.asarray(h, dtype=float)

    def apply_generator(self, s, h, side="+"):
        return self.generator_matrix(s, side) @ np.asarray(h, dtype=float)

    def values(self, h):
        return np.asarray(h, dtype=float)

    def basis(self):
        eye = np.eye(self.n + 1)
        return [eye[k] for k in range(self.n + 1)] + [self.states.astype(float)]


class JumpFlowSemigroup:
    """Poisson / compound-poisson transition matrices along a flow, on the
    integer states 0..cap.  Jumps must be positive integers; the matrices are
    the exactly killed (sub-stochastic) restriction, so the generator/semigroup
    identities hold to machine precision on states that cannot reach the cap.
    """

    finite_state = True

    def __init__(self, trace: Trace, jump_values=(1,), jump_probs=(1.0,),
                 start_mass_cap: int = 0, tail: float = 1e-14):
        self.trace = trace
        jv = [int(v) for v in jump_values]
        if jv != list(jump_values) or any(v < 1 for v in jv):
            raise ConfigError("flow semigroup needs positive integer jumps")
        self.jump_values = tuple(jv)
        self.jump_probs = tuple(float(p) for p in jump_probs)
        self.tail = tail
        span = float(trace.values[-1] - trace.values[0])
        span_inc = self._increment(max(span, 1e-9))
        reach = max(span_inc) if span_inc else 0
        self.cap = int(start_mass_cap + reach)
        self.states = np.arange(self.cap + 1)
        self.probe_states = np.arange(0, max(self.cap - reach, 0) + 1)

    def _increment(self, lam: float) -> dict:
        from .distributions import compound_poisson_dict

        d = compound_poisson_dict(lam, self.jump_values, self.jump_probs, tail=self.tail)
        return {int(round(v)): p for v, p in d.items()}

    def matrix(self, s: float, t: float) -> np.ndarray:
        lam = max(self.trace(t) - self.trace(s), 0.0)
        size = self.cap + 1
        M = np.zeros((size, size))
        if lam == 0.0:
            return np.eye(size)
        inc = self._increment(lam)
        for i in range(size):
            for v, p in inc.items():
                if i + v <= self.cap:
                    M[i, i + v] = p
        return M

    def generator_matrix(self, s: float, side: str = "+") -> np.ndarray:
        rate = self.trace.slope(s, side)
        size = self.cap + 1
        G = np.zeros((size, size))
        for i in range(size):
            G[i, i] = -rate
            for v, p in zip(self.jump_values, self.jump_probs):
                if i + v <= self.cap:
                    G[i, i + v] = rate * p
        return G

    def apply(self, s, t, h):
        return self.matrix(s, t) @ np.asarray(h, dtype=float)

    def apply_generator(self, s, h, side="+"):
        return self.generator_matrix(s, side) @ np.asarray(h, dtype=float)

    def values(self, h):
        return np.asarray(h, dtype=float)[self.probe_states]

    def basis(self):
        out = []
        for k in self.probe_states[: min(len(self.probe_states), 6)]:
            e = np.zeros(self.cap + 1)
            e[k] = 1.0
            out.append(e)
        out.append(np.cos(self.states.astype(float)))
        return out


class GaussianFlowSemigroup:
    """Heat semigroup along a flow: convolution with a centered normal whose
    variance is the trace increment.  Transition operators act on callables
    via Gauss-Hermite quadrature; the generator is half the trace slope times
    a centered second difference with a fixed fine stencil."""

    finite_state = False

    def __init__(self, trace: Trace, stencil: float = GAUSS_STENCIL,
                 gh_order: int = GH_ORDER, probes=None):
        self.trace = trace
        self.stencil = stencil
        self.gh_order = gh_order
        if probes is None:
            sd = math.sqrt(max(float(trace.values[-1]), 1e-9))
            probes = np.linspace(-3.0 * sd, 3.0 * sd, 13)
        self.probes = np.asarray(probes, dtype=float)

    def apply(self, s, t, h):
        var = max(self.trace(t) - self.trace(s), 0.0)
        if var == 0.0:
            return h
        sd = math.sqrt(var)
        z, w = _hermite(self.gh_order)

        def out(x):
            return float(np.dot(w, [h(x + sd * zz) for zz in z]))

        return out

    def apply_generator(self, s, h, side="+"):
        slope = self.trace.slope(s, side)
        d = self.stencil

        def out(x):
            return 0.5 * slope * (h(x + d) - 2.0 * h(x) + h(x - d)) / (d * d)

        return out

    def values(self, h):
        if callable(h):
            return np.asarray([h(x) for x in self.probes])
        return np.asarray(h, dtype=float)

    def basis(self):
        return [np.sin, np.cos, lambda x: math.sin(1.7 * x + 0.3)]


class DirichletFlowSemigroup:
    """Beta-step semigroup of the Dirichlet process along a flow.

    The trace a(t) is the parameter mass of the growing stage; transitions
    from x are x + (1-x) * Beta(a(t)-a(s), total-a(t)), evaluated by a
    Gauss-Jacobi rule whose weight carries the beta endpoint singularities.
    The generator integral uses the substitution y = (1-x)u, after which the
    integrand is regular at u = 0 with limit (1-x) h'(x).
    """

    finite_state = False

    def __init__(self, trace: Trace, alpha_total: float,
                 order: int = JACOBI_ORDER, probes=None):
        if alpha_total <= 0:
            raise ConfigError("total parameter mass must be positive")
        if float(trace.values[-1]) > alpha_total + 1e-12:
            raise ConfigError("trace exceeds the total parameter mass")
        self.trace = trace
        self.alpha_total = alpha_total
        self.order = order
        if probes is None:
            probes = np.linspace(0.0, 0.9, 10)
        self.probes = np.asarray(probes, dtype=float)

    def apply(self, s, t, h):
        a = max(self.trace(t) - self.trace(s), 0.0)
        c = self.alpha_total - self.trace(t)
        if a == 0.0:
            return h
        if c <= 0.0:
            return lambda x: h(1.0)
        y, w = _jacobi01(self.order, a, c)

        def out(x):
            if x >= 1.0:
                return h(1.0)
            return float(np.dot(w, [h(x + (1.0 - x) * yy) for yy in y]))

        return out

    def apply_generator(self, s, h, side="+"):
        rate = self.trace.slope(s, side)
        c = self.alpha_total - self.trace(s)
        if c <= 0.0:
            raise ConfigError("generator undefined once the trace exhausts the mass")
        u, w = _jacobi01_raw(self.order, c)

        def out(x):
            if x >= 1.0:
                return 0.0
            scale = 1.0 - x

            def phi(uu):
                if uu < 1e-8:
                    du = 1e-6
                    return (h(x + scale * du) - h(x)) / du
                return (h(x + scale * uu) - h(x)) / uu

            return rate * float(np.dot(w, [phi(uu) for uu in u]))

        return out

    def values(self, h):
        if callable(h):
            return np.asarray([h(x) for x in self.probes])
        return np.asarray(h, dtype=float)

    def basis(self):
        return [lambda x: x, lambda x: x * x, lambda x: math.cos(2.0 * x)]


def system_along_flow(kernel, flow: DiscreteFlow):
    """Build the one-parameter semigroup of a kernel transported by a flow."""
    kind = kernel.kind
    if kind == "empirical":
        return EmpiricalFlowSemigroup(kernel.n, Trace.along_flow(kernel.F, flow),
                                      corrupted=kernel.corrupted)
    if kind == "gaussian":
        return GaussianFlowSemigroup(Trace.along_flow(kernel.lam, flow))
    if kind == "poisson":
        trace = Trace.along_flow(kernel.lam, flow)
        start = 0
        if kernel.initial == "poisson":
            start = int(stats.poisson.ppf(1.0 - 1e-13, max(trace.values[0], 1e-9)))
        return JumpFlowSemigroup(trace, start_mass_cap=start)
    if kind == "compound_poisson":
        trace = Trace.along_flow(kernel.lam, flow)
        return JumpFlowSemigroup(trace, kernel.jump_values, kernel.jump_probs)
    if kind == "dirichlet":
        return DirichletFlowSemigroup(Trace.along_flow(kernel.alpha, flow),
                                      kernel.alpha.total)
    raise UnsupportedKernelError(f"no flow semigroup for kernel kind {kind!r}")


def semigroup_apply(system, s: float, t: float, h):
    """(T_{st} h): matrix product for finite-state systems, quadrature
    otherwise.  h is a state vector or a callable accordingly."""
    if t < s:
        raise ConfigError("need s <= t")
    if t == s:
        return h
    return system.apply(s, t, h)


def closed_form_generator(system, s: float, h, side: str | None = None):
    """The generator at flow time s applied to h.

    At a trace knot the derivative is two-valued, so ``side`` ('+' or '-')
    must be chosen explicitly there; away from knots it is optional.
    """
    on_knot = any(abs(s - k) < 1e-12 for k in system.trace.times)
    if side is None:
        if on_knot:
            raise ConfigError(f"time {s} is a trace knot: pick side '+' or '-'")
        side = "+"
    return system.apply_generator(s, h, side)


def finite_difference_generator_errors(system, s: float, eps_list, h,
                                       side: str = "+") -> list[float]:
    """Sup-norm gaps between (T_{s,s+eps}h - h)/eps and the closed-form
    generator, one entry per eps (for convergence-order assertions)."""
    g = system.values(system.apply_generator(s, h, side))
    base = system.values(h)
    out = []
    for eps in eps_list:
        th = system.values(system.apply(s, s + eps, h))
        out.append(float(np.max(np.abs((th - base) / eps - g))))
    return out


def apply_through_knots(system, s: float, t: float, h):
    """T_{st} h composed leg by leg at the trace knots (identical to the
    direct operator when the family satisfies the composition law)."""
    pts = system.trace.breakpoints(s, t)
    out = h
    for a, b in zip(pts[-2::-1], pts[::-1]):
        out = system.apply(a, b, out)
    return out


def generator_integral(system, s: float, t: float, h, nodes: int = GAUSS_NODES,
                       knot_compose: bool = False):
    """integral_s^t G_v (T_{vt} h) dv as probe values, by composite Gauss
    quadrature split at the trace knots.  ``knot_compose`` makes the inner
    transition operator compose through the knots, which matters only for
    families that break the composition law."""
    pts = system.trace.breakpoints(s, t)
    acc = None
    for a, b in zip(pts, pts[1:]):
        xs, ws = _gauss_segment(a, b, nodes)
        for v, w in zip(xs, ws):
            if knot_compose:
                inner = apply_through_knots(system, v, t, h)
            else:
                inner = system.apply(v, t, h)
            term = w * system.values(system.apply_generator(v, inner))
            acc = term if acc is None else acc + term
    if acc is None:
        acc = np.zeros_like(system.values(h))
    return acc


def integral_identity_residual(system, s: float, t: float, h,
                               nodes: int = GAUSS_NODES) -> float:
    """Sup-norm residual of  T_{st}h - h = integral_s^t G_v T_{vt} h dv."""
    if t < s:
        raise ConfigError("need s <= t")
    if t == s:
        return 0.0
    lhs = system.values(system.apply(s, t, h)) - system.values(h)
    rhs = generator_integral(system, s, t, h, nodes)
    return float(np.max(np.abs(lhs - rhs)))


def generator_matching_defect(kernel, flow1: DiscreteFlow, span1, flow2: DiscreteFlow,
                              span2, h_list=None, nodes: int = GAUSS_NODES) -> float:
    """Two flows through the same pair of sets must have equal generator
    integrals over the matching spans (finite-state kernels; spans are knot
    index pairs)."""
    i1, j1 = span1
    i2, j2 = span2
    if flow1.stages[i1].mask != flow2.stages[i2].mask or \
            flow1.stages[j1].mask != flow2.stages[j2].mask:
        raise ConfigError("flow spans do not share endpoint sets")
    sys1 = system_along_flow(kernel, flow1)
    sys2 = system_along_flow(kernel, flow2)
    if not (sys1.finite_state and sys2.finite_state):
        raise UnsupportedKernelError("generator matching check needs finite-state kernels")
    hs = h_list if h_list is not None else sys1.basis()
    worst = 0.0
    for h in hs:
        v1 = generator_integral(sys1, flow1.times[i1], flow1.times[j1], h, nodes,
                                knot_compose=True)
        v2 = generator_integral(sys2, flow2.times[i2], flow2.times[j2], h, nodes,
                                knot_compose=True)
        worst = max(worst, float(np.max(np.abs(v1 - v2))))
    return worst


@dataclass
class PermutationIdentityResult:
    """Exact transition-operator defect and generator-form quadrature residual."""

    exact_defect: float
    generator_residual: float

    @property
    def defect(self) -> float:
        return max(self.exact_defect, self.generator_residual)


def _chain_distribution(mats, x_idx: int,
                        tol: float = 1e-16) -> list[tuple[float, tuple[int, ...]]]:
    """All state tuples of a matrix chain started at x_idx, with weights.

    Paths whose weight magnitude falls below ``tol`` are dropped; all matrix
    entries are O(1), so pruned paths cannot recover.
    """
    paths = [(1.0, (x_idx,))]
    for M in mats:
        new = []
        for p, ys in paths:
            row = M[ys[-1]]
            for j in np.nonzero(row)[0]:
                w = p * float(row[j])
                if abs(w) >= tol:
                    new.append((w, ys + (int(j),)))
        paths = new
    return paths


def permutation_identity_check(spec, ord1: ConsistentOrdering, ord2: ConsistentOrdering,
                               level: int, nodes: int = GAUSS_NODES,
                               support_tol: float = 1e-15) -> PermutationIdentityResult:
    """Transport along ordering 1 versus chained transport along ordering 2.

    ``level`` 2 compares the law of the first post-minimal increment of
    ordering 1 with the matching increment of ordering 2; level 3 does the
    same jointly for the first two increments.  Both orderings start at the
    shared minimal set.  Exact matrix algebra on one side; the other side is
    also expressed through generator integrals (quadrature residual).
    """
    if level not in (2, 3):
        raise ConfigError("only levels 2 and 3 are implemented")
    kernel = spec.kernel
    if not kernel.finite_state:
        raise UnsupportedKernelError("permutation identities need a finite-state kernel")
    n_slots = len(ord1)
    if level > n_slots:
        raise ConfigError("lattice too small for this level")
    pos2 = {s.mask: j for j, s in enumerate(ord2.sets)}
    try:
        tilde = [pos2[s.mask] for s in ord1.sets]
    except KeyError:
        raise ConfigError("orderings do not order the same lattice") from None

    def pi(i: int) -> int:  # 1-based slot map with the shared minimal set first
        return tilde[i - 1] + 1

    f_sys = system_along_flow(kernel, flow_from_ordering(ord1))
    g_sys = system_along_flow(kernel, flow_from_ordering(ord2))

    def Tg(i: int, j: int) -> np.ndarray:  # between 1-based slots of ordering 2
        if i == j:
            return np.eye(len(g_sys.states))
        return g_sys.matrix(float(i - 1), float(j - 1))

    mu = spec.initial_pmf()
    supp = [int(k) for k, p in sorted(mu.items()) if p > support_tol]
    states = np.asarray(f_sys.states)
    dim = len(states)
    eye = np.eye(dim)
    if dim > 8:
        # large truncated state spaces: probe the heaviest initial states and
        # a reduced indicator basis to keep the path enumeration tractable
        supp = [k for k, _ in sorted(mu.items(), key=lambda kv: -kv[1])[:6]]
        supp = sorted(int(k) for k in supp)
        h_basis = [eye[k] for k in range(6)] + [states.astype(float)]
    else:
        h_basis = [eye[k] for k in range(dim)] + [states.astype(float)]

    def gen_int_g(arrive_slot: int) -> np.ndarray:
        a, b = float(arrive_slot - 2), float(arrive_slot - 1)
        xs, ws = _gauss_segment(a, b, nodes)
        acc = np.zeros((dim, dim))
        for v, w in zip(xs, ws):
            acc += w * (g_sys.generator_matrix(v) @ g_sys.matrix(v, b))
        return acc

    def gen_int_f(leg_end_slot: int) -> np.ndarray:
        a, b = float(leg_end_slot - 2), float(leg_end_slot - 1)
        xs, ws = _gauss_segment(a, b, nodes)
        acc = np.zeros((dim, dim))
        for v, w in zip(xs, ws):
            acc += w * (f_sys.generator_matrix(v) @ f_sys.matrix(v, b))
        return acc

    exact = 0.0
    residual = 0.0

    if level == 2:
        a, b = pi(2) - 1, pi(2)
        T_f = f_sys.matrix(0.0, 1.0)
        Phi_f = gen_int_f(2)
        R_g = gen_int_g(b)
        chain_T = [Tg(1, a), Tg(a, b)]
        chain_R = [Tg(1, a), R_g]
        for x in supp:
            paths_T = _chain_distribution(chain_T, x)
            paths_R = _chain_distribution(chain_R, x)
            for h in h_basis:
                lhs = float(T_f[x] @ h)
                rhs = sum(p * h[x + ys[2] - ys[1]] for p, ys in paths_T)
                exact = max(exact, abs(lhs - rhs))
                lhs_g = float(Phi_f[x] @ h)
                rhs_g = sum(p * h[x + ys[2] - ys[1]] for p, ys in paths_R)
                residual = max(residual, abs(lhs_g - rhs_g))
        return PermutationIdentityResult(exact, residual)

    # level 3
    p2a, p2b = pi(2) - 1, pi(2)
    p3a, p3b = pi(3) - 1, pi(3)
    times = sorted(set([p2a, p2b, p3a, p3b]))
    idx_of = {t: i + 1 for i, t in enumerate(times)}  # position within a path tuple
    chain = [Tg(1, times[0])] + [Tg(u, v) for u, v in zip(times, times[1:])]
    arrive_step = idx_of[p3b] - 1  # which matrix lands on slot pi(3)
    chain_R = list(chain)
    chain_R[arrive_step] = gen_int_g(p3b)
    last_is_insertion = p3b == max(times)
    T_f23 = f_sys.matrix(1.0, 2.0)
    Phi_f3 = gen_int_f(3)
    chain_2 = [Tg(1, p2a), Tg(p2a, p2b)]
    pairs = [(h2, h3) for h2 in h_basis for h3 in h_basis]
    for x in supp:
        paths2 = _chain_distribution(chain_2, x)
        paths4 = _chain_distribution(chain, x)
        paths4R = _chain_distribution(chain_R, x)

        def deltas(ys):
            y = {1: x}
            for t, i in idx_of.items():
                y[t] = ys[i]
            return y[p2b] - y[p2a], y[p3b] - y[p3a]

        for h2, h3 in pairs:
            lhs = sum(p * h2[ys[2] - ys[1]] * float(T_f23[x + ys[2] - ys[1]] @ h3)
                      for p, ys in paths2)
            rhs = 0.0
            for p, ys in paths4:
                d2, d3 = deltas(ys)
                rhs += p * h2[d2] * h3[x + d2 + d3]
            exact = max(exact, abs(lhs - rhs))

            lhs_g = sum(p * h2[ys[2] - ys[1]] * float(Phi_f3[x + ys[2] - ys[1]] @ h3)
                        for p, ys in paths2)
            rhs_g = 0.0
            for p, ys in paths4R:
                d2, d3 = deltas(ys)
                tail = h3[x + d2 + d3]
                if not last_is_insertion:
                    tail -= h3[x + d2]
                rhs_g += p * h2[d2] * tail
            residual = max(residual, abs(lhs_g - rhs_g))
    return PermutationIdentityResult(exact, residual)
