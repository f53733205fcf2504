"""Executable consistency and Markov-property checks.

Every check reduces a claim about the process to a total-variation defect
computed from exact joint tables (finite-state kernels) or to a probability
gap with Monte Carlo error bars (continuous kernels, fixed seeds).  A zero
defect (up to float rounding) means the claim holds on that instance; the
deliberately corrupted kernel and the initial-draw mixture process exist to
show the defects are not vacuously small.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construction import (
    FddSpec,
    MixtureSpec,
    decompose_over_lefts,
    exact_fdd,
    sample_increments,
)
from .distributions import tv_distance
from .errors import ConfigError, UnsupportedKernelError
from .lattice import (
    ConsistentOrdering,
    DiscreteFlow,
    IndexedSet,
    close_under_intersection,
    embed_chain,
    left_neighbourhoods,
)

MIN_CONDITION_PROB = 1e-12


@dataclass
class ConditionalCheck:
    """Max conditional TV defect, with the count of skipped tiny events."""

    defect: float
    skipped: int
    events: int


@dataclass
class McDefect:
    """Largest probability gap over the probe events, in absolute terms and
    in units of its Monte Carlo standard error."""

    defect: float
    se: float
    sigmas: float


def conditional_independence_defect(law, target_fn, history_fn, present_fn,
                                    min_prob: float = MIN_CONDITION_PROB) -> ConditionalCheck:
    """TV distance between law(target | history) and law(target | present),
    maximized over history outcomes of probability >= min_prob."""
    hist: dict = {}
    pres: dict = {}
    for key, p in law.table.items():
        t = target_fn(key)
        h = history_fn(key)
        g = present_fn(key)
        hist.setdefault(h, [0.0, {}, g])
        hist[h][0] += p
        hist[h][1][t] = hist[h][1].get(t, 0.0) + p
        pres.setdefault(g, [0.0, {}])
        pres[g][0] += p
        pres[g][1][t] = pres[g][1].get(t, 0.0) + p
    defect = 0.0
    skipped = 0
    for h, (ph, table, g) in hist.items():
        if ph < min_prob:
            skipped += 1
            continue
        pg, gtable = pres[g]
        cond_h = {t: v / ph for t, v in table.items()}
        cond_g = {t: v / pg for t, v in gtable.items()}
        defect = max(defect, tv_distance(cond_h, cond_g))
    return ConditionalCheck(defect, skipped, len(hist))


def align_variables(lefts_a, lefts_b) -> tuple[int, ...]:
    """perm with lefts_b.sets[perm[i]] equal (as a set) to lefts_a.sets[i]."""
    used = [False] * len(lefts_b.sets)
    perm = []
    for c in lefts_a.sets:
        for j, d in enumerate(lefts_b.sets):
            if not used[j] and d.mask == c.mask:
                used[j] = True
                perm.append(j)
                break
        else:
            raise ConfigError("left neighbourhood multisets differ between orderings")
    return tuple(perm)


def canonical_variable_order(ordering: ConsistentOrdering) -> tuple[int, ...]:
    """Column permutation putting the ordering's left neighbourhoods into the
    ordering-independent (popcount, mask) order."""
    lefts = left_neighbourhoods(ordering)
    idx = sorted(range(len(lefts.sets)),
                 key=lambda i: (lefts.sets[i].size, lefts.sets[i].mask))
    return tuple(idx)


def aligned_increment_samples(spec, ordering, seed: int, count: int) -> np.ndarray:
    """Sampled increments with columns in the canonical variable order.

    Column streams are keyed by the canonical variable id, so two orderings
    of the same lattice reuse the same uniforms variable-by-variable; under
    an ordering-invariant law the sampled vectors then nearly coincide and
    the Monte Carlo comparison loses almost no power to noise.
    """
    canon = canonical_variable_order(ordering)
    rank = {col: r for r, col in enumerate(canon)}
    keys = [rank[i] for i in range(len(ordering))]
    arr = sample_increments(spec.with_ordering(ordering), seed, count, step_keys=keys)
    return arr[:, list(canon)]


def mc_event_probabilities(aligned: np.ndarray, medians: np.ndarray,
                           quartiles: np.ndarray) -> np.ndarray:
    """Probabilities of the probe events: every nonempty AND-combination of
    per-variable median half-lines, plus per-variable quartile half-lines."""
    count, d = aligned.shape
    below = aligned <= medians  # (count, d)
    probs = []
    for mask in range(1, 1 << d):
        sel = [j for j in range(d) if (mask >> j) & 1]
        probs.append(float(below[:, sel].all(axis=1).mean()))
    for j in range(d):
        for q in quartiles[:, j]:
            probs.append(float((aligned[:, j] <= q).mean()))
    return np.asarray(probs)


def mc_probe_thresholds(aligned: np.ndarray):
    medians = np.quantile(aligned, 0.5, axis=0)
    quartiles = np.quantile(aligned, [0.25, 0.75], axis=0)
    return medians, quartiles


def probability_gap(p1: np.ndarray, p2: np.ndarray, count: int) -> McDefect:
    gaps = np.abs(p1 - p2)
    pbar = np.clip((p1 + p2) / 2.0, 0.0, 1.0)
    se = np.sqrt(np.maximum(pbar * (1 - pbar), 1e-12) * (2.0 / count))
    i = int(np.argmax(gaps / se))
    return McDefect(float(gaps[i]), float(se[i]), float(gaps[i] / se[i]))


def ordering_invariance_defect(spec, ord1: ConsistentOrdering, ord2: ConsistentOrdering,
                               mc: tuple[int, int] | None = None):
    """Invariance of the increment joint law under the choice of consistent
    ordering.  Exact TV distance for finite-state kernels; otherwise Monte
    Carlo with mc=(seed, count), reporting the worst probe-event gap."""
    if ord1.lattice is not ord2.lattice and ord1.lattice.members != ord2.lattice.members:
        raise ConfigError("orderings do not order the same lattice")
    finite = spec.kernel.finite_state
    if finite and mc is None:
        law1 = exact_fdd(spec.with_ordering(ord1))
        law2 = exact_fdd(spec.with_ordering(ord2))
        perm = align_variables(left_neighbourhoods(ord1), left_neighbourhoods(ord2))
        return law1.tv(law2.permuted(perm))
    if mc is None:
        raise UnsupportedKernelError(
            f"{spec.kernel.kind} kernel needs mc=(seed, count) for this check"
        )
    seed, count = mc
    a1 = aligned_increment_samples(spec, ord1, seed, count)
    a2 = aligned_increment_samples(spec, ord2, seed, count)
    medians, quartiles = mc_probe_thresholds(a1)
    p1 = mc_event_probabilities(a1, medians, quartiles)
    p2 = mc_event_probabilities(a2, medians, quartiles)
    return probability_gap(p1, p2, count)


def _generators_of_prefix(spec, B) -> tuple[list[IndexedSet], int]:
    mask = getattr(B, "mask", B)
    ordering = spec.ordering
    for k, pm in enumerate(ordering.prefix_masks):
        if pm == mask:
            return list(ordering.sets[: k + 1]), k
    raise ConfigError("B is not a prefix union of the spec's ordering")


def _sub_spec(spec, lattice):
    if isinstance(spec, MixtureSpec):
        comps = tuple(FddSpec(lattice, c.kernel, None, c.initial) for c in spec.components)
        return MixtureSpec(comps, spec.weights)
    return FddSpec(lattice, spec.kernel, None, spec.initial)


def set_markov_defect(spec, A: IndexedSet, B, partition,
                      min_prob: float = MIN_CONDITION_PROB) -> ConditionalCheck:
    """Conditional independence of the increment over A minus B from the
    history of B (observed through the given partition) given the value at B.

    B must be a prefix union of the spec's ordering; the partition lists the
    left-neighbourhood cells of B whose values generate the history.
    """
    gens, _ = _generators_of_prefix(spec, B)
    minimal = close_under_intersection([g for g in gens if g.mask] + [A])
    sub = _sub_spec(spec, minimal)
    law = exact_fdd(sub)
    lefts = sub.lefts
    b_mask = getattr(B, "mask", B)
    target_idx = decompose_over_lefts(lefts, A.mask & ~b_mask)
    part_idx = [decompose_over_lefts(lefts, p) for p in partition]
    b_idx = decompose_over_lefts(lefts, b_mask)

    def target(key):
        return sum(key[i] for i in target_idx)

    def history(key):
        return tuple(sum(key[i] for i in g) for g in part_idx)

    def present(key):
        return sum(key[i] for i in b_idx)

    return conditional_independence_defect(law, target, history, present, min_prob)


def increment_vector_independence_defect(spec, B, a_list,
                                         min_prob: float = MIN_CONDITION_PROB) -> ConditionalCheck:
    """Joint version: the vector of increments over A_i minus B is
    conditionally independent of all of B's increment history given the
    value at B."""
    gens, _ = _generators_of_prefix(spec, B)
    minimal = close_under_intersection([g for g in gens if g.mask] + list(a_list))
    sub = _sub_spec(spec, minimal)
    law = exact_fdd(sub)
    lefts = sub.lefts
    b_mask = getattr(B, "mask", B)
    target_groups = [decompose_over_lefts(lefts, a.mask & ~b_mask) for a in a_list]
    hist_idx = [i for i, c in enumerate(lefts.sets) if c.mask and c.mask & ~b_mask == 0]

    def target(key):
        return tuple(sum(key[i] for i in g) for g in target_groups)

    def history(key):
        return tuple(key[i] for i in hist_idx)

    def present(key):
        return sum(key[i] for i in hist_idx)

    return conditional_independence_defect(law, target, history, present, min_prob)


def flow_markov_defect(spec, flow: DiscreteFlow,
                       min_prob: float = MIN_CONDITION_PROB) -> ConditionalCheck:
    """Classical Markov property of the process transported along the flow:
    at every knot, the next stage value depends on the past stages only
    through the current one.  Maximized over all knot pairs s < t."""
    ordering, prefixes = embed_chain(flow.stages, spec.lattice)
    law = exact_fdd(spec.with_ordering(ordering))
    m = len(flow.stages)
    defect, skipped, events = 0.0, 0, 0
    for t in range(1, m):
        for s in range(t):
            def target(key, _t=t):
                return sum(key[: prefixes[_t] + 1])

            def history(key, _s=s):
                return tuple(sum(key[: prefixes[l] + 1]) for l in range(_s + 1))

            def present(key, _s=s):
                return sum(key[: prefixes[_s] + 1])

            c = conditional_independence_defect(law, target, history, present, min_prob)
            defect = max(defect, c.defect)
            skipped += c.skipped
            events += c.events
    return ConditionalCheck(defect, skipped, events)


def compose_along_knots(kernel, stages, x) -> dict:
    """Exact pmf of the endpoint value after chaining the kernel through the
    consecutive stages, starting from internal state x at stages[0]."""
    pmf = {x: 1.0}
    for a, b in zip(stages, stages[1:]):
        if a.mask == b.mask:
            continue
        out: dict = {}
        for y, p in pmf.items():
            for z, q in kernel.step_pmf(a, b, y).items():
                out[z] = out.get(z, 0.0) + p * q
        pmf = out
    return pmf


def flow_matching_defect(kernel, flow1: DiscreteFlow, span1, flow2: DiscreteFlow, span2,
                         states) -> float:
    """Two flows passing through the same pair of sets must transport a state
    identically: TV distance between the two knot-chain compositions,
    maximized over the probe states.  Finite-state kernels."""
    i1, j1 = span1
    i2, j2 = span2
    if flow1.stages[i1].mask != flow2.stages[i2].mask or \
            flow1.stages[j1].mask != flow2.stages[j2].mask:
        raise ConfigError("flow spans do not share endpoint sets")
    if not kernel.finite_state:
        raise UnsupportedKernelError("flow matching check needs a finite-state kernel")
    worst = 0.0
    for x in states:
        p1 = compose_along_knots(kernel, flow1.stages[i1: j1 + 1], x)
        p2 = compose_along_knots(kernel, flow2.stages[i2: j2 + 1], x)
        worst = max(worst, tv_distance(p1, p2))
    return worst
