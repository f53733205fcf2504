"""The check suite behind the ``validate`` and ``gencheck`` subcommands.

Each check produces one report row {name, instance, defect, tolerance, pass};
the suite passes when every row does.  Exact checks use the ``exact``
tolerance, quadrature-backed ones ``quadrature`` (``dirichlet_quadrature``
where two quadratures stack), Monte Carlo ones ``mc_sigmas`` standard errors.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special, stats

from .construction import (
    MixtureSpec,
    exact_fdd,
    joint_over_increments,
    sample_increments,
)
from .distributions import binomial_pmf, tv_distance
from .errors import ConfigError
from .generators import (
    finite_difference_generator_errors,
    generator_matching_defect,
    integral_identity_residual,
    permutation_identity_check,
    system_along_flow,
)
from .grid import measure_of
from .kernels import ck_defect
from .lattice import (
    DiscreteFlow,
    enumerate_consistent_orderings,
    flow_from_ordering,
    left_neighbourhoods,
)
from .verify import (
    align_variables,
    aligned_increment_samples,
    flow_matching_defect,
    flow_markov_defect,
    increment_vector_independence_defect,
    mc_event_probabilities,
    mc_probe_thresholds,
    probability_gap,
    set_markov_defect,
)

FD_EPS = (1e-2, 5e-3, 2.5e-3)
ORDER_BRACKET = (1.5, 3.0)


def _row(name, instance, defect, tolerance):
    return {
        "name": name,
        "instance": instance,
        "defect": float(defect),
        "tolerance": float(tolerance),
        "pass": bool(defect <= tolerance),
    }


def _orderings(cfg):
    cap = int(cfg.experiment.get("ordering_cap", 24))
    orders = enumerate_consistent_orderings(cfg.lattice)
    return orders[:cap]


def _display_states(kernel):
    if kernel.kind == "empirical":
        return [j / kernel.n for j in range(kernel.n + 1)]
    if kernel.kind == "dirichlet":
        return [0.0, 0.25, 0.5]
    if kernel.kind in ("poisson", "compound_poisson"):
        return [0.0, 1.0, 2.0]
    return [0.0, 1.0, -0.5]


def _fd_order_row(system, h, name, instance):
    errs = finite_difference_generator_errors(system, 0.25, FD_EPS, h)
    if max(errs) < 1e-12:
        return _row(name, instance + " (exactly linear)", 0.0, 1e-9)
    ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
    lo, hi = ORDER_BRACKET
    defect = max(0.0, max(lo - min(ratios), max(ratios) - hi))
    return _row(name, f"{instance} ratios={['%.3f' % r for r in ratios]}", defect, 1e-9)


def _finite_state_rows(cfg):
    rows = []
    spec = cfg.spec
    mixture = isinstance(spec, MixtureSpec)
    kernel = spec.kernel
    tol = cfg.tolerances
    orders = _orderings(cfg)
    states = _display_states(kernel)

    # composition law on every prefix triple of every ordering
    worst = 0.0
    seen = set()
    for o in orders:
        masks = o.prefix_masks
        for i in range(len(masks)):
            for j in range(i, len(masks)):
                for k in range(j, len(masks)):
                    key = (masks[i], masks[j], masks[k])
                    if key in seen:
                        continue
                    seen.add(key)
                    r = ck_defect(kernel, o.prefix_set(i), o.prefix_set(j),
                                  o.prefix_set(k), states)
                    worst = max(worst, r.defect)
    rows.append(_row("chapman_kolmogorov",
                     f"{len(seen)} prefix triples, {len(orders)} orderings",
                     worst, tol["exact"]))

    # joint increment law invariant under the ordering
    laws = [exact_fdd(spec.with_ordering(o)) for o in orders]
    lefts = [left_neighbourhoods(o) for o in orders]
    worst = 0.0
    for i in range(len(orders)):
        for j in range(i + 1, len(orders)):
            perm = align_variables(lefts[i], lefts[j])
            worst = max(worst, laws[i].tv(laws[j].permuted(perm)))
    rows.append(_row("ordering_invariance",
                     f"{len(orders) * (len(orders) - 1) // 2} ordering pairs",
                     worst, tol["exact"]))

    # exact marginals for the empirical process
    if kernel.kind == "empirical" and not mixture:
        worst = 0.0
        for m in cfg.lattice.members:
            got = joint_over_increments(spec, [m]).scalar_dict()
            want = binomial_pmf(kernel.n, measure_of(kernel.F, m)).as_dict()
            worst = max(worst, tv_distance(got, want))
        rows.append(_row("marginal_law", "all members vs binomial", worst, tol["exact"]))

    # conditional-independence checks
    ordering = spec.ordering
    lefts0 = left_neighbourhoods(ordering)
    worst = 0.0
    instances = 0
    for k in range(1, len(ordering) - 1):
        B = ordering.prefix_set(k)
        partition = [c for c in lefts0.sets[: k + 1] if c.mask]
        for A in cfg.lattice.members:
            r = set_markov_defect(spec, A, B, partition)
            worst = max(worst, r.defect)
            instances += 1
    rows.append(_row("set_markov", f"{instances} (A, B) instances", worst, tol["exact"]))

    if len(ordering) < 2:
        return rows  # a single-member lattice has no increments to check

    k = max(1, (len(ordering) - 1) // 2)
    B = ordering.prefix_set(k)
    a_list = [m for m in cfg.lattice.members if m.mask & ~B.mask][:2]
    if a_list:
        r = increment_vector_independence_defect(spec, B, a_list)
        rows.append(_row("increment_independence",
                         f"B=prefix[{k}], {len(a_list)} sets", r.defect, tol["exact"]))

    flow = flow_from_ordering(ordering, _kernel_measure(kernel))
    r = flow_markov_defect(spec, flow)
    rows.append(_row("flow_markov", "canonical flow", r.defect, tol["exact"]))

    # flow matching: a refined chain against the one-step chain
    coarse = DiscreteFlow((flow.times[0], flow.times[-1]),
                          (flow.stages[0], flow.stages[-1]), flow.trace_measure)
    int_states = range(kernel.n + 1) if kernel.kind == "empirical" else range(3)
    d = flow_matching_defect(kernel, coarse, (0, 1), flow, (0, len(flow.stages) - 1),
                             list(int_states))
    rows.append(_row("flow_matching", "one-step vs refined chain", d, tol["exact"]))

    # the matrix semigroup needs a closed integer state grid; compound
    # kernels with non-integer jumps only get the kernel-level checks
    try:
        system = system_along_flow(kernel, flow)
    except ConfigError:
        return rows
    d = generator_matching_defect(kernel, coarse, (0, 1), flow,
                                  (0, len(flow.stages) - 1))
    rows.append(_row("generator_matching", "one-step vs refined chain", d,
                     tol["quadrature"]))

    h = system.basis()[0]
    t_end = float(flow.times[-1])
    worst = max(integral_identity_residual(system, 0.0, t_end / 2.0, h),
                integral_identity_residual(system, 0.0, t_end, h))
    rows.append(_row("integral_identity", "canonical flow", worst, tol["quadrature"]))

    rows.append(_fd_order_row(system, system.basis()[0], "generator_fd_order",
                              kernel.kind))

    kernel_spec = spec.components[0] if mixture else spec
    pair = next(((o1, o2) for i, o1 in enumerate(orders) for o2 in orders[i + 1:]
                 if o1.positions != o2.positions), None)
    if pair is not None:
        for level in (2, 3):
            if level > len(ordering):
                continue
            r = permutation_identity_check(kernel_spec, pair[0], pair[1], level)
            rows.append(_row(f"permutation_identity_{level}", "first swapped pair",
                             r.exact_defect, tol["exact"]))
            rows.append(_row(f"permutation_identity_{level}_generator",
                             "first swapped pair", r.generator_residual,
                             tol["quadrature"]))
    return rows


def _kernel_measure(kernel):
    return {"empirical": getattr(kernel, "F", None),
            "dirichlet": getattr(kernel, "alpha", None)}.get(kernel.kind,
                                                             getattr(kernel, "lam", None))


def _continuous_rows(cfg):
    rows = []
    spec = cfg.spec
    kernel = spec.kernel
    tol = cfg.tolerances
    seed = cfg.seed
    count = int(cfg.experiment.get("mc_samples", 100_000))
    orders = _orderings(cfg)
    states = _display_states(kernel)
    ordering = spec.ordering

    # composition law
    worst = 0.0
    worst_sig = 0.0
    o = ordering
    triples = [(0, 1, len(o) - 1)] if len(o) > 2 else [(0, 0, len(o) - 1)]
    if len(o) > 3:
        triples.append((1, 2, len(o) - 1))
    for i, j, k in triples:
        if kernel.kind == "dirichlet":
            r = ck_defect(kernel, o.prefix_set(i), o.prefix_set(j), o.prefix_set(k),
                          states, mc=(seed, count))
            worst_sig = max(worst_sig, r.sigmas or 0.0)
        else:
            r = ck_defect(kernel, o.prefix_set(i), o.prefix_set(j), o.prefix_set(k),
                          states)
            worst = max(worst, r.defect)
    if kernel.kind == "dirichlet":
        rows.append(_row("chapman_kolmogorov", f"{len(triples)} triples, MC sigmas",
                         worst_sig, tol["mc_sigmas"]))
    else:
        rows.append(_row("chapman_kolmogorov", f"{len(triples)} triples, quadrature cdf",
                         worst, tol["quadrature"]))

    # ordering invariance by Monte Carlo, samples cached per ordering
    aligned = [aligned_increment_samples(spec, o, seed, count) for o in orders]
    medians, quartiles = mc_probe_thresholds(aligned[0])
    probs = [mc_event_probabilities(a, medians, quartiles) for a in aligned]
    worst_sig = 0.0
    for i in range(len(orders)):
        for j in range(i + 1, len(orders)):
            worst_sig = max(worst_sig, probability_gap(probs[i], probs[j], count).sigmas)
    rows.append(_row("ordering_invariance",
                     f"{len(orders) * (len(orders) - 1) // 2} ordering pairs, MC sigmas",
                     worst_sig, tol["mc_sigmas"]))

    # marginal laws
    arr = sample_increments(spec, seed, count)
    lefts = left_neighbourhoods(ordering)
    if kernel.kind == "dirichlet":
        worst = 0.0
        crit = None
        for m in cfg.lattice.members:
            idx = [i for i, c in enumerate(lefts.sets) if c.mask and c.issubset(m)]
            vals = arr[:, idx].sum(axis=1)
            a = measure_of(kernel.alpha, m)
            b = kernel.alpha.total - a
            ks = stats.kstest(vals, lambda z: stats.beta.cdf(z, a, b))
            crit = special.kolmogi(0.01) / math.sqrt(count)
            worst = max(worst, ks.statistic)
        rows.append(_row("marginal_law", "KS vs beta, all members", worst, crit))
    else:
        worst_sig = 0.0
        mem = cfg.lattice.members
        for i in range(len(mem)):
            for j in range(i, len(mem)):
                xi = _member_values(arr, lefts, mem[i])
                xj = _member_values(arr, lefts, mem[j])
                prod = (xi - xi.mean()) * (xj - xj.mean())
                se = prod.std(ddof=1) / math.sqrt(count)
                want = measure_of(kernel.lam, mem[i] & mem[j])
                worst_sig = max(worst_sig, abs(prod.mean() - want) / max(se, 1e-300))
        rows.append(_row("marginal_law", "covariance vs intensity, member pairs",
                         worst_sig, tol["mc_sigmas"]))

    if len(ordering) < 2:
        return rows  # no flow legs to differentiate along

    flow = flow_from_ordering(ordering, _kernel_measure(kernel))
    system = system_along_flow(kernel, flow)
    h = system.basis()[1]
    t_end = float(flow.times[-1])
    resid = integral_identity_residual(system, 0.0, t_end, h)
    itol = tol["dirichlet_quadrature"]
    rows.append(_row("integral_identity", "canonical flow", resid, itol))
    rows.append(_fd_order_row(system, system.basis()[1], "generator_fd_order",
                              kernel.kind))
    return rows


def _member_values(arr, lefts, member):
    idx = [i for i, c in enumerate(lefts.sets) if c.mask and c.issubset(member)]
    return arr[:, idx].sum(axis=1)


def run_validation_suite(cfg) -> list[dict]:
    kernel = cfg.spec.kernel
    if kernel.finite_state:
        return _finite_state_rows(cfg)
    return _continuous_rows(cfg)


def run_gencheck(cfg, eps_list, tolerance: float | None,
                 ordering_index: int = 0) -> list[dict]:
    kernel = cfg.spec.kernel
    tol = cfg.tolerances
    orders = _orderings(cfg)
    if not 0 <= ordering_index < len(orders):
        raise ConfigError(
            f"ordering index {ordering_index} out of range (have {len(orders)})")
    flow = flow_from_ordering(orders[ordering_index], _kernel_measure(kernel))
    system = system_along_flow(kernel, flow)
    if kernel.kind == "dirichlet":
        itol = tolerance or tol["dirichlet_quadrature"]
    elif kernel.finite_state:
        itol = tolerance or tol["quadrature"]
    else:
        itol = tolerance or tol["dirichlet_quadrature"]
    rows = []
    hs = system.basis()
    h = hs[1] if len(hs) > 1 else hs[0]
    errs = finite_difference_generator_errors(system, 0.25, tuple(eps_list), h)
    if max(errs) < 1e-12:
        order, passed = 0.0, True
    elif len(errs) > 1:
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        order = float(np.mean([math.log(r, 2.0) for r in ratios]))
        passed = all(ORDER_BRACKET[0] <= r <= ORDER_BRACKET[1] for r in ratios)
    else:
        order, passed = float("nan"), True
    rows.append({"check": "generator_fd", "residuals": [float(e) for e in errs],
                 "order_estimate": order, "pass": bool(passed)})
    resid = integral_identity_residual(system, 0.0, float(flow.times[-1]), h)
    rows.append({"check": "integral_identity", "residuals": [float(resid)],
                 "order_estimate": None, "pass": bool(resid <= itol)})
    return rows
