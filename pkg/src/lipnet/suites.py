"""Verification pipelines shared by the command line and the test suite.

Each suite builds the relevant objects, runs its checks in a fixed order and
returns a CertReport; nothing here decides process exit codes or output
formats.  Bounds follow the quantitative constants of the construction:
radial proximity 6b, grid proximity 6b and 1 + 6b, neighbouring-diamond
drift 1, family constants (12b + 2)/a + 2 and (12b + 4)/a + Lip(F^s).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ._pairwise import all_pair_chunks, min_pairwise_distance, sampled_pairs
from .family import RetractionFamily
from .freenorm import Molecule, free_norm, family_metric, linearize, sample_molecule
from .geometry import Ambient, NormKind, norm_rows, radial_project_rows
from .grid_fdd import (
    F_s,
    GridSpace,
    as_block_vector,
    block_vector_distance,
    build_grid_family,
    build_ordered_grid,
    enumerate_grid,
    f_value,
    ij_of,
    in_diamond,
    local_phi,
    m_of,
    orbit,
    phi_closed_form,
    phi_grid,
    phi_naive,
    q_seq,
    s_of,
    sk_sequence,
)
from .lipcheck import (
    BOUND_TOL,
    CertReport,
    CheckEntry,
    check_bound,
    check_griddability,
    check_retractional_axioms,
    family_constant,
    per_index_constants,
)
from .nets import (
    NetParams,
    Spiderweb,
    net_to_spiderweb,
    sample_region,
    transport_basis,
    validate_net,
)
from .retract_fd import build_fd_family, build_ordered_net


def spiderweb_suite(web: Spiderweb, seed=0, n_samples=10_000, pair_budget=None,
                    radius=None):
    """Net properties, base structure, retraction axioms and the radial bound."""
    net = build_ordered_net(web)
    fam = build_fd_family(net)
    report = CertReport(meta={"dim": web.dim, "norm": web.norm_kind.value,
                              "a": web.params.a, "b": web.params.b,
                              "points": len(net.points), "seed": seed,
                              "max_shell": net.max_shell})

    val = validate_net(net.points, web.norm_kind, web.params, region="ball",
                       radius=radius, n_samples=n_samples, seed=seed)
    report.add(CheckEntry("separation", val.min_pairwise, web.params.a,
                          val.pass_separation, val.separation_witness,
                          info={"direction": "measured >= bound"}))
    report.add(CheckEntry("density", val.max_sample_distance, web.params.b,
                          val.pass_density, val.density_witness,
                          info={"samples": val.n_samples, "region_radius": val.radius}))

    base = web.base
    bad = None
    for r in base.levels():
        if r == 1:
            continue
        seeds = [tuple(2.0 * c for c in p) for p in base.dyadic_layers[r >> 1]]
        stored = base.dyadic_layers[r][: len(seeds)]
        if seeds != stored:
            bad = {"layer": r}
            break
    report.add(CheckEntry("base-containment", float(bad is not None), None,
                          bad is None, bad))
    worst_layer = math.inf
    for r in base.levels():
        arr = base.layer_array(r)
        if len(arr) >= 2:
            v, _ = min_pairwise_distance(arr, base.norm_kind)
            worst_layer = min(worst_layer, v)
    report.add(CheckEntry("base-layer-separation",
                          worst_layer, base.params.a,
                          worst_layer >= base.params.a - 1e-12, None,
                          info={"direction": "measured >= bound"}))

    kwargs = {} if pair_budget is None else {"pair_budget": pair_budget}
    axioms = check_retractional_axioms(fam, seed=seed, **kwargs)
    for e in axioms.entries:
        report.add(e)

    table = fam.meta["psi_table"]
    coords = net.coords
    kind = net.norm_kind
    worst, wit = 0.0, None
    for n in range(net.max_shell + 1):
        gap = norm_rows(coords[table[:, n]] - radial_project_rows(coords, n, kind), kind)
        k = int(np.argmax(gap))
        if gap[k] > worst:
            worst, wit = float(gap[k]), {"n": n, "point": net.points[k]}
    report.add(CheckEntry("radial-proximity", worst, 6.0 * web.params.b,
                          worst <= 6.0 * web.params.b + BOUND_TOL, wit))
    report.meta["family_constant"] = axioms.entry("axiom3-lipschitz").measured
    report.meta["family_bound"] = fam.theoretical_bound
    report.meta["radial_gap"] = worst
    return report, net, fam


def net_transfer_suite(points, norm_kind, params: NetParams, seed=0, mesh=None):
    """Lemma-spider transfer plus basis transport, with measured constants."""
    web, eq = net_to_spiderweb(points, norm_kind, params, mesh=mesh)
    a, b = params.a, params.b
    dist_bound = (2 * b / a + 1) * (4 * b / a + 1)
    report = CertReport(meta={"points": len(points), "a": a, "b": b, "seed": seed})
    report.add(CheckEntry("transfer-displacement", eq.meta["max_displacement"],
                          1.0 / 3.0,
                          eq.meta["max_displacement"] <= 1.0 / 3.0 + BOUND_TOL))
    report.add(CheckEntry("transfer-distortion", eq.distortion, dist_bound,
                          eq.distortion <= dist_bound + BOUND_TOL,
                          info={"lip_forward": eq.lip_forward,
                                "lip_backward": eq.lip_backward}))

    net = build_ordered_net(web)
    fam = build_fd_family(net)
    k_web, _, mode = family_constant(fam, seed=seed)
    report.add(CheckEntry("spiderweb-constant", k_web, fam.theoretical_bound,
                          k_web <= fam.theoretical_bound + BOUND_TOL, None, mode))

    moved = transport_basis(eq.inverse(), fam)
    k_net, wit, mode = family_constant(moved, seed=seed)
    report.add(CheckEntry("transport-constant-vs-DK", k_net, eq.distortion * k_web,
                          k_net <= eq.distortion * k_web + BOUND_TOL, wit, mode))
    paper_k = dist_bound * (156 * b / a + 2)
    report.add(CheckEntry("transport-constant", k_net, paper_k,
                          k_net <= paper_k + BOUND_TOL, wit, mode))
    axioms = check_retractional_axioms(moved, seed=seed, bound=paper_k)
    for e in axioms.entries:
        e.name = "transport-" + e.name
        report.add(e)
    report.meta["distortion"] = eq.distortion
    report.meta["spiderweb_constant"] = k_web
    report.meta["transport_constant"] = k_net
    return report, web, eq, moved


# ---------------------------------------------------------------------------
# grid suites


def grid_exact_suite(space: GridSpace, points, scan_budget=int(5e6)) -> CertReport:
    """Zero-tolerance integer identities of the diamond combinatorics."""
    report = CertReport(meta={"points": len(points), "blocks": space.n_blocks})
    q = q_seq(max(4, space.n_blocks))
    expected = [0, 1]
    for k in range(1, len(q.q) - 1):
        expected.append(expected[-1] * k * (1 << (k + 2)))
    ok = list(q.q) == expected and q.q[1:5] == (1, 8, 256, 24576)
    report.add(CheckEntry("q-values", float(not ok), None, ok,
                          None if ok else {"got": list(q.q)}))

    ratio_bad = None
    for s in (1, 2, 5):
        for t in (3, 7):
            for n in range(1, space.n_blocks + 1):
                for m in range(n, space.n_blocks + 1):
                    if (q.r(s, n) / q.r(s, m) != q.r(t, n) / q.r(t, m)
                            or q.r(s, n) / q.r(s, m) != Fraction(space.q[m], space.q[n])
                            or space.q[m] % space.q[n] != 0
                            or q.r(s, n) / q.r(t, n) != Fraction(s, t)):
                        ratio_bad = {"s": s, "t": t, "n": n, "m": m}
    report.add(CheckEntry("ratio-identities", float(ratio_bad is not None), None,
                          ratio_bad is None, ratio_bad))

    total_scan = sum(s_of(x, space) for x in points)
    scan_all = total_scan <= scan_budget
    oracle_bad = sphere_bad = iter_bad = None
    for x in points:
        s = s_of(x, space)
        if scan_all:
            mins = next(t for t in range(s + 1) if in_diamond(x, t, space))
        else:
            mins = s if in_diamond(x, s, space) and (s == 0 or not in_diamond(x, s - 1, space)) else -1
        if mins != s and oracle_bad is None:
            oracle_bad = {"point": x.norms, "s": s, "oracle": mins}
        if x.n > 0:
            total = sum(Fraction(int(c) * space.q[i + 1], s)
                        for i, c in enumerate(x.norms) if c)
            if total != 1 and sphere_bad is None:
                sphere_bad = {"point": x.norms, "sum": str(total)}
            y = local_phi(space, x)
            if s_of(y, space) != s - space.q[x.n] and iter_bad is None:
                iter_bad = {"point": x.norms}
    report.add(CheckEntry("s-of-min-membership", float(oracle_bad is not None), None,
                          oracle_bad is None, oracle_bad,
                          mode="exact" if scan_all else "boundary-only"))
    report.add(CheckEntry("boundary-sum-is-one", float(sphere_bad is not None), None,
                          sphere_bad is None, sphere_bad))
    report.add(CheckEntry("local-step-drop", float(iter_bad is not None), None,
                          iter_bad is None, iter_bad))

    seq_bad = closed_bad = None
    for x in points:
        traj = orbit(space, x)
        sk = [t[0] for t in traj]
        pts = [t[1] for t in traj]
        for k in range(len(sk) - 1):
            # recurrence: s_{k+1} = s_k - q at the last nonzero block of the k-th image
            if sk[k + 1] != sk[k] - space.q[pts[k].n]:
                seq_bad = seq_bad or {"point": x.norms, "k": k, "rule": "recurrence"}
            # collapse: retracting to s_k - 1 equals retracting to s_{k+1}
            if phi_grid(space, sk[k] - 1, x) != pts[k + 1]:
                seq_bad = seq_bad or {"point": x.norms, "k": k, "rule": "collapse"}
        for m in range(len(pts)):
            # shift rule: the step sequence of the m-th image is the suffix,
            # i.e. s_j of it equals s_{m+j} of x for every j
            if sk_sequence(space, pts[m]) != sk[m:]:
                seq_bad = seq_bad or {"point": x.norms, "m": m, "rule": "shift"}
        for k in range(1, x.total_norm_steps + 1):
            cf = phi_closed_form(space, k, x)
            it = phi_grid(space, sk[k], x)
            nv = phi_naive(space, sk[k], x)
            if not (cf == it == nv):
                closed_bad = closed_bad or {"point": x.norms, "k": k}
    report.add(CheckEntry("step-sequence-identities", float(seq_bad is not None), None,
                          seq_bad is None, seq_bad))
    report.add(CheckEntry("closed-form-equivalence", float(closed_bad is not None),
                          None, closed_bad is None, closed_bad))

    example = next((x for x in points if x.norms[:2] == (1, 2)
                    and all(c == 0 for c in x.norms[2:])), None)
    if example is not None:
        seq = sk_sequence(space, example)
        ok = seq == [17, 9, 1, 0]
        report.add(CheckEntry("sk-example-17-9-1-0", float(not ok), None, ok,
                              None if ok else {"got": seq}))
    return report


def grid_proximity_suite(space: GridSpace, points, seed=0,
                         semigroup_samples=2000) -> CertReport:
    """Proximity of the grid retractions to the diamond maps F^s."""
    b = space.params.b
    report = CertReport(meta={"points": len(points), "b": b, "seed": seed})
    base_bad = None
    worst_base = 0.0
    worst_sim = 0.0
    worst_step = 0.0
    worst_lambda = (0.0, 0.0)  # (min, max) of lambda
    lam_resid = 0.0
    eqf_bad = 0.0
    for x in points:
        traj = orbit(space, x)
        sk = [t[0] for t in traj]
        pts = [t[1] for t in traj]
        s0 = sk[0]
        F_cache = {s: F_s(space, s, x) for s in range(0, s0 + 2)}
        # base sequence bound and eqF closed form
        for k in range(len(sk)):
            f_img = F_cache[sk[k]]
            d = block_vector_distance(space, f_img, pts[k])
            if d > worst_base:
                worst_base, base_bad = d, {"point": x.norms, "k": k}
            if 1 <= k <= x.total_norm_steps:
                i, j = ij_of(k, x)
                t = x.n - i
                blocks = [x.blocks[p] if p < t - 1 else tuple(0.0 for _ in x.blocks[p])
                          for p in range(len(x.blocks))]
                c = x.norms[t - 1]
                if c - j > 0:
                    scale = (c - j) / c
                    blocks[t - 1] = tuple(v * scale for v in x.blocks[t - 1])
                radial = as_block_vector(
                    type(x)(blocks=tuple(blocks),
                            norms=tuple(x.norms[p] if p < t - 1 else 0
                                        for p in range(len(x.norms))))
                )
                eqf_bad = max(eqf_bad, block_vector_distance(space, f_img, radial))
        # simil1 (phi_s = the (k+1)-st image throughout s_{k+1} <= s < s_k,
        # equivalence certified by the exact suite) and neighbouring diamonds
        for k in range(len(sk)):
            if sk[k] >= 1:
                worst_sim = max(worst_sim,
                                block_vector_distance(space, pts[k], F_cache[sk[k]]))
            nxt = sk[k + 1] if k + 1 < len(sk) else 0
            for s in range(max(nxt, 1), sk[k]):
                worst_sim = max(worst_sim,
                                block_vector_distance(space, pts[k + 1], F_cache[s]))
        for s in range(0, s0 + 1):
            worst_step = max(worst_step,
                             block_vector_distance(space, F_cache[s + 1], F_cache[s]))
        # lemma-basic pipeline: within each nontrivial run the drift is a
        # lambda in [0, 1] along the pivot direction
        for k in range(len(sk) - 1):
            if sk[k] == 0:
                break
            y = F_cache[sk[k]]
            n_y = y.n
            if n_y == 0:
                continue
            u = np.zeros(sum(space.dims))
            sl = space.block_slices()[n_y - 1]
            blk = np.asarray(y.blocks[n_y - 1], dtype=float)
            u[sl] = blk / float(y.norms[n_y - 1])
            f_low = np.asarray(F_cache[sk[k + 1]].flat(), dtype=float)
            for s in range(sk[k + 1], sk[k]):
                delta = np.asarray(F_cache[s].flat(), dtype=float) - f_low
                lam = float(np.dot(delta, u) / np.dot(u, u))
                resid = delta - lam * u
                per = [norm_rows(resid[slc], kind)
                       for slc, kind in zip(space.block_slices(), space.norm_kinds)]
                lam_resid = max(lam_resid, space.ambient_norm([float(v) for v in per]))
                worst_lambda = (min(worst_lambda[0], lam), max(worst_lambda[1], lam))
    report.add(CheckEntry("phi-vs-F-on-steps", worst_base, 6.0 * b,
                          worst_base <= 6.0 * b + BOUND_TOL, base_bad))
    report.add(CheckEntry("F-closed-form", eqf_bad, 0.0, eqf_bad <= 1e-12, None,
                          info={"tolerance": 1e-12}))
    report.add(CheckEntry("phi-vs-F-everywhere", worst_sim, 1.0 + 6.0 * b,
                          worst_sim <= 1.0 + 6.0 * b + BOUND_TOL, None))
    report.add(CheckEntry("neighbour-diamond-drift", worst_step, 1.0,
                          worst_step <= 1.0 + BOUND_TOL, None))
    report.add(CheckEntry("pivot-drift-residual", lam_resid, 0.0, lam_resid <= 1e-9,
                          None, info={"tolerance": 1e-9}))
    report.add(CheckEntry("pivot-drift-lambda", worst_lambda[1], 1.0,
                          worst_lambda[1] <= 1.0 + BOUND_TOL
                          and worst_lambda[0] >= -BOUND_TOL, None,
                          info={"min": worst_lambda[0]}))

    rng = np.random.default_rng(seed)
    s_max = max(s_of(x, space) for x in points)
    worst_semi = 0.0
    for _ in range(semigroup_samples):
        x = points[int(rng.integers(0, len(points)))]
        s = int(rng.integers(0, s_max + 2))
        t = int(rng.integers(0, s_max + 2))
        lhs = F_s(space, s, F_s(space, t, x))
        rhs = F_s(space, min(s, t), x)
        worst_semi = max(worst_semi, block_vector_distance(space, lhs, rhs))
    report.add(CheckEntry("F-semigroup", worst_semi, 0.0, worst_semi <= 1e-12, None,
                          info={"tolerance": 1e-12, "samples": semigroup_samples},
                          mode=f"sampled({semigroup_samples},seed={seed})"))
    return report


def grid_family_suite(space: GridSpace, points, seed=0, pair_budget=None) -> CertReport:
    """Axioms and the measured constant of the grid retraction family.

    The constant bound is (12b + 4)/a + Lhat with Lhat the measured Lipschitz
    norm of F^s over the tested s range; the per-s values must stay within a
    factor 1.5 of each other.
    """
    ordered = build_ordered_grid(space, points)
    fam = build_grid_family(ordered)
    a, b = space.params.a, space.params.b
    report = CertReport(meta={"points": len(points), "a": a, "b": b, "seed": seed})

    s_max = int(ordered.s_values.max())
    P = len(ordered.points)
    n_all = P * (P - 1) // 2
    budget = pair_budget if pair_budget is not None else int(5e5)
    if n_all <= budget:
        chunks = list(all_pair_chunks(P))
        I = np.concatenate([c[0] for c in chunks])
        J = np.concatenate([c[1] for c in chunks])
        mode = "exact"
    else:
        I, J = sampled_pairs(P, budget, seed)
        mode = f"sampled({budget},seed={seed})"
    den = space.pair_distance_rows(ordered.coords[I], ordered.coords[J])
    ok = den > 0
    I, J, den = I[ok], J[ok], den[ok]

    lhat_per_s = []
    for s in range(1, s_max + 1):
        imgs = np.asarray([F_s(space, s, g).flat() for g in ordered.grid_points])
        num = space.pair_distance_rows(imgs[I], imgs[J])
        lhat_per_s.append(float((num / den).max()))
    lhat = max(lhat_per_s)
    stability = lhat / min(lhat_per_s)
    report.add(CheckEntry("F-lipschitz-sup", lhat, None, True, None, mode,
                          info={"per_s": lhat_per_s}))
    report.add(CheckEntry("F-lipschitz-stability", stability, 1.5,
                          stability <= 1.5 + BOUND_TOL, None, mode))

    bound = (12 * b + 4) / a + lhat
    axioms = check_retractional_axioms(fam, seed=seed, bound=bound)
    for e in axioms.entries:
        report.add(e)
    report.meta["family_constant"] = axioms.entry("axiom3-lipschitz").measured
    report.meta["family_bound"] = bound
    report.meta["lhat"] = lhat
    return report


def grid_griddability_suite(space: GridSpace, points, radius, n_samples=10_000,
                            seed=0) -> CertReport:
    """Separation/density of the grid, sup ambient against the l1 contrast."""
    samples = [
        sample_region(base.dim, base.norm_kind, "ball", radius, n_samples, seed + i)
        for i, base in enumerate(space.bases)
    ]
    coords = [g.flat() for g in points]
    report = check_griddability(space, coords, samples, seed=seed)
    sup_e = report.entry("grid-density-sup")
    l1_e = report.entry("grid-density-l1")
    report.add(CheckEntry("l1-strictly-worse", l1_e.measured - sup_e.measured, None,
                          l1_e.measured > sup_e.measured, None,
                          info={"sup": sup_e.measured, "l1": l1_e.measured}))
    report.meta["radius"] = radius
    return report


# ---------------------------------------------------------------------------
# free-space suite


def truncate_family(family: RetractionFamily, n: int) -> RetractionFamily:
    """Restriction of a family to its first n points (closed under all maps)."""
    if not 1 <= n <= len(family.points):
        raise ValueError("bad truncation size")
    levels, bounds = [], []
    for lvl, (lo, hi) in zip(family.levels, family.level_bounds):
        if lo >= n:
            break
        levels.append(lvl)
        bounds.append((lo, min(hi, n - 1)))
    parent_images = family.level_images

    def images(k):
        hi, lo = parent_images(k)
        return hi[:n], lo[:n]

    return RetractionFamily(
        points=family.points[:n],
        coords=family.coords[:n],
        levels=levels,
        level_bounds=bounds,
        level_images=images,
        pair_distance=family.pair_distance,
        theoretical_bound=family.theoretical_bound,
        label=f"{family.label}[:{n}]",
        meta=dict(family.meta),
    )


def free_space_suite(family: RetractionFamily, n_points=40, molecules=500, seed=0,
                     check_indices=None) -> CertReport:
    """Transport-norm certification of the linearized retractions.

    Solves seeded molecules over a truncation, recording the worst duality
    gap, checks the two-point identity, the per-index contraction bound and
    the basis-constant estimate against the measured family constant.
    """
    fam = truncate_family(family, n_points)
    metric = family_metric(fam)
    report = CertReport(meta={"points": n_points, "molecules": molecules,
                              "seed": seed, "label": family.label})

    rng = np.random.default_rng(seed)
    k_measured, _, kmode = family_constant(fam)
    per_idx, _ = per_index_constants(fam)

    worst_gap = 0.0
    worst_conter = -math.inf
    estimate = 0.0
    est_wit = None
    indices = list(range(fam.n_indices)) if check_indices is None else list(check_indices)
    for _ in range(molecules):
        mu = sample_molecule(rng, n_points)
        val, plan = free_norm(metric, mu)
        worst_gap = max(worst_gap, plan.dual_gap)
        if val <= 1e-12:
            continue
        for g in indices:
            nu = linearize(fam, g, mu)
            v2, plan2 = free_norm(metric, nu)
            worst_gap = max(worst_gap, plan2.dual_gap)
            ratio = v2 / val
            if ratio > estimate:
                estimate, est_wit = ratio, {"index": g, "support": mu.support,
                                            "weights": mu.weights}
            if per_idx is not None:
                worst_conter = max(worst_conter, v2 - per_idx[g] * val)
    report.add(CheckEntry("duality-gap", worst_gap, 1e-8, worst_gap <= 1e-8, None,
                          info={"molecules": molecules}))

    ii, jj = sampled_pairs(n_points, min(200, n_points * (n_points - 1)), seed)
    worst_pt = 0.0
    for i, j in zip(ii, jj):
        v, _ = free_norm(metric, Molecule.dirac_difference(int(i), int(j)))
        worst_pt = max(worst_pt, abs(v - metric[int(i), int(j)]))
    report.add(CheckEntry("two-point-identity", worst_pt, 0.0, worst_pt <= 1e-9,
                          None, info={"tolerance": 1e-9}))

    report.add(CheckEntry("estimate-vs-constant", estimate, k_measured,
                          estimate <= k_measured + BOUND_TOL, est_wit, kmode,
                          info={"family_constant": k_measured}))
    if per_idx is not None:
        report.add(CheckEntry("per-index-contraction", worst_conter, 0.0,
                              worst_conter <= 1e-9, None,
                              info={"meaning": "free_norm(linearized) - K_n * free_norm"}))
    report.meta["estimate"] = estimate
    report.meta["family_constant"] = k_measured
    return report
