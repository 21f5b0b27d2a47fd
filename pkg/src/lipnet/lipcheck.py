"""Certification engine: Lipschitz norms, retraction axioms, proximity bounds.

Axiom checks are exact pointwise equalities on the finite net; bound checks
compare a measured maximum against the theoretical constant plus 1e-9.  All
pairwise loops run chunked in a fixed order, ties go to the lexicographically
smallest witness, and every check above the evaluation budget switches to a
seeded subsample, which the report records.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._pairwise import all_pair_chunks, lipschitz_from_images, reduce_max, sampled_pairs
from .family import RetractionFamily
from .geometry import Ambient, NormKind, norm_rows

EXACT_PAIRWISE = "exact"
SAMPLED = "sampled"

BOUND_TOL = 1e-9
COMMUTATION_BUDGET = int(1e7)
COMMUTATION_SAMPLES = int(1e5)
PAIR_BUDGET = int(5e5)
PER_INDEX_BUDGET = int(2e7)


@dataclass
class CheckEntry:
    name: str
    measured: float
    bound: float | None
    passed: bool
    witness: object = None
    mode: str = EXACT_PAIRWISE
    info: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "passed": bool(self.passed),
            "witness": _jsonable(self.witness),
            "mode": self.mode,
            "info": {k: _jsonable(v) for k, v in self.info.items()},
        }


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


@dataclass
class CertReport:
    meta: dict = field(default_factory=dict)
    entries: list = field(default_factory=list)

    def add(self, entry: CheckEntry):
        self.entries.append(entry)
        return entry

    @property
    def all_pass(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self):
        return {
            "meta": {k: _jsonable(v) for k, v in self.meta.items()},
            "entries": [e.to_dict() for e in self.entries],
            "all_pass": self.all_pass,
        }


# ---------------------------------------------------------------------------
# Lipschitz norms


def lipschitz_norm(evaluate, points, norm_kind: NormKind, mode=EXACT_PAIRWISE):
    """Sup of image-distance over distance, over point pairs.

    ``mode`` is either EXACT_PAIRWISE or a tuple (SAMPLED, k, seed); the
    sampled value is a lower bound of the exact one.  Returns (value, witness
    pair of points).
    """
    pts = [tuple(float(c) for c in p) for p in points]
    if len(pts) < 2:
        raise ValueError("need at least 2 points")
    coords = np.asarray(pts, dtype=float)
    images = np.asarray([tuple(float(c) for c in evaluate(p)) for p in pts])
    pairs = None
    if mode != EXACT_PAIRWISE:
        tag, k, seed = mode
        if tag != SAMPLED:
            raise ValueError(f"unknown mode {mode!r}")
        pairs = sampled_pairs(len(pts), int(k), int(seed))
    val, wit = lipschitz_from_images(coords, images, norm_kind, pairs=pairs)
    return val, (pts[wit[0]], pts[wit[1]]) if wit else None


def _family_pairs(family: RetractionFamily, pair_budget=PAIR_BUDGET, seed=0):
    """All pairs when affordable, else a seeded sample; says which it did."""
    P = len(family.points)
    n_all = P * (P - 1) // 2
    if n_all <= pair_budget:
        chunks = list(all_pair_chunks(P))
        if not chunks:
            empty = np.zeros(0, dtype=np.int64)
            return (empty, empty), EXACT_PAIRWISE
        I = np.concatenate([c[0] for c in chunks])
        J = np.concatenate([c[1] for c in chunks])
        return (I, J), EXACT_PAIRWISE
    I, J = sampled_pairs(P, pair_budget, seed)
    return (I, J), f"{SAMPLED}({pair_budget},seed={seed})"


def family_constant(family: RetractionFamily, pairs=None, pair_budget=PAIR_BUDGET,
                    seed=0):
    """Measured family constant: sup over all indices and the given pairs.

    Sweeps levels instead of indices: within a level the branch pattern of a
    pair changes only at the two image positions, so probing the three
    realized branch combinations per (pair, level) covers every index
    exactly.  Returns (value, witness dict, mode).
    """
    if pairs is None:
        pairs, mode = _family_pairs(family, pair_budget, seed)
    else:
        mode = EXACT_PAIRWISE
    I, J = pairs
    den = family.pair_distance(I, J)
    ok = den > 0
    I, J, den = I[ok], J[ok], den[ok]
    best, wit = 0.0, None
    for k, (g_lo, g_hi) in enumerate(family.level_bounds):
        hi, lo = family.level_images(k)
        t1, t2 = hi[I], hi[J]
        lo1, lo2 = lo[I], lo[J]
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        probes = (
            (np.full(len(I), g_hi, dtype=np.int64), None),
            (tmax - 1, tmax - 1 >= g_lo),
            (tmin - 1, tmin - 1 >= g_lo),
        )
        for g, mask in probes:
            if mask is None:
                gi, gj = I, J
                gg, dd = g, den
                a = np.where(t1 <= gg, t1, lo1)
                b = np.where(t2 <= gg, t2, lo2)
            else:
                if not np.any(mask):
                    continue
                gi, gj = I[mask], J[mask]
                gg, dd = g[mask], den[mask]
                a = np.where(t1[mask] <= gg, t1[mask], lo1[mask])
                b = np.where(t2[mask] <= gg, t2[mask], lo2[mask])
            num = family.pair_distance(a, b)
            new_best, new_wit = reduce_max(best, None, num / dd, gi, gj)
            if new_wit is not None and new_best > best:
                best = new_best
                kk = int(np.argmax(num / dd))
                wit = {"pair": (int(gi[kk]), int(gj[kk])), "level": family.levels[k],
                       "index": int(gg if np.isscalar(gg) else gg[kk])}
    return best, wit, mode


def per_index_constants(family: RetractionFamily, pairs=None, budget=PER_INDEX_BUDGET,
                        seed=0):
    """Exact per-index constants over the given pairs (None where skipped)."""
    if pairs is None:
        pairs, mode = _family_pairs(family, seed=seed)
    else:
        mode = EXACT_PAIRWISE
    I, J = pairs
    den = family.pair_distance(I, J)
    ok = den > 0
    I, J, den = I[ok], J[ok], den[ok]
    G = family.n_indices
    if G * len(I) > budget:
        return None, mode
    out = np.zeros(G)
    for g in range(G):
        row = family.image_row(g)
        num = family.pair_distance(row[I], row[J])
        out[g] = float((num / den).max()) if len(num) else 0.0
    return out, mode


# ---------------------------------------------------------------------------
# retraction axioms


def check_retractional_axioms(family: RetractionFamily, seed=0,
                              commutation_budget=COMMUTATION_BUDGET,
                              commutation_samples=COMMUTATION_SAMPLES,
                              index_sample=1500, pair_budget=PAIR_BUDGET,
                              bound=None) -> CertReport:
    """Verify the four retractional-basis axioms on the finite net.

    (1) every retraction fixes the points before its index and maps into
    them, exactly; (2) the enumeration covers the net (the last retraction is
    the identity); (3) the measured constant stays below the family bound;
    (4) compositions collapse to the smaller index, exactly.  Above the
    budgets, index sets and composition triples are seeded subsamples.
    """
    rng = np.random.default_rng(seed)
    P = len(family.points)
    G = family.n_indices
    report = CertReport(meta={"points": P, "indices": G, "seed": seed,
                              "label": family.label})

    if G * P <= PER_INDEX_BUDGET:
        idx_list = np.arange(G)
        mode1 = EXACT_PAIRWISE
    else:
        idx_list = np.unique(rng.integers(0, G, size=index_sample))
        mode1 = f"{SAMPLED}({len(idx_list)} indices,seed={seed})"
    fix_bad = img_bad = None
    arange = np.arange(P)
    for g in idx_list:
        row = family.image_row(int(g))
        head = row[: g + 1]
        if fix_bad is None and not np.array_equal(head, arange[: g + 1]):
            j = int(np.flatnonzero(head != arange[: g + 1])[0])
            fix_bad = {"index": int(g), "point": family.points[j],
                       "image": family.points[int(head[j])]}
        if img_bad is None and int(row.max()) > g:
            j = int(np.argmax(row))
            img_bad = {"index": int(g), "point": family.points[j],
                       "image": family.points[int(row[j])]}
    report.add(CheckEntry("axiom1-fixes-prefix", float(fix_bad is not None), None,
                          fix_bad is None, fix_bad, mode1))
    report.add(CheckEntry("axiom1-image-in-prefix", float(img_bad is not None), None,
                          img_bad is None, img_bad, mode1))

    last = family.image_row(G - 1)
    covers = bool(np.array_equal(last, arange))
    report.add(CheckEntry("axiom2-covers", float(not covers), None, covers,
                          None if covers else {"index": G - 1}, EXACT_PAIRWISE))

    bound = family.theoretical_bound if bound is None else bound
    measured, wit, mode3 = family_constant(family, pair_budget=pair_budget, seed=seed)
    report.add(CheckEntry("axiom3-lipschitz", measured, bound,
                          bound is None or measured <= bound + BOUND_TOL,
                          wit, mode3))

    n_triples = G * G * P
    comm_bad = None
    if n_triples <= commutation_budget:
        mode4 = EXACT_PAIRWISE
        rows = [family.image_row(g) for g in range(G)]
        for g in range(G):
            row_g = rows[g]
            for h in range(g, G):
                row_h = rows[h]
                if not (np.array_equal(row_g[row_h], row_g)
                        and np.array_equal(row_h[row_g], row_g)):
                    x = int(np.flatnonzero((row_g[row_h] != row_g)
                                           | (row_h[row_g] != row_g))[0])
                    comm_bad = {"g": g, "h": h, "point": family.points[x]}
                    break
            if comm_bad:
                break
    else:
        mode4 = f"{SAMPLED}({commutation_samples} triples,seed={seed})"
        gs = rng.integers(0, G, size=commutation_samples)
        hs = rng.integers(0, G, size=commutation_samples)
        xs = rng.integers(0, P, size=commutation_samples)
        for g, h, x in zip(gs, hs, xs):
            g, h, x = int(g), int(h), int(x)
            lo = min(g, h)
            a = family.image_index(g, family.image_index(h, x))
            if a != family.image_index(lo, x):
                comm_bad = {"g": g, "h": h, "point": family.points[x]}
                break
    report.add(CheckEntry("axiom4-commutation", float(comm_bad is not None), None,
                          comm_bad is None, comm_bad, mode4))
    return report


# ---------------------------------------------------------------------------
# proximity bounds and griddability


def check_bound(name, images_a, images_b, distance_rows, bound, points=None) -> CheckEntry:
    """Max rowwise distance between two evaluations against a bound.

    ``images_a``/``images_b`` are aligned coordinate arrays (rows = points),
    ``distance_rows`` maps two such arrays to rowwise distances.
    """
    A = np.asarray(images_a, dtype=float)
    B = np.asarray(images_b, dtype=float)
    d = distance_rows(A, B)
    k = int(np.argmax(d))
    measured = float(d[k])
    witness = None if points is None else points[k]
    return CheckEntry(name, measured, bound, measured <= bound + BOUND_TOL,
                      witness, EXACT_PAIRWISE, {"rows": len(d)})


def check_griddability(space, grid_coords, samples_per_block, seed=0) -> CertReport:
    """Separation and density of a block grid under both ambient rules.

    Separation is the exact pairwise minimum under the space's ambient norm.
    Density is measured per block against the given per-block samples; the
    blockwise nearest point minimizes both the sup and the l1 combination,
    so both ambient densities come from the same per-block distances and the
    l1 value is reported for contrast (never better than sup).
    """
    report = CertReport(meta={"ambient": space.ambient.value, "seed": seed,
                              "points": len(grid_coords)})
    coords = np.asarray(grid_coords, dtype=float)
    best, wit = np.inf, None
    for I, J in all_pair_chunks(len(coords)):
        d = space.pair_distance_rows(coords[I], coords[J])
        k = int(np.argmin(d))
        if d[k] < best:
            best, wit = float(d[k]), (int(I[k]), int(J[k]))
    a = space.params.a
    report.add(CheckEntry("grid-separation", best, a,
                          best >= a - 1e-12, wit, EXACT_PAIRWISE,
                          {"direction": "measured >= bound"}))

    per_block_d = []
    for i, base in enumerate(space.bases):
        net = np.asarray(base.point_set(), dtype=float)
        samples = np.asarray(samples_per_block[i], dtype=float)
        dmin = np.empty(len(samples))
        for s in range(0, len(samples), 512):
            blk = samples[s:s + 512]
            dd = norm_rows(blk[:, None, :] - net[None, :, :], base.norm_kind)
            dmin[s:s + 512] = dd.min(axis=1)
        per_block_d.append(dmin)
    stacked = np.stack(per_block_d, axis=0)
    sup_d = stacked.max(axis=0)
    l1_d = stacked.sum(axis=0)
    b = space.params.b
    k = int(np.argmax(sup_d))
    report.add(CheckEntry("grid-density-sup", float(sup_d[k]), b,
                          float(sup_d[k]) <= b + BOUND_TOL, k, EXACT_PAIRWISE,
                          {"samples": int(stacked.shape[1])}))
    k1 = int(np.argmax(l1_d))
    report.add(CheckEntry("grid-density-l1", float(l1_d[k1]), None, True, k1,
                          EXACT_PAIRWISE,
                          {"contrast": "reported, not asserted",
                           "samples": int(stacked.shape[1])}))
    return report
