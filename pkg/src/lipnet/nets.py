"""Construction and validation of separated nets and spiderwebs.

A spiderweb base is a family of dyadic sphere layers S_{2^n} with
2*S_{2^n} contained in S_{2^{n+1}}; the in-between shells S_m are radial
scalings of the dyadic layer below.  Bases are built greedily from finite
candidate pools (lattice points projected to the sphere), so the achieved
density carries a measured mesh slack rather than the idealized continuum
value; validation reports measured numbers.

Scaled shells are always materialized canonically as (m / 2^j) * S_{2^j}
with a single float multiplication per coordinate.  Every retraction in
retract_fd resolves its result through this canonical form, which is what
makes the exact (bitwise) retraction-axiom checks possible downstream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._pairwise import lipschitz_from_images, min_pairwise_distance
from .family import RetractionFamily
from .geometry import NormKind, norm_of, norm_rows

DEFAULT_BUDGET = 3e5

# Candidate-lattice spacings keeping pool sizes desk-scale per dimension.
_DEFAULT_MESH = {1: 0.5, 2: 0.25, 3: 0.5}


class BudgetExceededError(RuntimeError):
    """Candidate pool would exceed the configured enumeration budget."""


class SeparationError(ValueError):
    """A point set violates its stated separation."""


class ParseError(ValueError):
    """A net/spiderweb/grid file could not be parsed."""


def default_mesh(dim: int) -> float:
    return _DEFAULT_MESH.get(dim, 1.0)


@dataclass(frozen=True)
class NetParams:
    """Separation a and density radius b of an (a, b)-net."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("net parameters must be finite")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("net parameters must be positive")
        if self.a > 2 * self.b:
            raise ValueError("an (a,b)-net needs a <= 2b")


def sphere_candidates(dim, norm_kind, radius, mesh, budget=DEFAULT_BUDGET):
    """Candidate pool on the radius-sphere: projected lattice points.

    All lattice points of spacing ``mesh`` within ``mesh`` of the sphere are
    radially projected onto it; the result is deduplicated and returned in
    lexicographic order.
    """
    if mesh <= 0 or radius <= 0:
        raise ValueError("mesh and radius must be positive")
    if dim * (radius / mesh) ** dim > budget:
        raise BudgetExceededError(
            f"candidate pool {dim}*({radius}/{mesh})^{dim} exceeds budget {budget:g}"
        )
    n = int(math.floor((radius + mesh) / mesh + 1e-9))
    axis = np.arange(-n, n + 1, dtype=float) * mesh
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    norms = norm_rows(pts, norm_kind)
    keep = (norms > 0) & (np.abs(norms - radius) <= mesh + 1e-12)
    pts, norms = pts[keep], norms[keep]
    proj = pts * (radius / norms)[:, None]
    return sorted({tuple(row) for row in proj.tolist()})


def _dist_fn(norm_kind):
    if norm_kind == NormKind.LINF:
        def d(u, v):
            m = 0.0
            for a, b in zip(u, v):
                c = abs(a - b)
                if c > m:
                    m = c
            return m
    elif norm_kind == NormKind.L1:
        def d(u, v):
            return sum(abs(a - b) for a, b in zip(u, v))
    else:
        def d(u, v):
            return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))
    return d


def greedy_separated(candidates, a, seeds=(), norm_kind=NormKind.L2):
    """Greedy maximal a-separated subset of seeds + candidates.

    Seeds are kept first (they must already be a-separated); candidates are
    then accepted in the given order whenever they are at distance >= a from
    everything accepted so far.  Uses grid buckets of side a, sound for all
    supported norms since each dominates the sup norm.
    """
    if a <= 0:
        raise ValueError("separation must be positive")
    seeds = [tuple(float(c) for c in p) for p in seeds]
    candidates = [tuple(float(c) for c in p) for p in candidates]
    if not seeds and not candidates:
        return []
    dim = len(seeds[0]) if seeds else len(candidates[0])
    dist = _dist_fn(norm_kind)
    offsets = list(itertools.product((-1, 0, 1), repeat=dim))
    inv = 1.0 / a
    tol = 1e-12
    cells = {}
    floor = math.floor

    def conflicts(p):
        key = tuple(floor(c * inv) for c in p)
        for off in offsets:
            bucket = cells.get(tuple(k + o for k, o in zip(key, off)))
            if bucket:
                for q in bucket:
                    if dist(p, q) < a - tol:
                        return True
        return False

    def insert(p):
        key = tuple(floor(c * inv) for c in p)
        cells.setdefault(key, []).append(p)

    out = []
    for p in seeds:
        if conflicts(p):
            raise SeparationError(f"seeds violate {a}-separation at {p}")
        insert(p)
        out.append(p)
    for p in candidates:
        if not conflicts(p):
            insert(p)
            out.append(p)
    return out


@dataclass
class SpiderwebBase:
    """Dyadic layers plus canonically scaled shells of a spiderweb base.

    ``dyadic_layers[2^j]`` lives on the sphere of radius 2^j; the first
    ``seed_counts[2^{j+1}]`` entries of the next layer are exactly the doubled
    previous layer.  Shell m (non-dyadic) is (m / 2^j) * S_{2^j}.
    """

    dim: int
    norm_kind: NormKind
    params: NetParams
    dyadic_layers: dict
    seed_counts: dict
    max_shell: int
    mesh: float
    _cache: dict = field(default_factory=dict, repr=False)

    def zero(self):
        return (0.0,) * self.dim

    def levels(self):
        return sorted(self.dyadic_layers)

    @property
    def max_materializable_shell(self) -> int:
        return 2 * max(self.dyadic_layers) - 1

    def layer(self, m: int):
        """Shell S_m as a list of canonical point tuples."""
        if m == 0:
            return [self.zero()]
        if not 1 <= m <= self.max_materializable_shell:
            raise ValueError(f"shell {m} outside materialized range")
        j = m.bit_length() - 1
        base = self.dyadic_layers[1 << j]
        if m == 1 << j:
            return list(base)
        scale = m / (1 << j)
        return [tuple(c * scale for c in p) for p in base]

    def layer_array(self, m: int) -> np.ndarray:
        key = ("layer", m)
        if key not in self._cache:
            self._cache[key] = np.asarray(self.layer(m), dtype=float)
        return self._cache[key]

    def canonical_point(self, m: int, k: int):
        """Point k of shell m in canonical float form."""
        if m == 0:
            return self.zero()
        j = m.bit_length() - 1
        p = self.dyadic_layers[1 << j][k]
        if m == 1 << j:
            return p
        scale = m / (1 << j)
        return tuple(c * scale for c in p)

    def rho_target(self, n: int):
        """Target layer of the nearest-point map at radius n.

        Returns (coords array, dyadic level j) where row k of the array is the
        scaled copy of S_{2^j}[k]; for dyadic n the target is 2 * S_{n/2}, for
        the rest it coincides with shell n itself.
        """
        if n < 2:
            raise ValueError("rho target defined for n >= 2")
        key = ("rho", n)
        if key in self._cache:
            return self._cache[key]
        if n & (n - 1) == 0:  # dyadic
            j = n.bit_length() - 2
            arr = 2.0 * self.layer_array(n >> 1)
        else:
            j = n.bit_length() - 1
            arr = self.layer_array(n)
        self._cache[key] = (arr, j)
        return self._cache[key]

    def point_set(self, max_shell=None):
        """All points of shells 0..max_shell, shell by shell."""
        ms = self.max_shell if max_shell is None else max_shell
        pts = [self.zero()]
        for m in range(1, ms + 1):
            pts.extend(self.layer(m))
        return pts


def layer(base: SpiderwebBase, m: int):
    return base.layer(m)


@lru_cache(maxsize=32)
def _cached_base(dim, norm_kind, a, max_shell, mesh, budget):
    radii = [1 << j for j in range(max_shell.bit_length())]
    radii = [r for r in radii if r <= max_shell]
    layers, seed_counts = {}, {}
    prev = None
    for r in radii:
        cands = sphere_candidates(dim, norm_kind, float(r), mesh, budget)
        seeds = [] if prev is None else [tuple(2.0 * c for c in p) for p in prev]
        pts = greedy_separated(cands, a, seeds, norm_kind)
        layers[r] = pts
        seed_counts[r] = len(seeds)
        prev = pts
    return SpiderwebBase(
        dim=dim,
        norm_kind=norm_kind,
        params=NetParams(a, 2 * a),
        dyadic_layers=layers,
        seed_counts=seed_counts,
        max_shell=max_shell,
        mesh=mesh,
    )


def build_spiderweb_base(dim, norm_kind, a=1.0, max_shell=4, mesh=None,
                         budget=DEFAULT_BUDGET):
    """Inductive greedy construction of an (a, 2a)-spiderweb base.

    S_1 is a maximal a-separated subset of the unit-sphere candidate pool and
    each S_{2^{j+1}} is grown greedily around the seeds 2 * S_{2^j}.  The 2a
    density is the construction target; achieved density is measured, not
    assumed (finite pools add a mesh-dependent slack).
    """
    if not 0 < a < 2:
        raise ValueError("base separation must lie in (0, 2)")
    if max_shell < 1:
        raise ValueError("max_shell must be >= 1")
    if mesh is None:
        mesh = default_mesh(dim)
    return _cached_base(int(dim), NormKind(norm_kind), float(a), int(max_shell),
                        float(mesh), float(budget))


@dataclass
class Spiderweb:
    """A net containing a spiderweb base: the base plus extra net points."""

    base: SpiderwebBase
    extra_points: list
    params: NetParams

    def point_set(self, max_shell=None):
        return self.base.point_set(max_shell) + [tuple(p) for p in self.extra_points]

    @property
    def norm_kind(self):
        return self.base.norm_kind

    @property
    def dim(self):
        return self.base.dim


# ---------------------------------------------------------------------------
# validation


@dataclass
class NetValidation:
    min_pairwise: float
    separation_witness: tuple
    max_sample_distance: float
    density_witness: tuple
    pass_separation: bool
    pass_density: bool
    params: NetParams
    region: str
    radius: float
    n_samples: int
    seed: int


def sample_region(dim, norm_kind, region, radius, n, seed):
    """Seeded quasi-dense sample of a ball, sphere or box region."""
    rng = np.random.default_rng(seed)
    if region == "box":
        return rng.uniform(-radius, radius, size=(n, dim))
    out = []
    got = 0
    while got < n:
        batch = rng.uniform(-radius, radius, size=(max(n, 1024), dim))
        norms = norm_rows(batch, norm_kind)
        if region == "ball":
            keep = batch[norms <= radius]
        elif region == "sphere":
            ok = norms > 1e-12
            keep = batch[ok] * (radius / norms[ok])[:, None]
        else:
            raise ValueError(f"unknown region {region!r}")
        out.append(keep[: n - got])
        got += len(keep[: n - got])
    return np.concatenate(out, axis=0)


def max_distance_to(points_arr, samples, norm_kind):
    """Max over samples of the distance to the nearest point; with witness."""
    worst, wit = -1.0, None
    for start in range(0, len(samples), 512):
        block = samples[start:start + 512]
        d = norm_rows(block[:, None, :] - points_arr[None, :, :], norm_kind).min(axis=1)
        k = int(np.argmax(d))
        if d[k] > worst:
            worst = float(d[k])
            wit = tuple(float(c) for c in block[k])
    return worst, wit


def validate_net(points, norm_kind, params: NetParams, region="ball", radius=None,
                 n_samples=10_000, seed=0):
    """Measure separation exactly and density empirically against a sample.

    Separation is the exact minimum over all pairs; density is the maximum
    distance from seeded region samples to the net, so it is a lower estimate
    of the true covering radius.
    """
    pts = [tuple(float(c) for c in p) for p in points]
    if not pts:
        raise ValueError("need at least one point")
    arr = np.asarray(pts, dtype=float)
    min_pair, sep_wit = min_pairwise_distance(arr, norm_kind)
    wit_pts = (pts[sep_wit[0]], pts[sep_wit[1]]) if sep_wit else None
    if radius is None:
        radius = float(norm_rows(arr, norm_kind).max())
    samples = sample_region(arr.shape[1], norm_kind, region, radius, n_samples, seed)
    worst, dens_wit = max_distance_to(arr, samples, norm_kind)
    return NetValidation(
        min_pairwise=min_pair,
        separation_witness=wit_pts,
        max_sample_distance=worst,
        density_witness=dens_wit,
        pass_separation=min_pair >= params.a - 1e-12,
        pass_density=worst <= params.b + 1e-9,
        params=params,
        region=region,
        radius=radius,
        n_samples=n_samples,
        seed=seed,
    )


def pool_covering_radius(dim, norm_kind, radius, mesh, n_samples=2000, seed=0,
                         budget=DEFAULT_BUDGET):
    """Measured covering slack delta(mesh) of the candidate pool on a sphere."""
    cands = np.asarray(sphere_candidates(dim, norm_kind, radius, mesh, budget))
    samples = sample_region(dim, norm_kind, "sphere", radius, n_samples, seed)
    worst, _ = max_distance_to(cands, samples, norm_kind)
    return worst


# ---------------------------------------------------------------------------
# Lipschitz equivalences and the net -> spiderweb transfer


@dataclass
class LipschitzEquivalence:
    """A bijection between two finite point sets with measured constants."""

    forward: dict
    lip_forward: float
    lip_backward: float
    norm_kind: NormKind
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.forward.values())) != len(self.forward):
            raise ValueError("forward table is not a bijection")

    @property
    def distortion(self) -> float:
        return self.lip_forward * self.lip_backward

    def inverse(self):
        return LipschitzEquivalence(
            forward={v: k for k, v in self.forward.items()},
            lip_forward=self.lip_backward,
            lip_backward=self.lip_forward,
            norm_kind=self.norm_kind,
            meta=dict(self.meta),
        )


def identity_equivalence(points, norm_kind):
    pts = [tuple(float(c) for c in p) for p in points]
    return LipschitzEquivalence({p: p for p in pts}, 1.0, 1.0, norm_kind)


def measure_equivalence(forward, norm_kind):
    """Measured Lipschitz constants of a bijection given as a dict."""
    dom = np.asarray(list(forward.keys()), dtype=float)
    img = np.asarray(list(forward.values()), dtype=float)
    lf, _ = lipschitz_from_images(dom, img, norm_kind)
    lb, _ = lipschitz_from_images(img, dom, norm_kind)
    return lf, lb


def net_to_spiderweb(points, norm_kind, params: NetParams, base=None, mesh=None,
                     budget=DEFAULT_BUDGET):
    """Transfer an (a, b)-net onto a spiderweb through the nearest-point map.

    The net is rescaled by 1/(3b) to an (a/3b, 1/3)-net, every point of a
    (1, 2)-spiderweb base is relabelled to its nearest rescaled net point
    (ties lexicographic; injectivity is required and checked), and the
    spiderweb is the base together with the unclaimed net points.  Returns the
    spiderweb, whose parameters are (a/6b, 2), and the bijection F with its
    measured constants; ``meta`` records the maximum relabelling displacement,
    which stays below the rescaled density 1/3.
    """
    a, b = params.a, params.b
    scale = 1.0 / (3.0 * b)
    tilde = sorted(tuple(c * scale for c in p) for p in points)
    if not tilde:
        raise ValueError("net must be nonempty")
    arr = np.asarray(tilde, dtype=float)
    norms = norm_rows(arr, norm_kind)
    max_norm = float(norms.max())
    if base is None:
        shell = max(1, math.ceil(max_norm - 1e-9) - 1)
        base = build_spiderweb_base(arr.shape[1], norm_kind, a=1.0, max_shell=shell,
                                    mesh=mesh, budget=budget)
    if base.max_shell > max_norm + 1e-9:
        raise ValueError("base extends beyond the region covered by the net")

    forward = {}
    used = set()
    max_disp = 0.0
    for p in base.point_set():
        d = norm_rows(arr - np.asarray(p), norm_kind)
        k = int(np.argmin(d))  # tilde is sorted, so first minimum is lex smallest
        if k in used:
            raise SeparationError(
                "nearest-point map is not injective; net violates its separation"
            )
        used.add(k)
        forward[tilde[k]] = p
        max_disp = max(max_disp, float(d[k]))
    extras = [t for i, t in enumerate(tilde) if i not in used]
    for t in extras:
        forward[t] = t

    web = Spiderweb(base=base, extra_points=extras,
                    params=NetParams(a * scale / 2.0, 2.0))
    lf, lb = measure_equivalence(forward, norm_kind)
    eq = LipschitzEquivalence(
        forward=forward, lip_forward=lf, lip_backward=lb, norm_kind=norm_kind,
        meta={
            "max_displacement": max_disp,
            "displacement_bound": 1.0 / 3.0,
            "distortion_bound": (2 * b / a + 1) * (4 * b / a + 1),
            "rescale": scale,
        },
    )
    return web, eq


def transport_basis(eq: LipschitzEquivalence, family: RetractionFamily):
    """Conjugate a retraction family through a Lipschitz equivalence.

    The equivalence's domain must be the family's point set; the returned
    family lives on the image points, reordered by image, and satisfies the
    same retraction axioms with constant at most distortion * constant.
    """
    if set(eq.forward) != set(family.points):
        raise ValueError("equivalence domain does not match family points")
    new_points = [eq.forward[p] for p in family.points]
    coords = np.asarray(new_points, dtype=float)
    kind = eq.norm_kind

    def pair_distance(I, J):
        return norm_rows(coords[I] - coords[J], kind)

    return RetractionFamily(
        points=new_points,
        coords=coords,
        levels=family.levels,
        level_bounds=family.level_bounds,
        level_images=family.level_images,
        pair_distance=pair_distance,
        theoretical_bound=None,
        label=f"transport({family.label})",
        meta={"distortion": eq.distortion, "source_bound": family.theoretical_bound},
    )


def random_separated_net(dim, norm_kind, a, region_radius, seed,
                         candidate_factor=24):
    """Seeded random maximal a-separated net of the radius-R ball.

    Greedy over uniformly sampled candidates in random order; with the default
    candidate density the result is empirically an (a, ~a)-net of the ball.
    """
    n_cells = (2.0 * region_radius / a) ** dim
    n_cand = int(candidate_factor * n_cells)
    samples = sample_region(dim, norm_kind, "ball", region_radius, n_cand, seed)
    cands = [tuple(float(c) for c in row) for row in samples]
    return greedy_separated(cands, a, seeds=(), norm_kind=norm_kind)


# ---------------------------------------------------------------------------
# file formats


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header_line(fields) -> str:
    return " ".join(f"{k}={v}" for k, v in fields)


def _parse_header(line, path):
    out = {}
    for tok in line.split():
        if "=" not in tok:
            raise ParseError(f"{path}: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def save_net(path, points, norm_kind, params: NetParams):
    pts = [tuple(float(c) for c in p) for p in points]
    if not pts:
        raise ValueError("refusing to save an empty net")
    lines = [_header_line([("dim", len(pts[0])), ("norm", NormKind(norm_kind).value),
                           ("a", _fmt(params.a)), ("b", _fmt(params.b))])]
    lines += [" ".join(_fmt(c) for c in p) for p in pts]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_net(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = _parse_header(lines[0], path)
    try:
        dim = int(head["dim"])
        kind = NormKind(head["norm"])
        params = NetParams(float(head["a"]), float(head["b"]))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header ({exc})") from None
    pts = []
    for ln in lines[1:]:
        vals = ln.split()
        if len(vals) != dim:
            raise ParseError(f"{path}: expected {dim} coordinates, got {len(vals)}")
        try:
            pts.append(tuple(float(v) for v in vals))
        except ValueError:
            raise ParseError(f"{path}: bad coordinate in {ln!r}") from None
    if not pts:
        raise ParseError(f"{path}: no points")
    return pts, kind, params


def save_spiderweb(path, web: Spiderweb):
    """Persist stored dyadic layers plus extra points; shells rematerialize."""
    base = web.base
    lines = [_header_line([
        ("dim", base.dim), ("norm", base.norm_kind.value),
        ("a", _fmt(web.params.a)), ("b", _fmt(web.params.b)),
        ("base_a", _fmt(base.params.a)), ("max_shell", base.max_shell),
        ("mesh", _fmt(base.mesh)),
    ])]
    for r in base.levels():
        for p in base.dyadic_layers[r]:
            lines.append(f"layer={r} " + " ".join(_fmt(c) for c in p))
    for p in web.extra_points:
        lines.append("extra " + " ".join(_fmt(c) for c in p))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_spiderweb(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = _parse_header(lines[0], path)
    try:
        dim = int(head["dim"])
        kind = NormKind(head["norm"])
        params = NetParams(float(head["a"]), float(head["b"]))
        base_a = float(head["base_a"])
        max_shell = int(head["max_shell"])
        mesh = float(head["mesh"])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header ({exc})") from None
    layers, extras = {}, []
    for ln in lines[1:]:
        toks = ln.split()
        tag, coords = toks[0], toks[1:]
        if len(coords) != dim:
            raise ParseError(f"{path}: expected {dim} coordinates in {ln!r}")
        try:
            p = tuple(float(v) for v in coords)
        except ValueError:
            raise ParseError(f"{path}: bad coordinate in {ln!r}") from None
        if tag.startswith("layer="):
            layers.setdefault(int(tag[len("layer="):]), []).append(p)
        elif tag == "extra":
            extras.append(p)
        else:
            raise ParseError(f"{path}: unknown record tag {tag!r}")
    if not layers:
        raise ParseError(f"{path}: spiderweb file has no layers")
    radii = sorted(layers)
    if radii != [1 << j for j in range(len(radii))]:
        raise ParseError(f"{path}: dyadic layers {radii} are not 1,2,4,...")
    seed_counts = {r: 0 for r in radii}
    for lo, hi in zip(radii, radii[1:]):
        seed_counts[hi] = len(layers[lo])
    base = SpiderwebBase(dim=dim, norm_kind=kind, params=NetParams(base_a, 2 * base_a),
                         dyadic_layers=layers, seed_counts=seed_counts,
                         max_shell=max_shell, mesh=mesh)
    return Spiderweb(base=base, extra_points=extras, params=params)
