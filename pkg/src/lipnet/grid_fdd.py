"""Diamond-indexed grids over block sums and their retraction routes.

Grid points are finite block sums with one spiderweb-base point (possibly 0)
per block, so block norms are exact integers.  The diamond radii shrink by
the factor k * 2^(k+2) per block, giving integer reciprocals q_k; everything
combinatorial (the diamond index s(x), membership, the nontrivial-step
sequence) is computed in exact integer/rational arithmetic, while block
coordinates stay floating point.

Two routes to the same retractions are kept deliberately separate: the
iterative route applies one nontrivial local step per unit of block norm,
and the closed-form route jumps straight to the answer from the step count;
the map F^s is the continuous companion the proximity bounds compare against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .family import RetractionFamily, cached_level_images
from .geometry import Ambient, NormKind, norm_of, norm_rows
from .nets import NetParams, ParseError, SpiderwebBase, build_spiderweb_base, default_mesh
from .retract_fd import Psi


@dataclass(frozen=True)
class QSeq:
    """Reciprocal diamond radii: q_1 = 1, q_{k+1} = q_k * k * 2^(k+2); q_0 = 0."""

    q: tuple

    @classmethod
    def build(cls, k_max: int):
        if k_max < 1:
            raise ValueError("k_max must be >= 1")
        q = [0, 1]
        for k in range(1, k_max):
            q.append(q[-1] * k * (1 << (k + 2)))
        return cls(q=tuple(q))

    def __getitem__(self, k: int) -> int:
        return self.q[k]

    def r(self, s: int, k: int) -> Fraction:
        """Diamond radius r_k^s = s / q_k as an exact rational."""
        return Fraction(s, self.q[k])


def q_seq(k_max: int) -> QSeq:
    return QSeq.build(k_max)


@dataclass(frozen=True)
class GridSpace:
    """Block spiderweb bases plus the ambient combination rule."""

    bases: tuple
    ambient: Ambient
    params: NetParams
    q: QSeq

    @classmethod
    def build(cls, bases, ambient=Ambient.SUP_SUM, params=None):
        bases = tuple(bases)
        if params is None:
            a = min(b.params.a for b in bases)
            bb = max(b.params.b for b in bases)
            params = NetParams(a, bb)
        return cls(bases=bases, ambient=Ambient(ambient), params=params,
                   q=QSeq.build(len(bases)))

    @property
    def n_blocks(self) -> int:
        return len(self.bases)

    @property
    def dims(self):
        return tuple(b.dim for b in self.bases)

    @property
    def norm_kinds(self):
        return tuple(b.norm_kind for b in self.bases)

    def zero_block(self, i: int):
        return (0.0,) * self.bases[i].dim

    def zero_point(self):
        return GridPoint(blocks=tuple(self.zero_block(i) for i in range(self.n_blocks)),
                         norms=(0,) * self.n_blocks)

    def block_slices(self):
        out, off = [], 0
        for d in self.dims:
            out.append(slice(off, off + d))
            off += d
        return out

    def ambient_norm(self, block_values) -> float:
        if self.ambient == Ambient.SUP_SUM:
            return max(block_values)
        return float(sum(block_values))

    def point_norm(self, blocks) -> float:
        vals = [norm_of(b, base.norm_kind) for b, base in zip(blocks, self.bases)]
        return self.ambient_norm(vals)

    def distance(self, x, y) -> float:
        vals = [norm_of(tuple(a - b for a, b in zip(xb, yb)), base.norm_kind)
                for xb, yb, base in zip(x.blocks, y.blocks, self.bases)]
        return self.ambient_norm(vals)

    def pair_distance_rows(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Ambient distances between aligned rows of flat coordinates."""
        diff = A - B
        per = np.stack(
            [norm_rows(diff[:, sl], kind)
             for sl, kind in zip(self.block_slices(), self.norm_kinds)],
            axis=0,
        )
        return per.max(axis=0) if self.ambient == Ambient.SUP_SUM else per.sum(axis=0)


@dataclass(frozen=True)
class GridPoint:
    """A grid element: one base point per block, with exact integer norms."""

    blocks: tuple
    norms: tuple

    @property
    def n(self) -> int:
        """Index of the last nonzero block (1-based); 0 for the origin."""
        for i in range(len(self.norms) - 1, -1, -1):
            if self.norms[i] > 0:
                return i + 1
        return 0

    @property
    def total_norm_steps(self) -> int:
        return sum(self.norms)

    def flat(self):
        return tuple(c for b in self.blocks for c in b)


@dataclass(frozen=True)
class BlockVector:
    """A block-decomposed vector with exact rational block norms.

    Images of F^s have this shape: the truncated prefix keeps its integer
    norms and the pivot block gets the rational radius value.
    """

    blocks: tuple
    norms: tuple  # Fractions

    @property
    def n(self) -> int:
        for i in range(len(self.norms) - 1, -1, -1):
            if self.norms[i] > 0:
                return i + 1
        return 0

    def flat(self):
        return tuple(c for b in self.blocks for c in b)


def as_block_vector(x) -> BlockVector:
    if isinstance(x, BlockVector):
        return x
    return BlockVector(blocks=x.blocks, norms=tuple(Fraction(int(c)) for c in x.norms))


def s_of(x, space: GridSpace) -> int:
    """Diamond index of a grid point: the weighted norm sum, exactly."""
    return sum(int(c) * space.q[i + 1] for i, c in enumerate(x.norms))


def in_diamond(x, s, space: GridSpace) -> bool:
    """Membership in the diamond of size s.

    Exact for grid points (integer comparison).  For block-decomposed vectors
    with rational norms the same weighted-sum test runs in exact rationals;
    general inputs are only covered through their block decomposition, so the
    verdict is as approximate as the supplied norms.
    """
    if isinstance(x, BlockVector):
        total = sum(c * space.q[i + 1] for i, c in enumerate(x.norms))
        return total <= s
    return s_of(x, space) <= s


def local_phi(space: GridSpace, x: GridPoint) -> GridPoint:
    """One nontrivial local step: the last nonzero block loses one unit of norm."""
    n = x.n
    if n == 0:
        raise ValueError("local step undefined at the origin")
    c = x.norms[n - 1]
    base = space.bases[n - 1]
    new_block = Psi(base, c - 1, x.blocks[n - 1])
    blocks = list(x.blocks)
    norms = list(x.norms)
    blocks[n - 1] = new_block if c > 1 else space.zero_block(n - 1)
    norms[n - 1] = c - 1
    return GridPoint(blocks=tuple(blocks), norms=tuple(norms))


def orbit(space: GridSpace, x: GridPoint):
    """The nontrivial-step trajectory [(s_0, x), (s_1, phi..), ..., (0, origin)]."""
    out = [(s_of(x, space), x)]
    cur = x
    while out[-1][0] > 0:
        cur = local_phi(space, cur)
        out.append((s_of(cur, space), cur))
    return out


def sk_sequence(space: GridSpace, x: GridPoint, s_stop: int = 0):
    """Diamond indices of the nontrivial-step trajectory, stopping at s_stop."""
    out = []
    for s, _ in orbit(space, x):
        out.append(s)
        if s <= s_stop:
            break
    return out


def phi_grid(space: GridSpace, s: int, x: GridPoint) -> GridPoint:
    """Global retraction onto the discrete diamond N_s, by nontrivial steps."""
    if s < 0:
        raise ValueError("s must be >= 0")
    cur = x
    while s_of(cur, space) > s:
        cur = local_phi(space, cur)
    return cur


def phi_naive(space: GridSpace, s: int, x: GridPoint) -> GridPoint:
    """Oracle: literal composition of all local maps, identities included."""
    cur = x
    for t in range(s_of(x, space), s, -1):
        if s_of(cur, space) == t:
            cur = local_phi(space, cur)
    return cur


def ij_of(k: int, x: GridPoint):
    """The unique split of step count k into (skipped blocks, units in the pivot)."""
    total = x.total_norm_steps
    if not 1 <= k <= total:
        raise ValueError(f"k must be in 1..{total}")
    n = x.n
    csum = 0
    for i in range(n):
        c = x.norms[n - i - 1]
        if k <= csum + c:
            return i, k - csum
        csum += c
    raise AssertionError("unreachable: k <= total")


def phi_closed_form(space: GridSpace, k: int, x: GridPoint) -> GridPoint:
    """Closed form of the k-th nontrivial retraction image.

    Zeroes the last i(k, x) blocks and retracts the pivot block by j(k, x)
    units; must coincide with phi_grid at the corresponding diamond index.
    """
    i, j = ij_of(k, x)
    n = x.n
    t = n - i  # pivot block, 1-based
    c = x.norms[t - 1]
    base = space.bases[t - 1]
    blocks = [x.blocks[p] if p < t - 1 else space.zero_block(p)
              for p in range(len(x.blocks))]
    norms = [x.norms[p] if p < t - 1 else 0 for p in range(len(x.norms))]
    if c - j > 0:
        blocks[t - 1] = Psi(base, c - j, x.blocks[t - 1])
        norms[t - 1] = c - j
    return GridPoint(blocks=tuple(blocks), norms=tuple(norms))


# ---------------------------------------------------------------------------
# the HM21 companion map F^s


def m_of(space: GridSpace, x, s: int) -> int:
    """Largest block count whose norm prefix still fits in the diamond of size s."""
    bv = as_block_vector(x)
    n = bv.n
    csum = Fraction(0)
    m = 1
    for k in range(2, n + 2):
        nxt = csum + bv.norms[k - 2] * space.q[k - 1]
        if nxt <= s:
            csum = nxt
            m = k
        else:
            break
    return m


def f_value(space: GridSpace, x, m: int, s: int) -> Fraction:
    """Leftover radius of block m in the diamond of size s (exact rational)."""
    bv = as_block_vector(x)
    csum = sum((bv.norms[i] * space.q[i + 1] for i in range(m - 1)), Fraction(0))
    return (Fraction(s) - csum) / space.q[m]


def F_s(space: GridSpace, s: int, x) -> BlockVector:
    """Radial-style retraction onto the diamond of size s.

    Identity on the diamond; otherwise keeps the blocks before the pivot,
    shrinks the pivot block radially to the leftover radius and drops the
    rest.  F^0 is constantly 0.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    bv = as_block_vector(x)
    zero = tuple(Fraction(0) for _ in bv.norms)
    if s == 0:
        return BlockVector(
            blocks=tuple((0.0,) * space.bases[i].dim for i in range(space.n_blocks)),
            norms=zero,
        )
    n = bv.n
    if n == 0:
        return bv
    m = m_of(space, bv, s)
    if m == n + 1:
        return bv
    f = f_value(space, bv, m, s)
    blocks = [bv.blocks[p] if p < m - 1 else (0.0,) * space.bases[p].dim
              for p in range(len(bv.blocks))]
    norms = [bv.norms[p] if p < m - 1 else Fraction(0) for p in range(len(bv.norms))]
    if f > 0:
        scale = float(f / bv.norms[m - 1])
        blocks[m - 1] = tuple(c * scale for c in bv.blocks[m - 1])
        norms[m - 1] = f
    return BlockVector(blocks=tuple(blocks), norms=tuple(norms))


def block_vector_distance(space: GridSpace, x, y) -> float:
    """Ambient distance between two block-decomposed vectors."""
    bx, by = as_block_vector(x), as_block_vector(y)
    vals = [norm_of(tuple(a - b for a, b in zip(xb, yb)), base.norm_kind)
            for xb, yb, base in zip(bx.blocks, by.blocks, space.bases)]
    return space.ambient_norm(vals)


# ---------------------------------------------------------------------------
# enumeration, ordering, family


def enumerate_grid(space: GridSpace, max_norms) -> list:
    """All grid points with per-block norms up to the given budgets."""
    if len(max_norms) != space.n_blocks:
        raise ValueError("one norm budget per block")
    per_block = []
    for i, (base, cap) in enumerate(zip(space.bases, max_norms)):
        if cap > base.max_shell:
            raise ValueError(f"block {i} budget {cap} exceeds materialized shells")
        vals = [(0, space.zero_block(i))]
        for m in range(1, cap + 1):
            vals.extend((m, p) for p in base.layer(m))
        per_block.append(vals)
    out = []
    for combo in itertools.product(*per_block):
        out.append(GridPoint(blocks=tuple(p for _, p in combo),
                             norms=tuple(m for m, _ in combo)))
    return out


def default_grid_space(n_blocks=2, dim=2, norm_kind=NormKind.LINF, a=1.0,
                       max_shell=4, mesh=None, ambient=Ambient.SUP_SUM):
    """The stock grid: identical (a, 2a)-spiderweb-base blocks."""
    base = build_spiderweb_base(dim, norm_kind, a=a, max_shell=max_shell, mesh=mesh)
    return GridSpace.build([base] * n_blocks, ambient=ambient)


@dataclass
class OrderedGrid:
    """Grid points ordered by (diamond index, lexicographic flat coordinates)."""

    space: GridSpace
    grid_points: list
    points: list  # flat tuples, aligned with grid_points
    coords: np.ndarray
    s_values: np.ndarray
    index_of: dict
    orbit_s: list
    orbit_g: list

    def phi_index(self, s: int, i: int) -> int:
        """Position of phi_s applied to point i (orbit lookup)."""
        s_asc, g_asc = self.orbit_s[i], self.orbit_g[i]
        k = int(np.searchsorted(s_asc, s, side="right")) - 1
        return int(g_asc[k])


def build_ordered_grid(space: GridSpace, grid_points) -> OrderedGrid:
    recs = sorted(((s_of(g, space), g.flat(), g) for g in grid_points),
                  key=lambda r: (r[0], r[1]))
    grid_pts = [r[2] for r in recs]
    flats = [r[1] for r in recs]
    index_of = {p: i for i, p in enumerate(flats)}
    if len(index_of) != len(flats):
        raise ValueError("duplicate grid points")
    s_values = np.asarray([r[0] for r in recs], dtype=np.int64)
    orbit_s, orbit_g = [], []
    for g in grid_pts:
        traj = orbit(space, g)
        ss = np.asarray([t[0] for t in traj][::-1], dtype=np.int64)
        gg = np.asarray([index_of[t[1].flat()] for t in traj][::-1], dtype=np.int64)
        orbit_s.append(ss)
        orbit_g.append(gg)
    return OrderedGrid(space=space, grid_points=grid_pts, points=flats,
                       coords=np.asarray(flats, dtype=float), s_values=s_values,
                       index_of=index_of, orbit_s=orbit_s, orbit_g=orbit_g)


def build_grid_family(ordered: OrderedGrid, label="grid") -> RetractionFamily:
    """The lexicographic retractional basis of an ordered grid.

    Same two-branch rule as the spiderweb family, with diamond shells in the
    role of norm shells.  The constant bound (12b + 4)/a + Lip(F^s) involves
    the measured Lipschitz norm of F^s, so ``theoretical_bound`` stays unset
    here; certification supplies it.
    """
    space = ordered.space
    P = len(ordered.points)
    levels = sorted(set(ordered.s_values.tolist()))
    bounds = []
    for s in levels:
        idx = np.flatnonzero(ordered.s_values == s)
        bounds.append((int(idx[0]), int(idx[-1])))

    def images(k):
        s = levels[k]
        hi = np.asarray([ordered.phi_index(s, i) for i in range(P)], dtype=np.int64)
        if s == 0:
            return hi, hi
        lo = np.asarray([ordered.phi_index(s - 1, i) for i in range(P)], dtype=np.int64)
        return hi, lo

    coords = ordered.coords

    def pair_distance(I, J):
        return space.pair_distance_rows(coords[I], coords[J])

    return RetractionFamily(
        points=ordered.points,
        coords=coords,
        levels=levels,
        level_bounds=bounds,
        level_images=cached_level_images(images),
        pair_distance=pair_distance,
        theoretical_bound=None,
        label=label,
        meta={"a": space.params.a, "b": space.params.b, "ambient": space.ambient.value},
    )


# ---------------------------------------------------------------------------
# grid files


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_grid(path, space: GridSpace, grid_points, max_norms):
    amb = "SUP" if space.ambient == Ambient.SUP_SUM else "L1"
    head = (
        f"blocks={space.n_blocks}"
        f" dims={','.join(str(d) for d in space.dims)}"
        f" norms={','.join(k.value for k in space.norm_kinds)}"
        f" ambient={amb}"
        f" a={_fmt(space.params.a)} b={_fmt(space.params.b)}"
        f" max_norms={','.join(str(int(m)) for m in max_norms)}"
        f" mesh={','.join(_fmt(b.mesh) for b in space.bases)}"
        f" max_shell={','.join(str(b.max_shell) for b in space.bases)}"
    )
    lines = [head]
    for g in grid_points:
        norms = " ".join(str(int(c)) for c in g.norms)
        coords = " ".join(_fmt(c) for c in g.flat())
        lines.append(f"{norms} {coords}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = {}
    for tok in lines[0].split():
        if "=" not in tok:
            raise ParseError(f"{path}: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        head[k] = v
    try:
        nb = int(head["blocks"])
        dims = [int(v) for v in head["dims"].split(",")]
        kinds = [NormKind(v) for v in head["norms"].split(",")]
        ambient = Ambient.SUP_SUM if head["ambient"] == "SUP" else Ambient.L1_SUM
        a, b = float(head["a"]), float(head["b"])
        max_norms = [int(v) for v in head["max_norms"].split(",")]
        meshes = [float(v) for v in head["mesh"].split(",")]
        shells = [int(v) for v in head["max_shell"].split(",")]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: bad header ({exc})") from None
    if not (len(dims) == len(kinds) == len(max_norms) == len(meshes) == len(shells) == nb):
        raise ParseError(f"{path}: inconsistent per-block header lists")
    bases = [build_spiderweb_base(d, k, a=a, max_shell=ms, mesh=me)
             for d, k, ms, me in zip(dims, kinds, shells, meshes)]
    space = GridSpace.build(bases, ambient=ambient, params=NetParams(a, b))
    layer_sets = [
        {m: set(base.layer(m)) for m in range(0, cap + 1)}
        for base, cap in zip(bases, max_norms)
    ]
    total_dim = sum(dims)
    pts = []
    for ln in lines[1:]:
        vals = ln.split()
        if len(vals) != nb + total_dim:
            raise ParseError(f"{path}: bad record length in {ln!r}")
        try:
            norms = tuple(int(v) for v in vals[:nb])
            flat = [float(v) for v in vals[nb:]]
        except ValueError:
            raise ParseError(f"{path}: bad number in {ln!r}") from None
        blocks, off = [], 0
        for d in dims:
            blocks.append(tuple(flat[off:off + d]))
            off += d
        g = GridPoint(blocks=tuple(blocks), norms=norms)
        for i, (blk, c) in enumerate(zip(blocks, norms)):
            if c > max_norms[i] or blk not in layer_sets[i][c]:
                raise ParseError(f"{path}: block {i} of {ln!r} not on its base shell")
        pts.append(g)
    if not pts:
        raise ParseError(f"{path}: no grid points")
    return space, pts, max_norms
