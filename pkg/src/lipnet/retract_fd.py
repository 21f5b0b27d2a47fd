"""Retraction families on spiderwebs in a finite-dimensional normed space.

The local retraction at radius n sends the shell ring B_n \\ B_{n-1} onto the
shell below through the nearest-point map of the scaled layer; the global
retraction composes local ones.  Between consecutive dyadic radii the scaled
layers coincide, so the composition collapses to pure radial scalings with
one genuine nearest-point step per dyadic level crossed; ``Psi`` walks that
collapsed path by default and the literal composition is kept as an oracle.

All results are resolved through the canonical shell materialization of the
base (see nets), so iterating the maps on net points reproduces net points
bitwise; the retraction axioms can therefore be checked as exact equalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .family import RetractionFamily, cached_level_images
from .geometry import NormKind, norm_of, norm_rows
from .nets import Spiderweb, SpiderwebBase
from .nets import build_spiderweb_base as _build_base  # noqa: F401 (re-export)


def n_of(coords, norm_kind) -> int:
    """Smallest positive integer radius whose ball contains the point."""
    return max(1, math.ceil(norm_of(coords, norm_kind) - 1e-9))


def _tie_threshold(dmin: float) -> float:
    # near-ties within last-ulp noise are resolved lexicographically, so the
    # choice does not depend on how the query was assembled
    return dmin * (1 + 1e-10) + 1e-12


def _argmin_lex(arr: np.ndarray, query, norm_kind) -> int:
    """Index of the nearest row; distance ties go to the lex-smallest row."""
    d = norm_rows(arr - np.asarray(query, dtype=float), norm_kind)
    k = int(np.argmin(d))
    ties = np.flatnonzero(d <= _tie_threshold(float(d[k])))
    if len(ties) > 1:
        k = min(ties, key=lambda t: tuple(arr[t]))
    return int(k)


def rho(base: SpiderwebBase, n: int, u):
    """Nearest-point map from the radius-n sphere into the scaled layer below.

    rho_1 is constantly 0; for n >= 2 the target is (n/(n-1)) * S_{n-1}, which
    equals shell n itself between dyadic radii and the doubled previous dyadic
    layer at dyadic n.
    """
    if n < 1:
        raise ValueError("rho needs n >= 1")
    if n == 1:
        return base.zero()
    if abs(norm_of(u, base.norm_kind) - n) > 1e-9:
        raise ValueError(f"rho_{n} expects a point of norm {n}")
    arr, _ = base.rho_target(n)
    return tuple(float(c) for c in arr[_argmin_lex(arr, u, base.norm_kind)])


def psi(base: SpiderwebBase, n: int, x):
    """Local retraction of the discrete ball B_n onto B_{n-1}."""
    pt = tuple(float(c) for c in x)
    nb = norm_of(pt, base.norm_kind)
    if nb > n + 1e-9:
        raise ValueError(f"psi_{n} expects a point of the ball of radius {n}")
    if nb <= n - 1 + 1e-9:
        return pt
    if n == 1:
        return base.zero()
    u = tuple(c * (n / nb) for c in pt)
    arr, _ = base.rho_target(n)
    k = _argmin_lex(arr, u, base.norm_kind)
    return base.canonical_point(n - 1, k)


def _first_step(base: SpiderwebBase, m: int, pt):
    """Apply psi_m to a point with n_of = m; returns the shell-(m-1) layer index."""
    nb = norm_of(pt, base.norm_kind)
    u = tuple(c * (m / nb) for c in pt)
    arr, _ = base.rho_target(m)
    return _argmin_lex(arr, u, base.norm_kind)


def Psi(base: SpiderwebBase, n: int, x, fast=True):
    """Global retraction onto the discrete ball of radius n.

    ``fast=False`` composes the local retractions literally; the default walks
    the collapsed path (one nearest-point step per dyadic crossing, index
    bookkeeping elsewhere).  Both resolve through canonical shell points and
    agree on net points.
    """
    if n < 0:
        raise ValueError("Psi needs n >= 0")
    pt = tuple(float(c) for c in x)
    if norm_of(pt, base.norm_kind) <= n + 1e-9:
        return pt
    m = n_of(pt, base.norm_kind)
    if not fast:
        z = pt
        for t in range(m, n, -1):
            z = psi(base, t, z)
        return z
    if m == 1:
        return base.zero()
    k = _first_step(base, m, pt)
    shell = m - 1
    while shell > n:
        if shell == 1:
            return base.zero()
        if shell & (shell - 1) == 0:  # dyadic crossing
            if k >= base.seed_counts[shell]:
                arr, _ = base.rho_target(shell)
                k = _argmin_lex(arr, base.dyadic_layers[shell][k], base.norm_kind)
        shell -= 1
    return base.canonical_point(shell, k)


# ---------------------------------------------------------------------------
# ordered nets


@dataclass
class OrderedNet:
    """Spiderweb points enumerated shell by shell, lexicographic inside shells."""

    web: Spiderweb
    points: list
    coords: np.ndarray
    shells: np.ndarray
    shell_offsets: dict
    max_shell: int
    index_of: dict
    layer_index: np.ndarray  # within-layer index for base points, -1 for extras

    @property
    def norm_kind(self) -> NormKind:
        return self.web.norm_kind

    def flat_index(self, shell: int, i: int) -> int:
        """Global position of the i-th point (1-based) of a shell."""
        if shell not in self.shell_offsets:
            raise ValueError(f"no shell {shell}")
        start, count = self.shell_offsets[shell]
        if not 1 <= i <= count:
            raise ValueError(f"shell {shell} has {count} points, asked for {i}")
        return start + i - 1


def build_ordered_net(web: Spiderweb) -> OrderedNet:
    base = web.base
    kind = base.norm_kind
    records = [((0.0,) * base.dim, 0, 0)]
    for m in range(1, base.max_shell + 1):
        for k, p in enumerate(base.layer(m)):
            records.append((p, m, k))
    for p in web.extra_points:
        pt = tuple(float(c) for c in p)
        shell = n_of(pt, kind)
        if shell > base.max_shell + 1:
            raise ValueError("extra point beyond materialized base coverage")
        records.append((pt, shell, -1))
    records.sort(key=lambda r: (r[1], r[0]))
    points = [r[0] for r in records]
    index_of = {p: i for i, p in enumerate(points)}
    if len(index_of) != len(points):
        raise ValueError("duplicate points in spiderweb")
    shells = np.asarray([r[1] for r in records], dtype=np.int64)
    layer_index = np.asarray([r[2] for r in records], dtype=np.int64)
    offsets = {}
    for n in np.unique(shells):
        mask = shells == n
        offsets[int(n)] = (int(np.flatnonzero(mask)[0]), int(mask.sum()))
    return OrderedNet(
        web=web,
        points=points,
        coords=np.asarray(points, dtype=float),
        shells=shells,
        shell_offsets=offsets,
        max_shell=int(shells.max()),
        index_of=index_of,
        layer_index=layer_index,
    )


def ordered_net_from_base(base: SpiderwebBase) -> OrderedNet:
    return build_ordered_net(Spiderweb(base=base, extra_points=[], params=base.params))


def _batch_argmin(queries: np.ndarray, targets: np.ndarray, kind) -> np.ndarray:
    """Row-wise nearest-target indices with the same tie rule as _argmin_lex."""
    out = np.empty(len(queries), dtype=np.int64)
    step = max(1, int(4e6 // max(1, len(targets))))
    for s in range(0, len(queries), step):
        block = queries[s:s + step]
        d = norm_rows(block[:, None, :] - targets[None, :, :], kind, axis=-1)
        ks = np.argmin(d, axis=1)
        mins = d[np.arange(len(block)), ks]
        thr = np.vectorize(_tie_threshold)(mins)
        multi = np.flatnonzero((d <= thr[:, None]).sum(axis=1) > 1)
        for r in multi:  # resolve ties lexicographically, same rule as _argmin_lex
            ties = np.flatnonzero(d[r] <= thr[r])
            ks[r] = min(ties, key=lambda t: tuple(targets[t]))
        out[s:s + step] = ks
    return out


def build_psi_table(net: OrderedNet) -> np.ndarray:
    """psi_table[i, n] = position of Psi_n applied to point i, for n = 0..max_shell.

    Batched shell-by-shell version of the descriptor walk in ``Psi``; agrees
    with it bitwise (same queries, same targets, same tie rule).
    """
    base = net.web.base
    kind = net.norm_kind
    P = len(net.points)
    L = net.max_shell
    shells = net.shells
    idxs = np.arange(P, dtype=np.int64)
    table = np.empty((P, L + 1), dtype=np.int64)
    for n in range(L + 1):
        table[:, n] = np.where(shells <= n, idxs, -1)

    gmap = {
        m: np.asarray([net.index_of[p] for p in base.layer(m)], dtype=np.int64)
        for m in range(0, min(base.max_shell, L) + 1)
    }
    state_k = np.where(net.layer_index >= 0, net.layer_index, -1).copy()
    norms = norm_rows(net.coords, kind)

    for m in range(L, 0, -1):
        active = shells >= m
        if not np.any(active):
            continue
        if m == 1:
            table[active, 0] = gmap[0][0]
            continue
        arr_t, _ = base.rho_target(m)
        queries, qids = [], []
        extras = np.flatnonzero((shells == m) & (net.layer_index < 0))
        if extras.size:
            queries.append(net.coords[extras] * (m / norms[extras])[:, None])
            qids.append(extras)
        if m & (m - 1) == 0 and m in base.dyadic_layers:
            # dyadic crossing: seeds carry their index, the rest need an argmin;
            # extras entering this round still hold state -1 and are excluded
            # (a dyadic shell above the stored layers only ever has entries)
            ns = base.seed_counts[m]
            stored = base.layer_array(m)
            movers = np.flatnonzero(active & (state_k >= ns))
            if movers.size:
                queries.append(stored[state_k[movers]])
                qids.append(movers)
        if queries:
            qarr = np.concatenate(queries, axis=0)
            qid = np.concatenate(qids)
            state_k[qid] = _batch_argmin(qarr, arr_t, kind)
        table[active, m - 1] = gmap[m - 1][state_k[active]]
    return table


def build_fd_family(net: OrderedNet, label="spiderweb") -> RetractionFamily:
    """The lexicographic retractional basis of an ordered spiderweb.

    Index (n, i) retracts onto the first points through shell n: the image is
    Psi_n(x) when that lands within the first i points of shell n and
    Psi_{n-1}(x) otherwise.  Theoretical constant (12b + 2)/a + 2 from the
    spiderweb parameters.
    """
    table = build_psi_table(net)
    kind = net.norm_kind
    coords = net.coords
    shells_present = sorted(net.shell_offsets)
    bounds = [
        (net.shell_offsets[n][0], net.shell_offsets[n][0] + net.shell_offsets[n][1] - 1)
        for n in shells_present
    ]

    def images(k):
        n = shells_present[k]
        hi = table[:, n]
        lo = table[:, n - 1] if n >= 1 else hi
        return hi, lo

    def pair_distance(I, J):
        return norm_rows(coords[I] - coords[J], kind)

    a, b = net.web.params.a, net.web.params.b
    return RetractionFamily(
        points=net.points,
        coords=coords,
        levels=shells_present,
        level_bounds=bounds,
        level_images=cached_level_images(images),
        pair_distance=pair_distance,
        theoretical_bound=(12 * b + 2) / a + 2,
        label=label,
        meta={"a": a, "b": b, "psi_table": table, "max_shell": net.max_shell},
    )


def phi_fd(family: RetractionFamily, index, x):
    """Evaluate the retraction at a flat position or a (shell, i) pair."""
    if isinstance(index, tuple):
        n, i = index
        k = family.levels.index(n)
        start, end = family.level_bounds[k]
        if not 1 <= i <= end - start + 1:
            raise ValueError(f"shell {n} has {end - start + 1} points")
        g = start + i - 1
    else:
        g = int(index)
    return family.evaluate(g, x)
