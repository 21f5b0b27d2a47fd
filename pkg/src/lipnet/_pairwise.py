"""Chunked pairwise machinery shared by net validation and certification.

Everything here is read-only map-reduce over index pairs; reductions run in a
fixed order so witnesses are reproducible (first, i.e. lexicographically
smallest, achiever wins ties).
"""

from __future__ import annotations

import os

import numpy as np

from .geometry import NormKind, norm_rows

_CHUNK = 1 << 20


def thread_count() -> int:
    """Parallelism cap from LIPNET_THREADS (informational; loops are chunked)."""
    raw = os.environ.get("LIPNET_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return max(1, n) if n > 0 else max(1, os.cpu_count() or 1)


def all_pair_chunks(n: int, chunk: int = _CHUNK):
    """Yield (I, J) index arrays covering every unordered pair i < j once."""
    if n < 2:
        return
    buf_i, buf_j, size = [], [], 0
    for i in range(n - 1):
        m = n - 1 - i
        buf_i.append(np.full(m, i, dtype=np.int64))
        buf_j.append(np.arange(i + 1, n, dtype=np.int64))
        size += m
        if size >= chunk:
            yield np.concatenate(buf_i), np.concatenate(buf_j)
            buf_i, buf_j, size = [], [], 0
    if size:
        yield np.concatenate(buf_i), np.concatenate(buf_j)


def sampled_pairs(n: int, k: int, seed: int):
    """k random pairs i != j, deterministic under the seed."""
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, size=k)
    j = rng.integers(0, n - 1, size=k)
    j = np.where(j >= i, j + 1, j)
    return i.astype(np.int64), j.astype(np.int64)


def reduce_max(cur_val, cur_wit, vals, I, J):
    """Fold a chunk of (value, pair) candidates into the running maximum."""
    if vals.size == 0:
        return cur_val, cur_wit
    k = int(np.argmax(vals))
    v = float(vals[k])
    if v > cur_val:
        return v, (int(I[k]), int(J[k]))
    return cur_val, cur_wit


def min_pairwise_distance(coords: np.ndarray, kind: NormKind):
    """Exact minimum over all pairs; returns (value, witness pair).

    Points are swept in first-coordinate order; a pair whose first-coordinate
    gap reaches the current best cannot improve it (that gap bounds all three
    norms from below), so each point is only compared against its window.
    The value equals the brute-force all-pairs minimum.  A single point
    vacuously yields (inf, None).
    """
    coords = np.asarray(coords, dtype=float)
    n = len(coords)
    if n < 2:
        return float("inf"), None
    order = np.lexsort(coords.T[::-1])
    pts = coords[order]
    gaps = norm_rows(pts[1:] - pts[:-1], kind)
    k = int(np.argmin(gaps))
    best, wit = float(gaps[k]), (int(order[k]), int(order[k + 1]))
    x0 = pts[:, 0]
    ends = np.searchsorted(x0, x0 + best, side="left")
    for i in range(n - 1):
        e = int(ends[i])
        if e <= i + 2:  # consecutive pair already covered by the seed scan
            continue
        d = norm_rows(pts[i + 1:e] - pts[i], kind)
        k = int(np.argmin(d))
        if d[k] < best:
            best, wit = float(d[k]), (int(order[i]), int(order[i + 1 + k]))
    a, b = sorted(wit)
    return best, (a, b)


def lipschitz_from_images(coords, images, kind: NormKind, pairs=None):
    """Sup ratio d(f(x), f(y)) / d(x, y) over pairs of point indices.

    ``images`` are the mapped coordinates aligned with ``coords``.  ``pairs``
    may be an explicit (I, J) tuple; by default all pairs are used.  Pairs at
    distance 0 are skipped.
    """
    coords = np.asarray(coords, float)
    images = np.asarray(images, float)
    best, wit = 0.0, None
    chunks = [pairs] if pairs is not None else all_pair_chunks(len(coords))
    for I, J in chunks:
        den = norm_rows(coords[I] - coords[J], kind)
        ok = den > 0
        if not np.all(ok):
            I, J, den = I[ok], J[ok], den[ok]
        num = norm_rows(images[I] - images[J], kind)
        best, wit = reduce_max(best, wit, num / den, I, J)
    return best, wit
