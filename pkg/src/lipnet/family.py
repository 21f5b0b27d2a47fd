"""The common shape of retraction families over a finite ordered point list.

Both retraction constructions in this package (spiderwebs in retract_fd,
diamond grids in grid_fdd) produce families of the same two-branch form: the
points are enumerated shell by shell, and the retraction onto the first g+1
points maps x either to its full-shell image or, when that image lies beyond
position g, to the previous-shell image.  A family is therefore described by
its shell ("level") structure plus, per level, the two candidate image rows;
everything else (evaluation, certification, transport) is generic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RetractionFamily:
    """Ordered point list plus an indexed evaluator (index, point) -> point.

    ``levels[k]`` is the level key (shell index or diamond size) of the k-th
    level, ``level_bounds[k]`` the (first, last) global retraction indices of
    that level, and ``level_images(k)`` returns the pair of image-index rows
    (hi, lo): hi[i] is the position of the full-level image of point i, lo[i]
    of the previous-level image.  Retraction g in level k maps i to hi[i] when
    hi[i] <= g and to lo[i] otherwise.
    """

    points: list
    coords: np.ndarray
    levels: list
    level_bounds: list
    level_images: object
    pair_distance: object
    theoretical_bound: float | None = None
    label: str = ""
    meta: dict = field(default_factory=dict)
    _index_of: dict = field(default=None, repr=False)
    _level_of: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def n_indices(self) -> int:
        return len(self.points)

    @property
    def index_of(self):
        if self._index_of is None:
            self._index_of = {p: i for i, p in enumerate(self.points)}
        return self._index_of

    def level_of_index(self, g: int) -> int:
        if self._level_of is None:
            lv = np.empty(len(self.points), dtype=np.int32)
            for k, (lo, hi) in enumerate(self.level_bounds):
                lv[lo:hi + 1] = k
            self._level_of = lv
        return int(self._level_of[g])

    def image_index(self, g: int, i: int) -> int:
        """Position of the image of point i under retraction g."""
        hi, lo = self.level_images(self.level_of_index(g))
        j = int(hi[i])
        return j if j <= g else int(lo[i])

    def image_row(self, g: int) -> np.ndarray:
        """Image positions of every point under retraction g."""
        hi, lo = self.level_images(self.level_of_index(g))
        return np.where(hi <= g, hi, lo).astype(np.int64)

    def evaluate(self, g: int, point):
        """Apply retraction g to a point of the net."""
        i = self.index_of.get(tuple(point))
        if i is None:
            raise KeyError(f"{point!r} is not a point of the family")
        return self.points[self.image_index(g, i)]

    def distance(self, i: int, j: int) -> float:
        return float(self.pair_distance(np.asarray([i]), np.asarray([j]))[0])


def cached_level_images(builder):
    """Wrap a per-level (hi, lo) builder with a memo table."""
    cache = {}

    def images(k):
        if k not in cache:
            cache[k] = builder(k)
        return cache[k]

    return images
