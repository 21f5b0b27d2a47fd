import math

import numpy as np
import pytest

from lipnet.geometry import (
    Ambient,
    BlockSpace,
    NormKind,
    Vector,
    block_norms,
    norm,
    norm_of,
    norm_rows,
    radial_project,
    radial_project_coords,
)


def test_norm_examples():
    for kind in NormKind:
        assert norm(Vector((0.0, 0.0), kind)) == 0.0
    assert norm(Vector((3.0, 4.0), NormKind.L2)) == 5.0
    assert norm(Vector((3.0, -4.0), NormKind.LINF)) == 4.0
    assert norm(Vector((3.0, -4.0), NormKind.L1)) == 7.0


def test_norm_zero_iff_zero():
    rng = np.random.default_rng(0)
    for kind in NormKind:
        for _ in range(50):
            v = rng.normal(size=3)
            assert (norm_of(v, kind) == 0.0) == bool(np.all(v == 0))


def test_vector_validation():
    with pytest.raises(ValueError):
        Vector((), NormKind.L2)
    with pytest.raises(ValueError):
        Vector((1.0, float("nan")), NormKind.L2)
    with pytest.raises(ValueError):
        Vector((float("inf"),), NormKind.L1)


def test_radial_project_examples():
    assert radial_project(Vector((0.5, 0.5), NormKind.LINF), 1.0).coords == (0.5, 0.5)
    assert radial_project(Vector((4.0, 0.0), NormKind.L2), 2.0).coords == (2.0, 0.0)
    x = radial_project(Vector((3.0, 4.0), NormKind.L2), 1.0)
    assert x.coords == pytest.approx((0.6, 0.8), abs=1e-15)
    assert radial_project_coords((0.0, 0.0), 0.0, NormKind.L2) == (0.0, 0.0)
    with pytest.raises(ValueError):
        radial_project_coords((1.0,), -1.0, NormKind.L2)


def test_norm_axioms_random():
    rng = np.random.default_rng(1)
    for kind in NormKind:
        for _ in range(200):
            x = rng.uniform(-3, 3, size=4)
            y = rng.uniform(-3, 3, size=4)
            lam = rng.uniform(-5, 5)
            assert abs(norm_of(lam * x, kind) - abs(lam) * norm_of(x, kind)) <= 1e-12
            assert norm_of(x + y, kind) <= norm_of(x, kind) + norm_of(y, kind) + 1e-12


def test_radial_projection_properties():
    rng = np.random.default_rng(2)
    for kind in NormKind:
        for _ in range(200):
            x = tuple(rng.uniform(-4, 4, size=3))
            s = rng.uniform(0, 3)
            t = rng.uniform(0, 3)
            rx = radial_project_coords(x, s, kind)
            assert norm_of(rx, kind) <= norm_of(x, kind) + 1e-12
            assert abs(norm_of(rx, kind) - min(norm_of(x, kind), s)) <= 1e-12
            # idempotence
            rrx = radial_project_coords(rx, s, kind)
            assert max(abs(a - b) for a, b in zip(rx, rrx)) <= 1e-12
            # composition law
            a = radial_project_coords(radial_project_coords(x, t, kind), s, kind)
            b = radial_project_coords(x, min(s, t), kind)
            assert max(abs(u - v) for u, v in zip(a, b)) <= 1e-12


def test_norm_rows_matches_scalar():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2, 2, size=(64, 3))
    for kind in NormKind:
        rows = norm_rows(pts, kind)
        for row, val in zip(pts, rows):
            assert math.isclose(norm_of(row, kind), float(val), abs_tol=1e-14)


def test_block_space_validation():
    with pytest.raises(ValueError):
        BlockSpace(blocks=())
    with pytest.raises(ValueError):
        BlockSpace(blocks=((0, NormKind.L2),))
    sp = BlockSpace(blocks=((2, NormKind.LINF), (1, NormKind.L2)))
    assert sp.total_dim == 3 and sp.n_blocks == 2


def test_block_norms_examples():
    sp = BlockSpace(blocks=((2, NormKind.LINF), (2, NormKind.LINF)))
    per, amb = block_norms([(0.0, 0.0), (0.0, 0.0)], sp)
    assert per == [0.0, 0.0] and amb == 0.0
    per, amb = block_norms([(0.0, 0.0), (1.5, -0.5)], sp)
    assert amb == 1.5
    sp1 = BlockSpace(blocks=((2, NormKind.LINF), (2, NormKind.LINF)),
                     ambient=Ambient.L1_SUM)
    per, amb = block_norms([(1.0, 0.0), (2.0, 0.0)], sp1)
    assert per == [1.0, 2.0] and amb == 3.0
    with pytest.raises(ValueError):
        block_norms([(1.0,), (2.0, 0.0)], sp)
    with pytest.raises(ValueError):
        block_norms([(1.0, 0.0)], sp)
