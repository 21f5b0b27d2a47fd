from fractions import Fraction

import numpy as np
import pytest

from lipnet.geometry import Ambient, NormKind
from lipnet.grid_fdd import (
    BlockVector,
    F_s,
    GridPoint,
    as_block_vector,
    block_vector_distance,
    build_grid_family,
    build_ordered_grid,
    default_grid_space,
    enumerate_grid,
    f_value,
    ij_of,
    in_diamond,
    load_grid,
    local_phi,
    m_of,
    orbit,
    phi_closed_form,
    phi_grid,
    phi_naive,
    q_seq,
    s_of,
    save_grid,
    sk_sequence,
)
from lipnet.nets import ParseError


@pytest.fixture(scope="module")
def space():
    return default_grid_space(n_blocks=2, dim=1, norm_kind=NormKind.LINF, max_shell=4)


@pytest.fixture(scope="module")
def points(space):
    return enumerate_grid(space, (4, 4))


def pick(points, norms):
    for p in points:
        if p.norms == norms and all(c >= 0 for b in p.blocks for c in b):
            return p
    raise LookupError(norms)


def test_q_sequence_values():
    q = q_seq(4)
    assert q.q == (0, 1, 8, 256, 24576)
    assert q.r(1, 1) == 1 and q.r(1, 2) == Fraction(1, 8)
    assert q.r(5, 3) == Fraction(5, 256)
    with pytest.raises(ValueError):
        q_seq(0)


def test_q_ratio_identities():
    q = q_seq(5)
    for s in (1, 2, 9):
        for t in (3, 17):
            for n in range(1, 6):
                assert q.r(s, n) / q.r(t, n) == Fraction(s, t)
                for m in range(n, 6):
                    ratio = q.r(s, n) / q.r(s, m)
                    assert ratio == q.r(t, n) / q.r(t, m)
                    assert ratio.denominator == 1  # integer
                    assert q.q[m] % q.q[n] == 0


def test_s_of_examples(space, points):
    zero = space.zero_point()
    assert s_of(zero, space) == 0
    x3 = pick(points, (3, 0))
    assert s_of(x3, space) == 3
    x12 = pick(points, (1, 2))
    assert s_of(x12, space) == 1 + 2 * 8


def test_in_diamond_examples(space, points):
    zero = space.zero_point()
    assert in_diamond(zero, 0, space)
    x12 = pick(points, (1, 2))
    assert not in_diamond(x12, 16, space)
    assert in_diamond(x12, 17, space)
    for x in points[::17]:
        s = s_of(x, space)
        assert in_diamond(x, s, space)
        if s > 0:
            assert not in_diamond(x, s - 1, space)


def test_local_phi_examples(space, points):
    x1 = pick(points, (1, 0))
    y = local_phi(space, x1)
    assert y == space.zero_point() and s_of(y, space) == 0
    x12 = pick(points, (1, 2))
    y = local_phi(space, x12)
    assert y.norms == (1, 1) and s_of(y, space) == 9
    with pytest.raises(ValueError):
        local_phi(space, space.zero_point())


def test_sk_sequence_examples(space, points):
    assert sk_sequence(space, space.zero_point()) == [0]
    assert sk_sequence(space, pick(points, (1, 2))) == [17, 9, 1, 0]
    assert sk_sequence(space, pick(points, (3, 0))) == [3, 2, 1, 0]
    assert sk_sequence(space, pick(points, (1, 2)), s_stop=9) == [17, 9]


def test_phi_grid_examples(space, points):
    x12 = pick(points, (1, 2))
    assert phi_grid(space, 20, x12) == x12  # identity on N_s
    one_step = local_phi(space, x12)
    assert phi_grid(space, 12, x12) == one_step  # 9 <= 12 < 17
    for x in points[::11]:
        assert phi_grid(space, 0, x) == space.zero_point()


def test_ij_examples(space, points):
    x12 = pick(points, (1, 2))
    assert ij_of(1, x12) == (0, 1)
    assert ij_of(2, x12) == (0, 2)
    assert ij_of(3, x12) == (1, 1)
    with pytest.raises(ValueError):
        ij_of(0, x12)
    with pytest.raises(ValueError):
        ij_of(4, x12)


def test_closed_form_boundaries(space, points):
    for x in points[::7]:
        total = x.total_norm_steps
        if total == 0:
            continue
        assert phi_closed_form(space, total, x) == space.zero_point()
        assert phi_closed_form(space, 1, x) == local_phi(space, x)


def test_closed_form_equals_iterative_and_naive(space, points):
    for x in points:
        sk = sk_sequence(space, x)
        for k in range(1, x.total_norm_steps + 1):
            cf = phi_closed_form(space, k, x)
            assert cf == phi_grid(space, sk[k], x)
            assert cf == phi_naive(space, sk[k], x)


def test_orbit_suffix_property(space, points):
    for x in points[::5]:
        traj = orbit(space, x)
        sk = [t[0] for t in traj]
        for m, (_, p) in enumerate(traj):
            assert sk_sequence(space, p) == sk[m:]


def test_m_of_and_f_value(space, points):
    x3 = pick(points, (3, 0))
    assert m_of(space, x3, 1) == 1
    assert f_value(space, x3, 1, 1) == 1
    F1 = F_s(space, 1, x3)
    assert F1.norms[0] == 1
    np.testing.assert_allclose(F1.blocks[0], np.asarray(x3.blocks[0]) / 3.0)


def test_F_s_examples(space, points):
    x12 = pick(points, (1, 2))
    # identity inside the diamond
    same = F_s(space, 17, x12)
    assert block_vector_distance(space, same, as_block_vector(x12)) == 0.0
    # constant zero map at s = 0
    z = F_s(space, 0, x12)
    assert all(c == 0.0 for b in z.blocks for c in b)


def test_F_semigroup(space, points):
    rng = np.random.default_rng(5)
    for _ in range(300):
        x = points[int(rng.integers(0, len(points)))]
        s = int(rng.integers(0, 40))
        t = int(rng.integers(0, 40))
        lhs = F_s(space, s, F_s(space, t, x))
        rhs = F_s(space, min(s, t), x)
        assert block_vector_distance(space, lhs, rhs) <= 1e-12


def test_block_vector_membership(space, points):
    x12 = pick(points, (1, 2))
    y = F_s(space, 12, x12)  # lands on the boundary of D^12
    total = sum(c * space.q[i + 1] for i, c in enumerate(y.norms))
    assert total == 12
    assert in_diamond(y, 12, space)
    assert not in_diamond(y, 11, space)


def test_grid_family_axiom_shapes(space, points):
    ordered = build_ordered_grid(space, points)
    fam = build_grid_family(ordered)
    assert fam.levels[0] == 0 and fam.level_bounds[0] == (0, 0)
    # retraction onto the origin only
    assert fam.evaluate(0, fam.points[5]) == fam.points[0]
    # the last retraction is the identity
    assert np.array_equal(fam.image_row(len(fam.points) - 1),
                          np.arange(len(fam.points)))
    # phi_index accords with phi_grid
    for i in (3, 20, 44):
        g = ordered.grid_points[i]
        for s in (0, 1, 5, 9, 17):
            expect = ordered.index_of[phi_grid(space, s, g).flat()]
            assert ordered.phi_index(s, i) == expect


def test_grid_enumeration_budget_check(space):
    with pytest.raises(ValueError):
        enumerate_grid(space, (9, 1))
    with pytest.raises(ValueError):
        enumerate_grid(space, (1,))


def test_grid_file_roundtrip(tmp_path, grid_space_2d):
    pts = enumerate_grid(grid_space_2d, (2, 2))
    path = tmp_path / "grid.txt"
    save_grid(path, grid_space_2d, pts, (2, 2))
    space2, pts2, max_norms = load_grid(path)
    assert max_norms == [2, 2]
    assert space2.ambient == Ambient.SUP_SUM
    assert [p.norms for p in pts2] == [p.norms for p in pts]
    assert [p.blocks for p in pts2] == [p.blocks for p in pts]
    save_grid(tmp_path / "grid2.txt", space2, pts2, max_norms)
    assert (tmp_path / "grid.txt").read_bytes() == (tmp_path / "grid2.txt").read_bytes()


def test_grid_file_rejects_off_base_points(tmp_path, grid_space_2d):
    pts = enumerate_grid(grid_space_2d, (1, 1))
    path = tmp_path / "grid.txt"
    save_grid(path, grid_space_2d, pts, (1, 1))
    lines = path.read_text().splitlines()
    # perturb a nonzero coordinate of a norm-1 block
    for i, ln in enumerate(lines[1:], start=1):
        cols = ln.split()
        if cols[0] == "1":
            cols[2] = "0.123"
            lines[i] = " ".join(cols)
            break
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ParseError):
        load_grid(path)
