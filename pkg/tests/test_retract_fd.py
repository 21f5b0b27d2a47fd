import numpy as np
import pytest

from lipnet.geometry import NormKind, norm_of, norm_rows, radial_project_coords
from lipnet.nets import NetParams, Spiderweb, net_to_spiderweb, random_separated_net
from lipnet.retract_fd import (
    Psi,
    build_fd_family,
    build_ordered_net,
    build_psi_table,
    n_of,
    ordered_net_from_base,
    phi_fd,
    psi,
    rho,
)


def test_n_of_examples():
    assert n_of((2.5,), NormKind.LINF) == 3
    assert n_of((3.0,), NormKind.LINF) == 3
    assert n_of((0.0,), NormKind.LINF) == 1
    assert n_of((0.3, -0.2), NormKind.L1) == 1


def test_rho_examples(base_1d):
    assert rho(base_1d, 3, (3.0,)) == (3.0,)
    assert rho(base_1d, 1, (1.0,)) == (0.0,)
    with pytest.raises(ValueError):
        rho(base_1d, 3, (2.0,))
    with pytest.raises(ValueError):
        rho(base_1d, 0, (0.0,))


def test_rho_fixes_target_points(base_2d):
    # rho_4 targets 2 * S_2; each such point is its own nearest point
    doubled = [tuple(2.0 * c for c in p) for p in base_2d.dyadic_layers[2]]
    for p in doubled:
        assert rho(base_2d, 4, p) == p
    # between dyadic radii the target is the shell itself
    for p in base_2d.layer(3):
        assert rho(base_2d, 3, p) == p


def test_psi_examples(base_1d):
    assert psi(base_1d, 3, (2.0,)) == (2.0,)  # identity branch
    assert psi(base_1d, 3, (3.0,)) == (2.0,)
    assert psi(base_1d, 1, (1.0,)) == (0.0,)
    with pytest.raises(ValueError):
        psi(base_1d, 2, (3.5,))


def test_psi_maps_into_lower_shell(base_2d):
    for m in (2, 3, 4):
        lower = set(base_2d.layer(m - 1))
        for p in base_2d.layer(m):
            assert psi(base_2d, m, p) in lower


def test_Psi_examples(base_1d):
    assert Psi(base_1d, 2, (1.5,)) == (1.5,)  # inside the ball: identity
    assert Psi(base_1d, 1, (5.0,)) == (1.0,)
    assert Psi(base_1d, 0, (7.0,)) == (0.0,)
    assert Psi(base_1d, 3, (8.0,)) == (3.0,)


def test_Psi_fast_equals_naive(net_1d, net_2d):
    for net in (net_1d, net_2d):
        base = net.web.base
        for p in net.points:
            for n in range(net.max_shell + 1):
                assert Psi(base, n, p) == Psi(base, n, p, fast=False)


def test_psi_table_matches_scalar(net_2d):
    table = build_psi_table(net_2d)
    base = net_2d.web.base
    for i, p in enumerate(net_2d.points):
        for n in range(net_2d.max_shell + 1):
            assert net_2d.points[table[i, n]] == Psi(base, n, p)


def test_psi_table_matches_scalar_with_extras():
    pts = random_separated_net(2, NormKind.LINF, 1.0, 9.0, seed=3)
    web, _ = net_to_spiderweb(pts, NormKind.LINF, NetParams(1.0, 2.0))
    net = build_ordered_net(web)
    table = build_psi_table(net)
    base = web.base
    for i, p in enumerate(net.points):
        for n in range(net.max_shell + 1):
            assert net.points[table[i, n]] == Psi(base, n, p)


def test_Psi_commutation_exact(net_2d):
    base = net_2d.web.base
    for p in net_2d.points:
        for n in range(5):
            for m in range(5):
                lhs = Psi(base, n, Psi(base, m, p))
                rhs = Psi(base, min(n, m), p)
                assert lhs == rhs


def test_Psi_radial_proximity(net_2d):
    # ||Psi_n(x) - R_n(x)|| <= 6b over the whole truncated net
    base = net_2d.web.base
    bound = 6.0 * net_2d.web.params.b
    for p in net_2d.points:
        for n in range(net_2d.max_shell + 1):
            img = Psi(base, n, p)
            r = radial_project_coords(p, float(n), NormKind.LINF)
            gap = norm_of([a - b for a, b in zip(img, r)], NormKind.LINF)
            assert gap <= bound + 1e-9


def test_ordered_net_structure(net_2d):
    shells = net_2d.shells
    coords = net_2d.coords
    norms = norm_rows(coords, NormKind.LINF)
    # shell index is the smallest integer ball containing the point
    for x, s in zip(norms, shells):
        if s == 0:
            assert x == 0
        else:
            assert s - 1 < x + 1e-9 and x <= s + 1e-9
    # within-shell lexicographic order
    for n, (start, count) in net_2d.shell_offsets.items():
        pts = net_2d.points[start:start + count]
        assert pts == sorted(pts)
    with pytest.raises(ValueError):
        net_2d.flat_index(0, 2)
    with pytest.raises(ValueError):
        net_2d.flat_index(99, 1)


def test_ordered_net_rejects_far_extras(base_1d):
    web = Spiderweb(base=base_1d, extra_points=[(25.0,)], params=base_1d.params)
    with pytest.raises(ValueError):
        build_ordered_net(web)


def test_phi_full_shell_is_Psi(family_2d, net_2d):
    base = net_2d.web.base
    for n in (1, 2, 3):
        start, count = net_2d.shell_offsets[n]
        for p in net_2d.points[::7]:
            assert phi_fd(family_2d, (n, count), p) == Psi(base, n, p)


def test_phi_fixes_first_points(family_2d):
    for g in (0, 5, 20, 40):
        for i in range(g + 1):
            p = family_2d.points[i]
            assert family_2d.evaluate(g, p) == p


def test_phi_flat_and_shell_indexing_agree(family_2d, net_2d):
    for n in (1, 2):
        start, count = net_2d.shell_offsets[n]
        for i in (1, count):
            g = net_2d.flat_index(n, i)
            for p in net_2d.points[::9]:
                assert phi_fd(family_2d, (n, i), p) == family_2d.evaluate(g, p)
    with pytest.raises(ValueError):
        phi_fd(family_2d, (1, 999), family_2d.points[0])


def test_family_bound_formula(family_1d, family_2d):
    # (12b + 2)/a + 2 with the spiderweb's own parameters
    for fam in (family_1d, family_2d):
        a, b = fam.meta["a"], fam.meta["b"]
        assert fam.theoretical_bound == (12 * b + 2) / a + 2


def test_family_evaluate_off_net(family_1d):
    with pytest.raises(KeyError):
        family_1d.evaluate(0, (0.123,))


def test_ordered_net_duplicate_detection(base_1d):
    web = Spiderweb(base=base_1d, extra_points=[(1.0,)], params=base_1d.params)
    with pytest.raises(ValueError):
        build_ordered_net(web)
