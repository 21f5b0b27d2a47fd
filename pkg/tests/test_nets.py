import math

import numpy as np
import pytest

from lipnet.geometry import NormKind, norm_of, norm_rows
from lipnet.nets import (
    BudgetExceededError,
    NetParams,
    ParseError,
    SeparationError,
    Spiderweb,
    build_spiderweb_base,
    greedy_separated,
    identity_equivalence,
    layer,
    load_net,
    load_spiderweb,
    net_to_spiderweb,
    pool_covering_radius,
    random_separated_net,
    save_net,
    save_spiderweb,
    sphere_candidates,
    transport_basis,
    validate_net,
)
from lipnet.retract_fd import build_fd_family, build_ordered_net
from lipnet.lipcheck import check_retractional_axioms, family_constant


def test_net_params_validation():
    NetParams(1.0, 2.0)
    with pytest.raises(ValueError):
        NetParams(0.0, 1.0)
    with pytest.raises(ValueError):
        NetParams(1.0, -1.0)
    with pytest.raises(ValueError):
        NetParams(3.0, 1.0)  # a > 2b
    with pytest.raises(ValueError):
        NetParams(float("inf"), 1.0)


def test_sphere_candidates_1d():
    assert sphere_candidates(1, NormKind.LINF, 3.0, 0.5) == [(-3.0,), (3.0,)]
    assert sphere_candidates(1, NormKind.L2, 3.0, 0.5) == [(-3.0,), (3.0,)]


def test_sphere_candidates_matches_enumeration_recipe():
    # oracle: enumerate the lattice directly, project, dedupe, sort
    mesh, radius = 0.5, 1.0
    lattice = [
        (i * mesh, j * mesh)
        for i in range(-3, 4)
        for j in range(-3, 4)
    ]
    expected = set()
    for p in lattice:
        n = norm_of(p, NormKind.LINF)
        if n > 0 and abs(n - radius) <= mesh + 1e-12:
            expected.add(tuple(c * (radius / n) for c in p))
    got = sphere_candidates(2, NormKind.LINF, radius, mesh)
    assert got == sorted(expected)
    # the boundary points of the half-step grid survive projection
    grid_boundary = {
        (x, y)
        for x in (-1.0, -0.5, 0.0, 0.5, 1.0)
        for y in (-1.0, -0.5, 0.0, 0.5, 1.0)
        if max(abs(x), abs(y)) == 1.0
    }
    assert grid_boundary <= set(got)


def test_sphere_candidates_axis_points_survive_coarse_mesh():
    got = sphere_candidates(2, NormKind.L2, 1.0, 3.0)
    for axis in [(-1.0, 0.0), (1.0, 0.0), (0.0, -1.0), (0.0, 1.0)]:
        assert axis in got


def test_sphere_candidates_budget():
    with pytest.raises(BudgetExceededError):
        sphere_candidates(3, NormKind.L2, 8.0, 0.5, budget=100)


def test_pool_covering_radius_small():
    delta = pool_covering_radius(2, NormKind.LINF, 1.0, 0.25, n_samples=2000, seed=0)
    assert delta <= 0.3


def test_greedy_separated_examples():
    out = greedy_separated([(0.0,), (0.5,), (1.2,)], 1.0, norm_kind=NormKind.LINF)
    assert out == [(0.0,), (1.2,)]
    assert greedy_separated([], 1.0, seeds=[(3.0,)]) == [(3.0,)]
    out = greedy_separated([(1.0,), (0.9,), (3.0,)], 1.0, seeds=[(0.0,), (2.0,)],
                           norm_kind=NormKind.LINF)
    assert out == [(0.0,), (2.0,), (1.0,), (3.0,)]


def test_greedy_separated_seed_violation():
    with pytest.raises(SeparationError):
        greedy_separated([], 1.0, seeds=[(0.0,), (0.5,)], norm_kind=NormKind.LINF)


def test_greedy_separated_maximality():
    rng = np.random.default_rng(4)
    for kind in (NormKind.LINF, NormKind.L2):
        cands = [tuple(p) for p in rng.uniform(-3, 3, size=(300, 2))]
        out = greedy_separated(cands, 1.0, norm_kind=kind)
        arr = np.asarray(out)
        # pairwise separation
        for i in range(len(out)):
            d = norm_rows(arr - arr[i], kind)
            d[i] = np.inf
            assert d.min() >= 1.0 - 1e-12
        # maximality: every candidate is within a of an accepted point
        for c in cands:
            assert norm_rows(arr - np.asarray(c), kind).min() < 1.0


def test_build_base_1d(base_1d):
    assert sorted(p[0] for p in base_1d.point_set(4)) == [-4, -3, -2, -1, 0, 1, 2, 3, 4]
    assert base_1d.dyadic_layers[1] == [(-1.0,), (1.0,)]
    assert layer(base_1d, 3) == [(-3.0,), (3.0,)]
    assert layer(base_1d, 2) is not None and base_1d.layer(2) == [(-2.0,), (2.0,)]
    assert base_1d.layer(1) == base_1d.dyadic_layers[1]
    with pytest.raises(ValueError):
        base_1d.layer(99)


def test_build_base_validation():
    with pytest.raises(ValueError):
        build_spiderweb_base(1, NormKind.LINF, a=2.5)
    with pytest.raises(ValueError):
        build_spiderweb_base(1, NormKind.LINF, max_shell=0)


def test_base_containment_and_separation(base_2d):
    for r in base_2d.levels():
        pts = np.asarray(base_2d.dyadic_layers[r], dtype=float)
        if r > 1:
            seeds = [tuple(2.0 * c for c in p) for p in base_2d.dyadic_layers[r >> 1]]
            assert base_2d.dyadic_layers[r][: len(seeds)] == seeds
        for i in range(len(pts)):
            d = norm_rows(pts - pts[i], NormKind.LINF)
            d[i] = np.inf
            assert d.min() >= 1.0 - 1e-12


def test_shell_density_within_slack(base_2d):
    # shells stay within the 2a target plus the measured candidate-pool slack
    from lipnet.nets import max_distance_to, sample_region
    delta = pool_covering_radius(2, NormKind.LINF, 1.0, base_2d.mesh, seed=1)
    for m in (1, 2, 3, 4):
        pts = np.asarray(base_2d.layer(m), dtype=float)
        samples = sample_region(2, NormKind.LINF, "sphere", float(m), 4000, seed=m)
        worst, _ = max_distance_to(pts, samples, NormKind.LINF)
        assert worst <= 2.0 * base_2d.params.a + max(delta * m, delta) + 1e-9


def test_validate_net_examples():
    single = validate_net([(0.0,)], NormKind.LINF, NetParams(1.0, 2.0), radius=1.0,
                          n_samples=10, seed=0)
    assert single.min_pairwise == math.inf and single.pass_separation
    ints = [(float(k),) for k in range(-10, 11)]
    rep = validate_net(ints, NormKind.LINF, NetParams(1.0, 0.5), region="box",
                       radius=10.0, n_samples=4000, seed=0)
    assert rep.min_pairwise == 1.0
    assert rep.max_sample_distance <= 0.5 + 1e-9
    assert rep.pass_separation and rep.pass_density


def test_net_to_spiderweb_fixed_point(base_1d):
    # a net equal to 3b * base rescales onto the base: everything is fixed
    b = 2.0
    pts = [tuple(3.0 * b * c for c in p) for p in base_1d.point_set()]
    web, eq = net_to_spiderweb(pts, NormKind.LINF, NetParams(1.0, b), base=base_1d)
    assert web.extra_points == []
    assert eq.meta["max_displacement"] == 0.0
    assert eq.distortion == 1.0
    assert all(eq.forward[p] == p for p in eq.forward)


def test_net_to_spiderweb_1d_lattice():
    # 1.1-spaced lattice as a (1.1, 0.55)-net; distortion bound (2b/a+1)(4b/a+1) = 6
    pts = [(1.1 * k,) for k in range(-20, 21)]
    params = NetParams(1.1, 0.55)
    web, eq = net_to_spiderweb(pts, NormKind.LINF, params)
    assert eq.meta["max_displacement"] <= 1.0 / 3.0 + 1e-9
    assert eq.distortion <= 6.0 + 1e-9
    scale = eq.meta["rescale"]
    assert len(eq.forward) == len(pts)
    assert len(set(eq.forward.values())) == len(pts)
    # spiderweb parameters follow the transfer: (a / 6b, 2)
    assert web.params.a == pytest.approx(1.1 * scale / 2)
    assert web.params.b == 2.0


def test_net_to_spiderweb_rejects_nearest_point_collision(base_1d):
    # a gap in the net makes two base points claim the same nearest net point
    pts = [(6.0 * k,) for k in range(-8, 9) if k != 1]
    with pytest.raises(SeparationError):
        net_to_spiderweb(pts, NormKind.LINF, NetParams(1.0, 2.0), base=base_1d)


def test_transport_basis_identity(family_1d, net_1d):
    eq = identity_equivalence(net_1d.points, NormKind.LINF)
    moved = transport_basis(eq, family_1d)
    assert moved.points == family_1d.points
    for g in (0, 3, 10):
        assert np.array_equal(moved.image_row(g), family_1d.image_row(g))
    k0, _, _ = family_constant(family_1d)
    k1, _, _ = family_constant(moved)
    assert k0 == k1


def test_transport_basis_domain_mismatch(family_1d):
    eq = identity_equivalence([(0.0,), (1.0,)], NormKind.LINF)
    with pytest.raises(ValueError):
        transport_basis(eq, family_1d)


def test_transport_measured_bound_and_axioms():
    rng_seed = 11
    pts = random_separated_net(2, NormKind.LINF, 1.0, 10.0, rng_seed)
    web, eq = net_to_spiderweb(pts, NormKind.LINF, NetParams(1.0, 2.0))
    net = build_ordered_net(web)
    fam = build_fd_family(net)
    moved = transport_basis(eq.inverse(), fam)
    k_in, _, _ = family_constant(fam)
    k_out, _, _ = family_constant(moved)
    assert k_out <= eq.distortion * k_in + 1e-9
    rep = check_retractional_axioms(moved, bound=eq.distortion * k_in + 1e-9)
    assert rep.all_pass


def test_net_file_roundtrip(tmp_path):
    pts = [(0.125, -3.0), (1.0 / 3.0, 7.25)]
    path = tmp_path / "net.txt"
    save_net(path, pts, NormKind.L2, NetParams(0.5, 1.5))
    got, kind, params = load_net(path)
    assert got == pts and kind == NormKind.L2
    assert (params.a, params.b) == (0.5, 1.5)
    save_net(path, got, kind, params)
    again, _, _ = load_net(path)
    assert again == pts


def test_spiderweb_file_roundtrip(tmp_path, base_2d):
    web = Spiderweb(base=base_2d, extra_points=[(0.4, 0.3)], params=base_2d.params)
    path = tmp_path / "web.txt"
    save_spiderweb(path, web)
    loaded = load_spiderweb(path)
    assert loaded.base.dyadic_layers == base_2d.dyadic_layers
    assert loaded.base.seed_counts == base_2d.seed_counts
    assert loaded.extra_points == [(0.4, 0.3)]
    assert loaded.base.max_shell == base_2d.max_shell
    # byte-identical re-emission
    save_spiderweb(tmp_path / "web2.txt", loaded)
    assert (tmp_path / "web.txt").read_bytes() == (tmp_path / "web2.txt").read_bytes()


def test_load_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("")
    with pytest.raises(ParseError):
        load_net(p)
    p.write_text("dim=2 norm=LINF a=1 b=2\n1.0\n")
    with pytest.raises(ParseError):
        load_net(p)
    p.write_text("dim=1 norm=LINF a=1 b=2 base_a=1 max_shell=4 mesh=0.5\nbogus 1.0\n")
    with pytest.raises(ParseError):
        load_spiderweb(p)
