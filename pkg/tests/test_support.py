import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specgeom.spaces import CantorSpec, gen_cantor, gen_circle
from specgeom.support import (
    EmptyLevelError,
    SupportError,
    SupportSet,
    bounding_radius,
    brute_density,
    build_multiscale_support,
    complete_support,
    dens_loc_estimate,
    greedy_net,
    incidence_graph,
    load_support,
    local_density_profile,
    multiscale_phi,
    relative_bounding_radius,
    save_graph,
    save_support,
    verify_density_at_least,
)

from conftest import matrix_space, planar


def naive_density(support):
    """inf_z sup_b |z|/|zb| by direct enumeration of all ordered z and b."""
    d = support.space.dist
    n = d.shape[0]
    ordered = support.ordered_pairs()
    best = math.inf
    for x in range(n):
        for x2 in range(n):
            if x == x2:
                continue
            sup = 0.0
            for y, y2 in ordered:
                zb = max(d[x, y], d[x2, y2])
                sup = max(sup, math.inf if zb == 0 else d[x, x2] / zb)
            best = min(best, sup)
    return best


def cantor(n, p, depth):
    return gen_cantor(CantorSpec(n, p, depth))


def test_collinear_density_is_one(collinear):
    B = SupportSet(collinear, [(0, 2)])
    assert brute_density(B) == 1.0
    assert naive_density(B) == 1.0


def test_complete_support_counts_and_density(collinear):
    B = complete_support(collinear)
    assert B.n_ordered == 6
    assert brute_density(B) == math.inf
    X = gen_circle(7)
    assert complete_support(X).n_ordered == 7 * 6


def test_complete_support_budget():
    with pytest.raises(SupportError):
        complete_support(gen_circle(50), pair_budget=100)


def test_two_point_multiscale():
    X = matrix_space([[0, 3], [3, 0]])
    B = build_multiscale_support(X, 4.0)
    assert B.ordered_pairs().tolist() == [[0, 1], [1, 0]]
    assert brute_density(B) == math.inf


def test_phi_for_finite_and_infinite_D():
    phi = multiscale_phi(3.0)
    assert phi(0.5) == phi(1e-6) == 6.0
    phi = multiscale_phi(math.inf)
    assert phi(0.1) == 4.0
    assert phi(1e-4) == pytest.approx(math.log(1e4))


@pytest.mark.parametrize("n,depth", [(1, 5), (1, 6), (2, 4)])
def test_multiscale_density_at_least_four(n, depth):
    B = build_multiscale_support(cantor(n, 2, depth), 4.0)
    assert brute_density(B) >= 4.0


@pytest.mark.parametrize("D", [2.5, 3.0, 6.0, 10.0])
def test_multiscale_density_on_planar_points(D):
    X = planar(np.random.default_rng(7), 60)
    B = build_multiscale_support(X, D)
    assert brute_density(B) >= D


def test_multiscale_rejects_small_D():
    with pytest.raises(SupportError):
        build_multiscale_support(gen_circle(8), 2.0)


def test_multiscale_rejects_small_delta1():
    with pytest.raises(SupportError):
        build_multiscale_support(gen_circle(8), 4.0, delta1=0.01)


def test_infinite_D_delta1_cap():
    with pytest.raises(SupportError):
        build_multiscale_support(gen_circle(8), math.inf, delta1=100.0)


def test_multiscale_witness_property():
    """Every z has a support pair within |z| * 2/phi in the max metric."""
    D = 4.0
    X = cantor(2, 2, 4)
    B = build_multiscale_support(X, D)
    from specgeom.support import approximation_error

    e = approximation_error(B)
    off = ~np.eye(X.n, dtype=bool)
    assert np.all(e[off] <= X.dist[off] * 2 / multiscale_phi(D)(1.0))


def test_multiscale_lengths_are_original_in_infinite_mode():
    X = gen_circle(40)
    B = build_multiscale_support(X, math.inf)
    assert np.array_equal(B.lengths, X.dist[B.pairs[:, 0], B.pairs[:, 1]])
    assert B.meta["scale"] == pytest.approx(0.25 / X.diameter)


@given(st.integers(3, 9), st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_density_matches_naive(n, seed, k):
    rng = np.random.default_rng(seed)
    X = planar(rng, n)
    all_pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n)])
    pick = all_pairs[rng.choice(len(all_pairs), size=min(k, len(all_pairs)), replace=False)]
    B = SupportSet(X, pick)
    assert brute_density(B) == naive_density(B)


def test_density_threads_identical():
    B = build_multiscale_support(cantor(1, 2, 6), 4.0)
    assert brute_density(B, threads=1) == brute_density(B, threads=3)


def test_threshold_mode():
    B = build_multiscale_support(cantor(1, 2, 6), 4.0)
    D = brute_density(B)
    assert verify_density_at_least(B, 4.0)
    assert verify_density_at_least(B, D)
    assert not verify_density_at_least(B, D + 1)


def test_density_size_limit():
    B = complete_support(gen_circle(20))
    with pytest.raises(SupportError):
        brute_density(B, limit=10)


def test_symmetry_by_construction(collinear):
    B = SupportSet(collinear, [(2, 0), (1, 0), (0, 1)])
    assert B.pairs.tolist() == [[0, 1], [0, 2]]
    o = set(map(tuple, B.ordered_pairs().tolist()))
    assert all((j, i) in o for i, j in o)


def test_from_ordered_requires_reverse(collinear):
    with pytest.raises(SupportError):
        SupportSet.from_ordered(collinear, [(0, 1), (1, 2), (2, 1)])
    B = SupportSet.from_ordered(collinear, [(0, 1), (1, 0)])
    assert len(B) == 1


def test_no_diagonal(collinear):
    with pytest.raises(SupportError):
        SupportSet(collinear, [(1, 1)])


def test_level_filter(collinear):
    B = complete_support(collinear)
    assert B.count_at(1.5) == 2
    assert B.vertices_at(1.5).tolist() == [0, 2]
    assert B.count_at(0.5) == 6


def test_bounding_radius_collinear(collinear):
    B = SupportSet(collinear, [(0, 2)])
    assert bounding_radius(B, 2.0) == 1.0
    assert bounding_radius(complete_support(collinear), 1.0) == 0.0
    with pytest.raises(EmptyLevelError):
        bounding_radius(B, 3.0)


@pytest.mark.parametrize("space", [cantor(1, 2, 6), cantor(2, 2, 4), gen_circle(64)])
def test_bounding_radius_bound(space):
    for D in (3.0, 4.0, 8.0):
        B = build_multiscale_support(space, D)
        Dm = brute_density(B)
        factor = 1.0 if math.isinf(Dm) else Dm / (Dm - 2)
        for t in np.unique(B.lengths):
            assert bounding_radius(B, t) <= factor * t


def test_relative_bounding_radius_complete():
    B = complete_support(cantor(1, 2, 4))
    assert relative_bounding_radius(B) <= 1.0


@pytest.mark.parametrize("space", [cantor(1, 2, 8), gen_circle(256)])
@pytest.mark.parametrize("D", [3.0, 4.0, math.inf])
def test_relative_bounding_radius_uniformly_perfect(space, D):
    """delta(t)/t <= R/(D-2) with R = 2 and the measured density, at every level."""
    from specgeom.spaces import check_uniformly_perfect

    assert check_uniformly_perfect(space, 2.0, space.diameter)[0]
    B = build_multiscale_support(space, D)
    Dm = brute_density(B)
    ts = np.unique(B.lengths)
    assert relative_bounding_radius(B, ts) <= 2.0 / (Dm - 2)
    # infinite density near the diagonal: the finest levels see every point
    assert dens_loc_estimate(B, [space.min_positive_distance]) == math.inf
    assert bounding_radius(B, float(ts[0])) == 0.0


def test_relative_bounding_radius_empty_window(collinear):
    B = SupportSet(collinear, [(0, 1)])
    with pytest.raises(EmptyLevelError):
        relative_bounding_radius(B, [5.0])


def test_local_density_complete_is_infinite():
    B = complete_support(cantor(1, 2, 4))
    assert all(v == math.inf for _, v in local_density_profile(B, [1.0, 0.5, 0.25]))


def test_local_density_grows_for_infinite_D():
    B = build_multiscale_support(cantor(1, 2, 6), math.inf)
    profile = local_density_profile(B, [2.0 ** -k for k in range(0, 6)])
    values = [v for _, v in profile]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] == math.inf
    assert values[0] < math.inf


def test_local_density_grid_checked():
    B = complete_support(gen_circle(5))
    with pytest.raises(ValueError):
        local_density_profile(B, [0.1, 0.2])


@given(st.integers(4, 10), st.integers(0, 2**32 - 1))
def test_local_density_nondecreasing_as_t_shrinks(n, seed):
    X = planar(np.random.default_rng(seed), n)
    B = build_multiscale_support(X, 3.0)
    grid = np.geomspace(X.diameter, X.min_positive_distance, 6)
    vals = [v for _, v in local_density_profile(B, grid)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert vals[0] == brute_density(B)


def test_incidence_graph_path():
    X = matrix_space([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    B = SupportSet(X, [(0, 1), (1, 2)])
    g = incidence_graph(B, None, 0.5)
    assert g.connected and len(g.vertices) == 3
    assert np.all(g.degrees() >= 1)


def test_incidence_graph_level(collinear):
    B = complete_support(collinear)
    g = incidence_graph(B, None, 2.0)
    assert g.vertices.tolist() == [0, 2]
    assert len(g.edges) == 1
    with pytest.raises(EmptyLevelError):
        incidence_graph(B, None, 2.5)


def test_incidence_graph_cantor_connected():
    B = build_multiscale_support(cantor(2, 2, 4), 4.0)
    g = incidence_graph(B, None, B.lengths.min())
    # breadth-first search from vertex 0
    adj = {int(v): set() for v in g.vertices}
    for i, j in g.edges.tolist():
        adj[i].add(j)
        adj[j].add(i)
    seen, todo = {int(g.vertices[0])}, [int(g.vertices[0])]
    while todo:
        for w in adj[todo.pop()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    assert len(seen) == len(g.vertices)
    assert g.n_components == 1


def test_greedy_net_covers():
    X = planar(np.random.default_rng(3), 80)
    for delta in (0.05, 0.1, 0.3):
        net = greedy_net(X, delta)
        assert X.dist[:, net].min(axis=1).max() <= delta
        assert net[0] == 0 or 0 in net


def test_support_round_trip(tmp_path):
    X = cantor(1, 2, 4)
    B = build_multiscale_support(X, 4.0)
    save_support(B, tmp_path / "s.txt")
    text = (tmp_path / "s.txt").read_text()
    assert text.startswith("#support n=16\n")
    C = load_support(tmp_path / "s.txt", X)
    assert np.array_equal(C.pairs, B.pairs)
    assert np.array_equal(C.lengths, B.lengths)


def test_support_file_checks(tmp_path, collinear):
    bad = tmp_path / "b.txt"
    bad.write_text("#support n=3\n0,1,1\n")
    with pytest.raises(SupportError):
        load_support(bad, collinear)
    bad.write_text("#support n=3\n0,1,2\n1,0,2\n")
    with pytest.raises(SupportError):
        load_support(bad, collinear)
    bad.write_text("#support n=4\n0,1,1\n1,0,1\n")
    with pytest.raises(SupportError):
        load_support(bad, collinear)


def test_graph_export(tmp_path, collinear):
    g = incidence_graph(complete_support(collinear), None, 1.5)
    save_graph(g, tmp_path / "g.txt")
    assert (tmp_path / "g.txt").read_text() == "#gamma t=1.5\n0,2,2\n2,0,2\n"
