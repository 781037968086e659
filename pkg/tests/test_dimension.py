import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from specgeom.dimension import (
    WindowError,
    _fit,
    box_dim_estimate,
    build_qqh_support,
    dixmier_proxy,
    geometric_window,
    hausdorff_bound_check,
    hausdorff_reference,
    level_window,
    percentile_window,
    qqh_count_bound,
    qqh_levels,
    separated_set,
    spectral_dim_estimate,
)
from specgeom.geometry import SpectralGeometry
from specgeom.spaces import CantorSpec, gen_cantor, gen_circle
from specgeom.support import bounding_radius, build_multiscale_support, complete_support, relative_bounding_radius

from conftest import matrix_space, planar


@pytest.fixture(scope="module")
def p22d8():
    return gen_cantor(CantorSpec(2, 2, 8))


@pytest.fixture(scope="module")
def qqh22(p22d8):
    return build_qqh_support(p22d8, q=math.log2(3))


def test_fit_recovers_slope_one():
    t = geometric_window(0.5, 1e-3, 20)
    r = _fit("test", t, np.ceil(1.0 / t))
    assert r.slope == pytest.approx(1.0, abs=0.02)


@given(st.floats(0.2, 3.0), st.floats(0.1, 100.0))
def test_fit_power_law_exact(q, c):
    t = geometric_window(0.5, 1e-4, 10)
    r = _fit("test", t, c * t ** -q)
    assert r.slope == pytest.approx(q, rel=1e-9)
    assert r.max_slope == pytest.approx(q, rel=1e-9)


def test_fit_rejects_bad_windows():
    with pytest.raises(WindowError):
        _fit("x", [0.1, 0.2], [1, 2])
    with pytest.raises(WindowError, match="vanishes"):
        _fit("x", [0.2, 0.1], [0, 2])
    with pytest.raises(WindowError):
        geometric_window(0.1, 0.1)
    with pytest.raises(WindowError):
        percentile_window([0.0, math.inf])


def test_doubling_multiplicity_keeps_slope():
    B = build_multiscale_support(gen_cantor(CantorSpec(1, 2, 7)), 4.0)
    t = geometric_window(0.1, 0.01, 8)
    r1 = spectral_dim_estimate(SpectralGeometry(B), t)
    r2 = spectral_dim_estimate(SpectralGeometry(B, mult=np.full(len(B), 2)), t)
    assert np.array_equal(r2.counts, 2 * r1.counts)
    assert r2.slope == pytest.approx(r1.slope, rel=1e-12)


def test_spectral_needs_enough_scales():
    g = SpectralGeometry(complete_support(gen_circle(8)))
    with pytest.raises(WindowError):
        spectral_dim_estimate(g, [0.5, 0.2])


# distances are powers of two, so scales sit mid-step to avoid staircase bias
MID_STEP = geometric_window(0.75 * 2 ** -2, 0.75 * 2 ** -6, 5)


def test_box_dim_interval():
    r = box_dim_estimate(gen_cantor(CantorSpec(1, 2, 8)), MID_STEP)
    assert list(r.counts) == [8, 16, 32, 64, 128]
    assert r.slope == pytest.approx(1.0, abs=1e-12)


def test_box_dim_two_points():
    X = matrix_space([[0, 1], [1, 0]])
    r = box_dim_estimate(X, [0.9, 0.5, 0.1])
    assert list(r.counts) == [2, 2, 2]
    assert r.slope == pytest.approx(0.0, abs=1e-12)


def test_box_dim_cantor(p22d8):
    r = box_dim_estimate(p22d8, MID_STEP)
    assert r.slope == pytest.approx(math.log2(3), abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.8))
def test_separated_set_is_maximal(seed, t):
    X = planar(np.random.default_rng(seed), 40)
    S = separated_set(X, t)
    sub = X.dist[np.ix_(S, S)]
    assert np.all(sub[~np.eye(len(S), dtype=bool)] >= t)
    assert np.all(X.dist[:, S].min(axis=1) < t)


def test_dixmier_flat_and_harmonic():
    flat = dixmier_proxy(np.ones(1000), 1.0, [10, 1000])
    assert flat[0][1] == pytest.approx(10 / math.log(10))
    mu = 1.0 / np.arange(1, 200001)
    (_, v), = dixmier_proxy(mu, 1.0, [200000])
    assert v == pytest.approx(1.0, abs=0.05)


def test_dixmier_bounded_above_dimension(qqh22):
    g = SpectralGeometry(qqh22)
    n = 2 * len(qqh22)
    rows = dixmier_proxy(g, 2.0, [n // 8, n // 4, n // 2, n])
    sigma = np.array([v * math.log(N) for N, v in rows])
    assert sigma[-1] - sigma[-2] < 0.25 * sigma[-1]


def test_dixmier_rejects():
    with pytest.raises(ValueError):
        dixmier_proxy([1.0, 0.5], 0.0, [2])
    with pytest.raises(ValueError):
        dixmier_proxy([1.0, 0.5], 1.0, [1])
    with pytest.raises(ValueError):
        dixmier_proxy([1.0, 0.5], 1.0, [3])


def test_hausdorff_reference():
    assert hausdorff_reference(CantorSpec(1, 2, 3)) == pytest.approx(1.0)
    assert hausdorff_reference(CantorSpec(2, 2, 3)) == pytest.approx(math.log2(3))
    assert hausdorff_reference(CantorSpec(2, 3, 3)) == pytest.approx(1.0)


def test_qqh_levels_schedule():
    X = gen_cantor(CantorSpec(2, 2, 6))
    lv = list(qqh_levels(X))
    assert lv[0] == (5, 2 ** -5, 4 * 2 ** -4)
    assert lv[-1][1] < X.min_positive_distance / 2 <= lv[-2][1]


def test_qqh_support_rejects():
    X = gen_cantor(CantorSpec(1, 2, 4))
    with pytest.raises(ValueError):
        build_qqh_support(X, depth_range=[4, 5])
    with pytest.raises(ValueError):
        build_qqh_support(X, depth_range=[])


def test_qqh_count_bound_bounded(qqh22, p22d8):
    q = math.log2(3)
    ts = geometric_window(2 ** -3, p22d8.min_positive_distance, 10)
    C, ratios = qqh_count_bound(qqh22, q, ts)
    assert np.all(np.isfinite(ratios)) and C == ratios.max() > 0
    # fine scales do not blow the normalized count up
    assert ratios[-1] <= 2 * ratios[len(ratios) // 2]
    with pytest.raises(ValueError):
        qqh_count_bound(qqh22, q, [1.5])


def test_level_window_and_dimensions(qqh22, p22d8):
    w = level_window(qqh22)
    assert w[0] == pytest.approx(0.125) and w[-1] == pytest.approx(0.03125) and len(w) == 5
    ref = math.log2(3)
    s = spectral_dim_estimate(SpectralGeometry(qqh22), w, reference=ref)
    b = box_dim_estimate(p22d8, w, reference=ref)
    assert s.slope >= ref - 0.15
    assert b.slope == pytest.approx(ref, abs=0.15)


def test_level_window_needs_levels():
    X = gen_cantor(CantorSpec(1, 2, 3))
    with pytest.raises(WindowError):
        level_window(complete_support(X))


def fine_scales(support):
    return [t for t in np.unique(support.lengths) if support.vertices_at(t).size == support.space.n]


def test_qqh_bounding_radius_vanishes(qqh22):
    ts = np.unique(qqh22.lengths)[::-1]
    ratio = [bounding_radius(qqh22, t) / t for t in ts]
    assert np.all(np.diff(ratio) <= 0)
    fine = fine_scales(qqh22)
    assert len(fine) >= 2
    assert relative_bounding_radius(qqh22, fine) == 0.0


def test_hausdorff_bound_statuses(qqh22):
    g = SpectralGeometry(qqh22)
    q = math.log2(3)
    n = 2 * len(qqh22)
    grid = [n // 4, n // 2, n]
    nu = relative_bounding_radius(qqh22, fine_scales(qqh22))
    assert hausdorff_bound_check(g, q, grid, dimension=q, nu=nu).status == "must-diverge"
    assert hausdorff_bound_check(g, q + 0.5, grid, dimension=q).status == "inapplicable"
    ok = hausdorff_bound_check(g, q, grid, h_lower=1e-6, nu=1.0)
    assert ok.status == "satisfied"
    assert ok.factor == pytest.approx(2.0 ** q)
    bad = hausdorff_bound_check(g, q, grid, h_lower=1e6, nu=1.0)
    assert bad.status == "violated"
    assert bad.summary()["convention"] == "(2 nu)^p"
    with pytest.raises(ValueError):
        hausdorff_bound_check(g, q, grid, nu=math.inf)


def test_report_write(tmp_path):
    t = geometric_window(0.5, 0.01, 6)
    r = _fit("box", t, np.ceil(1 / t), reference=1.0)
    r.write(tmp_path / "d.csv", tmp_path / "d.json")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t,count,log_inv_t,log_count" and len(lines) == 7
    import json

    s = json.loads((tmp_path / "d.json").read_text())
    assert s["reference"] == 1.0 and s["window"] == [0.5, pytest.approx(0.01)]
