"""Acceptance criteria C1-C10 on built-in fixtures.

Each criterion returns a :class:`Result` with its measured values; the
runtime limit, where one exists, is part of the verdict.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .connes import (
    connes_metric_on_Y,
    connes_oracle_matrix,
    graph_metric,
    lipschitz_distance,
    matrices_close,
    uniform_metric_distance,
)
from .deformation import (
    MarkedSpectrum,
    epsilon_sequence,
    is_regular,
    is_simple,
    load_spectrum,
    perturb_simple_regular,
    perturbation_conditions,
    regularize,
    uniform_distance,
    weak_lp_distance,
)
from .dimension import (
    box_dim_estimate,
    build_qqh_support,
    level_window,
    spectral_dim_estimate,
)
from .geometry import SpectralGeometry, rebuild_on_connes
from .spaces import CantorSpec, FiniteMetricSpace, gen_cantor, gen_circle, load_space
from .support import (
    SupportSet,
    bounding_radius,
    brute_density,
    build_multiscale_support,
    complete_support,
    load_support,
)

LOG2_3 = math.log2(3)
RTOL = 1e-9


@dataclass
class Result:
    name: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        vals = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name} {verdict} {self.title} [{vals}] tol: {self.tolerance} ({self.seconds:.2f}s)"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _timed(name, title, tolerance, limit=None):
    def wrap(fn):
        def run() -> Result:
            start = time.perf_counter()
            passed, measured = fn()
            sec = time.perf_counter() - start
            tol = tolerance
            if limit is not None:
                passed = passed and sec < limit
                tol = f"{tolerance}; runtime < {limit:g}s"
            return Result(name, title, bool(passed), measured, tol, sec)

        run.__name__ = f"criterion_{name.lower()}"
        run.__doc__ = fn.__doc__
        return run

    return wrap


# fixtures ------------------------------------------------------------------


def _matrix_space(rows):
    return FiniteMetricSpace(np.array(rows, dtype=np.float64))


def collinear3():
    return _matrix_space([[0, 1, 2], [1, 0, 1], [2, 1, 0]])


def triangle_113():
    """Path 0-1-2 with a long chord: spectrum (1, 1, 3) on a metric with |02| = 2."""
    X = collinear3()
    B = complete_support(X)
    return SpectralGeometry(B, spectrum=MarkedSpectrum.from_pairs(B, {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 3.0}))


def path_geometry(n, weights=None):
    X = _matrix_space(np.abs(np.subtract.outer(np.arange(n), np.arange(n))))
    B = SupportSet(X, [(i, i + 1) for i in range(n - 1)])
    if weights is None:
        return SpectralGeometry(B)
    return SpectralGeometry(B, spectrum=MarkedSpectrum(B, weights))


def cantor(n, p, depth):
    return gen_cantor(CantorSpec(n, p, depth))


def multiscale(space, D=4.0):
    return SpectralGeometry(build_multiscale_support(space, D))


def data_fixture(name):
    root = resources.files("specgeom") / "data"
    with resources.as_file(root / f"{name}_space.txt") as p:
        X = load_space(p)
    with resources.as_file(root / f"{name}_support.txt") as p:
        B = load_support(p, X)
    with resources.as_file(root / f"{name}_spectrum.txt") as p:
        rho = load_spectrum(p, B)
    return SpectralGeometry(B, spectrum=rho)


def sandwich_fixtures():
    return {"P(1,2) depth 6": cantor(1, 2, 6), "P(2,2) depth 5": cantor(2, 2, 5)}


def _weights(count, lo=0.5, hi=1.0):
    """Deterministic values in ``[lo, hi]`` spread by the golden ratio."""
    frac = (np.arange(count) * 0.6180339887498949) % 1.0
    return lo + (hi - lo) * frac


def oracle_fixtures():
    """Twenty-five geometries of at most 200 points."""
    fx = {}
    fx["path3"] = path_geometry(3)
    fx["triangle (1,1,3)"] = triangle_113()
    X2 = _matrix_space([[0, 5], [5, 0]])
    fx["single edge"] = SpectralGeometry(complete_support(X2))
    fx["path10 weighted"] = path_geometry(10, 1 + _weights(9, 0, 2))
    C12 = gen_circle(12)
    fx["cycle12"] = SpectralGeometry(SupportSet(C12, [(i, (i + 1) % 12) for i in range(12)]))
    fx["P(1,2) d5 D=4"] = multiscale(cantor(1, 2, 5))
    fx["P(1,2) d6 complete"] = SpectralGeometry(complete_support(cantor(1, 2, 6)))
    fx["P(2,2) d4 D=4"] = multiscale(cantor(2, 2, 4))
    fx["P(2,3) d4 D=inf"] = multiscale(cantor(2, 3, 4), math.inf)
    fx["P(1,2) d7 qqh"] = SpectralGeometry(build_qqh_support(cantor(1, 2, 7)))
    fx["circle16 complete"] = SpectralGeometry(complete_support(gen_circle(16)))
    fx["circle64 D=inf"] = multiscale(gen_circle(64), math.inf)
    fx["circle128 D=4"] = multiscale(gen_circle(128))
    fx["circle200 D=inf"] = multiscale(gen_circle(200), math.inf)
    for k in range(1, 6):
        fx[f"rand{k} file"] = data_fixture(f"rand{k}")
    fx["small file"] = data_fixture("small")
    g = multiscale(cantor(1, 2, 5))
    fx["P(1,2) d5 scaled x2"] = g.with_spectrum(2.0 * g.spectrum)
    g = multiscale(cantor(2, 2, 4))
    fx["P(2,2) d4 golden weights"] = g.with_spectrum(g.spectrum.with_values(g.rho * (1 + _weights(len(g.rho)))))
    g = multiscale(gen_circle(100), math.inf)
    fx["circle100 D=inf golden weights"] = g.with_spectrum(g.spectrum.with_values(g.rho * (0.5 + _weights(len(g.rho)))))
    # two components: {0,1,2} and {3,4}
    X5 = _matrix_space(np.abs(np.subtract.outer(np.arange(5), np.arange(5))))
    fx["disconnected"] = SpectralGeometry(SupportSet(X5, [(0, 1), (1, 2), (0, 2), (3, 4)]))
    fx["circle6 perturbed"] = _perturbed_circle6()
    return fx


def _perturbed_circle6():
    g = SpectralGeometry(complete_support(gen_circle(6)))
    return g.with_spectrum(perturb_simple_regular(g.spectrum, 0.5))


def perturb_fixtures():
    """Ten regular spectra with at most 15 unordered pairs."""
    fx = {}
    fx["path3"] = path_geometry(3).spectrum
    fx["triangle regularized"] = regularize(triangle_113().spectrum)
    fx["single edge"] = MarkedSpectrum.base(complete_support(_matrix_space([[0, 5], [5, 0]])))
    fx["circle5 complete"] = MarkedSpectrum.base(complete_support(gen_circle(5)))
    fx["circle6 complete"] = MarkedSpectrum.base(complete_support(gen_circle(6)))
    fx["P(1,2) d2 complete"] = MarkedSpectrum.base(complete_support(cantor(1, 2, 2)))
    fx["P(2,2) d1 complete"] = MarkedSpectrum.base(complete_support(cantor(2, 2, 1)))
    fx["P(1,3) d2 scaled x2"] = 2.0 * MarkedSpectrum.base(complete_support(cantor(1, 3, 2)))
    # isosceles with a short base: a tie next to a small edge
    iso = _matrix_space([[0, 1, 1], [1, 0, 0.01], [1, 0.01, 0]])
    fx["isosceles short base"] = MarkedSpectrum.base(complete_support(iso))
    fx["small file"] = data_fixture("small").spectrum
    return fx


def rebuild_fixtures():
    return {
        "P(1,2) d6 D=4": multiscale(cantor(1, 2, 6)),
        "P(2,2) d5 D=4": multiscale(cantor(2, 2, 5)),
        "circle64 D=inf": multiscale(gen_circle(64), math.inf),
    }


# helpers -------------------------------------------------------------------


def _max_rel(a, b) -> float:
    fin = np.isfinite(a) & np.isfinite(b) & (np.maximum(np.abs(a), np.abs(b)) > 0)
    if not np.any(fin):
        return 0.0
    return float(np.max(np.abs(a[fin] - b[fin]) / np.maximum(np.abs(a[fin]), np.abs(b[fin]))))


def _sandwich_factor(D):
    return 1.0 if math.isinf(D) else (D + 2.0) / (D - 2.0)


def _nonincreasing(xs) -> bool:
    return all(b <= a for a, b in zip(xs, xs[1:]))


def _decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


# criteria ------------------------------------------------------------------


@_timed("C1", "density guarantee of the net construction", "brute_density >= 4 exactly", limit=30)
def c1():
    measured, ok = {}, True
    for name, X in sandwich_fixtures().items():
        D = brute_density(build_multiscale_support(X, 4.0))
        measured[name] = D
        ok &= D >= 4.0
    return ok, measured


@_timed("C2", "sandwich bounds and edge exactness", "dist <= d_M <= (D+2)/(D-2) dist exactly; edges 1e-9 rel", limit=10)
def c2():
    measured, ok = {}, True
    for name, X in sandwich_fixtures().items():
        B = build_multiscale_support(X, 4.0)
        D = brute_density(B)
        g = SpectralGeometry(B)
        M = connes_metric_on_Y(g)
        d = X.dist[np.ix_(M.points, M.points)]
        factor = _sandwich_factor(D)
        lower = bool(np.all(d <= M.d))
        upper = bool(np.all(M.d <= factor * d))
        edge = M.d[np.searchsorted(M.points, B.pairs[:, 0]), np.searchsorted(M.points, B.pairs[:, 1])]
        exact = matrices_close(edge, g.rho)
        off = d > 0
        measured[f"{name} D"] = D
        measured[f"{name} max d_M/d"] = float((M.d[off] / d[off]).max())
        measured[f"{name} edge rel err"] = _max_rel(edge, g.rho)
        ok &= lower and upper and exact and D > 2
    return ok, measured


@_timed("C3", "oracle equals graph metric on 25 fixtures", "1e-9 relative, inf locations equal", limit=60)
def c3():
    import warnings

    from .connes import DisconnectedWarning

    fx = oracle_fixtures()
    worst, failures, largest = 0.0, [], 0
    for name, g in fx.items():
        largest = max(largest, g.space.n)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DisconnectedWarning)
            G = connes_metric_on_Y(g)
        O = connes_oracle_matrix(g)
        if not (np.array_equal(G.points, O.points) and matrices_close(O.d, G.d)):
            failures.append(name)
        worst = max(worst, _max_rel(O.d, G.d))
    ok = not failures and len(fx) == 25 and largest <= 200
    return ok, {"fixtures": len(fx), "max points": largest, "max rel err": worst, "failures": failures or "none"}


@_timed("C4", "Connes metric of circle(512) approaches the arc metric", "max |d_M - d|/d <= 0.05")
def c4():
    X = gen_circle(512)
    g = multiscale(X, math.inf)
    M = connes_metric_on_Y(g)
    d = X.dist[np.ix_(M.points, M.points)]
    off = ~np.eye(len(M.points), dtype=bool)
    dev = float(np.max(np.abs(M.d[off] - d[off]) / d[off]))
    return dev <= 0.05 and M.connected, {"Y": len(M.points), "max rel deviation": dev}


@_timed("C5", "spectral and box dimension of P(2,2) depth 8", "|slope - log2 3| <= 0.15; spectral >= box - 0.1", limit=300)
def c5():
    X = cantor(2, 2, 8)
    B = build_qqh_support(X, LOG2_3)
    g = SpectralGeometry(B)
    window = level_window(B)
    spec = spectral_dim_estimate(g, window, reference=LOG2_3)
    box = box_dim_estimate(X, window, reference=LOG2_3)
    ok = abs(spec.slope - LOG2_3) <= 0.15 and abs(box.slope - LOG2_3) <= 0.15 and spec.slope >= box.slope - 0.1
    return ok, {"spectral": spec.slope, "box": box.slope, "reference": LOG2_3,
                "window": f"{window[0]:.6g}..{window[-1]:.6g} ({len(window)} scales)"}


def _c6_fixture():
    return SpectralGeometry(complete_support(gen_circle(6)))


@_timed("C6", "deformation convergence: scaling and perturbation sequences",
        "monotone; lipschitz = ln(1+1/i) within 1e-12; perturbed metrics -> 0 with certified bound")
def c6():
    measured, ok = {}, True
    # scaling sequence on a multiscale Cantor geometry
    g0 = multiscale(cantor(1, 2, 5))
    d0 = connes_metric_on_Y(g0)
    unif, lip_err = [], 0.0
    for i in range(1, 21):
        gi = g0.with_spectrum((1 + 1 / i) * g0.spectrum)
        unif.append(uniform_distance(gi.spectrum, g0.spectrum))
        lip_err = max(lip_err, abs(lipschitz_distance(d0, connes_metric_on_Y(gi)) - math.log1p(1 / i)))
    ok &= _decreasing(unif) and lip_err <= 1e-12
    measured["uniform i=20"] = unif[-1]
    measured["max |lip - ln(1+1/i)|"] = lip_err
    # perturbation sequence h = 1/i on a small regular geometry
    g = _c6_fixture()
    base = connes_metric_on_Y(g)
    seq = epsilon_sequence(g.spectrum)
    budget = float(seq.eps.sum())
    levels = np.unique(g.support.lengths)
    lips, level_ok = [], True
    per_level = {float(t): [] for t in levels}
    for i in range(2, 21):
        h = 1.0 / i
        gh = g.with_spectrum(perturb_simple_regular(g.spectrum, h))
        lips.append(lipschitz_distance(base, connes_metric_on_Y(gh)))
        for t in levels:
            a, b = graph_metric(g, float(t)), graph_metric(gh, float(t))
            diff = uniform_metric_distance(a, b)
            per_level[float(t)].append(diff)
            # metrics only shrink, and by at most h times the total shift
            fin = np.isfinite(a.d)
            level_ok &= bool(np.all(a.d[fin] >= b.d[fin])) and diff <= h * budget * (1 + 1e-12)
    ok &= _nonincreasing(lips) and lips[-1] < lips[0] and level_ok
    ok &= all(_nonincreasing(v) and v[-1] < v[0] for v in per_level.values())
    measured["perturbed lipschitz h=1/2"] = lips[0]
    measured["perturbed lipschitz h=1/20"] = lips[-1]
    measured["max level uniform h=1/20"] = max(v[-1] for v in per_level.values())
    return ok, measured


@_timed("C7", "weak-Lp convergence forces Lipschitz convergence", "monotone decrease, lipschitz < 1e-3 by i = 50")
def c7():
    X = cantor(1, 2, 6)
    g0 = multiscale(X)
    dim = spectral_dim_estimate(g0).slope
    d0 = connes_metric_on_Y(g0)
    w = _weights(len(g0.rho))
    weak, lips = [], []
    for i in range(1, 51):
        rho = g0.spectrum.with_values(g0.rho * (1 + w / i ** 2))
        weak.append(weak_lp_distance(rho, g0.spectrum, p=2))
        lips.append(lipschitz_distance(d0, connes_metric_on_Y(g0.with_spectrum(rho))))
    ok = dim < 2 and _decreasing(weak) and _decreasing(lips) and lips[-1] < 1e-3
    return ok, {"spectral dim": dim, "weak_lp i=50": weak[-1], "lipschitz i=50": lips[-1]}


@_timed("C8", "simple regular perturbation on 10 fixtures x 3 values of h",
        "simple, regular, positive, uniform < h, epsilon conditions; exact")
def c8():
    fx = perturb_fixtures()
    failures = []
    worst = 0.0
    for name, rho in fx.items():
        if not is_regular(rho):
            failures.append(f"{name}: input not regular")
            continue
        conds = perturbation_conditions(epsilon_sequence(rho))
        for h in (0.5, 0.1, 0.01):
            out = perturb_simple_regular(rho, h)
            u = uniform_distance(rho, out)
            worst = max(worst, u / h)
            good = (is_simple(out) and is_regular(out, rtol=0.0) and bool(np.all(out.values > 0))
                    and u < h and all(conds.values()))
            if not good:
                failures.append(f"{name} h={h}")
    ok = not failures and len(fx) == 10
    return ok, {"fixtures": len(fx), "max uniform/h": worst, "failures": failures or "none"}


@_timed("C9", "bounding radius bound", "delta(t) <= D t/(D-2) at every base length; exact")
def c9():
    spaces = dict(sandwich_fixtures())
    spaces["P(2,2) d4"] = cantor(2, 2, 4)
    spaces["circle128"] = gen_circle(128)
    checked, failures = 0, []
    for name, X in spaces.items():
        for D in (4.0, math.inf):
            B = build_multiscale_support(X, D)
            Dm = brute_density(B)
            if not Dm > 2:
                continue
            bound = 1.0 if math.isinf(Dm) else Dm / (Dm - 2.0)
            for t in np.unique(B.lengths):
                checked += 1
                if bounding_radius(B, float(t)) > bound * t:
                    failures.append(f"{name} D={D} t={t:.6g}")
    return not failures and checked > 0, {"levels checked": checked, "failures": failures or "none"}


@_timed("C10", "rebuild on the Connes metric", "metric fixed after first rebuild (1e-9 rel); density in [D(D-2)/(D+2), D(D+2)/(D-2)]")
def c10():
    measured, ok = {}, True
    for name, g in rebuild_fixtures().items():
        D = brute_density(g.support)
        M0 = connes_metric_on_Y(g)
        g1 = rebuild_on_connes(g)
        g2 = rebuild_on_connes(g1)
        M1, M2 = connes_metric_on_Y(g1), connes_metric_on_Y(g2)
        D1 = brute_density(g1.support)
        lo, hi = (D, D) if math.isinf(D) else (D * (D - 2) / (D + 2), D * (D + 2) / (D - 2))
        fixed = matrices_close(M0.d, M1.d) and matrices_close(M1.d, M2.d)
        inside = lo <= D1 <= hi
        measured[f"{name} D"] = D
        measured[f"{name} D'"] = D1
        measured[f"{name} metric rel change"] = max(_max_rel(M0.d, M1.d), _max_rel(M1.d, M2.d))
        ok &= fixed and inside and D > 2
    return ok, measured


CRITERIA = {"C1": c1, "C2": c2, "C3": c3, "C4": c4, "C5": c5, "C6": c6, "C7": c7, "C8": c8, "C9": c9, "C10": c10}

SUITES = {
    "sandwich": ["C1", "C2", "C9", "C10"],
    "oracle": ["C3"],
    "convergence": ["C4", "C7"],
    "deform": ["C6"],
    "perturb": ["C8"],
    "dims": ["C5"],
}
SUITES["all"] = list(CRITERIA)


def run_suite(name: str) -> list[Result]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return [CRITERIA[c]() for c in SUITES[name]]
