"""Dimension estimators: spectral counts, packing counts, trace proxies.

All limits ``t -> 0`` are replaced by log-log fits over a declared window
of scales; every report keeps its window.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import EigenvalueList, SpectralGeometry, dim_E_counts, spectrum_of_ds
from .spaces import CantorSpec, FiniteMetricSpace
from .support import EmptyLevelError, Level, SupportSet, greedy_net, relative_bounding_radius

DEFAULT_WINDOW_POINTS = 12


class WindowError(ValueError):
    pass


@dataclass
class DimensionReport:
    method: str
    t: np.ndarray
    counts: np.ndarray
    slope: float
    max_slope: float
    reference: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.t[0]), float(self.t[-1])

    def rows(self):
        for t, c in zip(self.t.tolist(), self.counts.tolist()):
            yield t, int(c), math.log(1.0 / t), math.log(c)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "slope": self.slope,
            "max_slope": self.max_slope,
            "reference": self.reference,
            "window": list(self.window),
            **self.extra,
        }

    def write(self, csv_path, json_path=None) -> None:
        lines = ["t,count,log_inv_t,log_count"]
        lines += ["%.17g,%d,%.17g,%.17g" % row for row in self.rows()]
        Path(csv_path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        if json_path is not None:
            Path(json_path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def geometric_window(hi: float, lo: float, n_points: int = DEFAULT_WINDOW_POINTS) -> np.ndarray:
    """Strictly decreasing geometric grid from ``hi`` down to ``lo``."""
    if not hi > lo > 0:
        raise WindowError(f"degenerate window [{lo}, {hi}]")
    if n_points < 2:
        raise WindowError("a window needs at least two scales")
    return np.geomspace(hi, lo, n_points)


def percentile_window(values, n_points: int = DEFAULT_WINDOW_POINTS, lo_pct=10.0, hi_pct=90.0) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v) & (v > 0)]
    if v.size == 0:
        raise WindowError("no positive scales to build a window from")
    lo, hi = np.percentile(v, [lo_pct, hi_pct])
    return geometric_window(float(hi), float(lo), n_points)


def _fit(method, t, counts, reference=None, extra=None) -> DimensionReport:
    t = np.asarray(t, dtype=np.float64)
    if t.size < 2 or np.any(np.diff(t) >= 0):
        raise WindowError("scales must be strictly decreasing")
    counts = np.asarray(counts)
    if np.any(counts <= 0):
        bad = float(t[np.argmax(counts <= 0)])
        raise WindowError(f"count vanishes at t={bad}; shrink the window")
    x = np.log(1.0 / t)
    y = np.log(counts.astype(np.float64))
    slope = float(np.polyfit(x, y, 1)[0])
    max_slope = float(np.max(np.diff(y) / np.diff(x)))
    return DimensionReport(method, t, counts, slope, max_slope, reference, dict(extra or {}))


def spectral_dim_estimate(geometry: SpectralGeometry, scale_window=None, reference=None,
                          min_scales: int = 4) -> DimensionReport:
    """Slope of ``log dim E_t`` against ``log 1/t``; also the largest two-point slope."""
    if scale_window is None:
        scale_window = percentile_window(geometry.rho)
    t = np.asarray(scale_window, dtype=np.float64)
    if t.size < min_scales:
        raise WindowError(f"need at least {min_scales} scales, got {t.size}")
    return _fit("spectral", t, dim_E_counts(geometry, t), reference)


def separated_set(space: FiniteMetricSpace, t: float) -> np.ndarray:
    """Greedy maximal set with pairwise distances at least ``t`` (farthest-first from index 0)."""
    order, radii = space.traversal
    return order[: int(np.count_nonzero(radii >= t))]


def box_dim_estimate(space: FiniteMetricSpace, scale_window=None, reference=None) -> DimensionReport:
    """Slope of the maximal ``t``-separated count ``N_t``."""
    _, radii = space.traversal
    if scale_window is None:
        scale_window = percentile_window(radii[1:])
    t = np.asarray(scale_window, dtype=np.float64)
    # traversal radii are nonincreasing, so N_t is a prefix length
    desc = -radii
    counts = np.searchsorted(desc, -t, side="right")
    return _fit("box", t, counts, reference)


def _as_mu(obj) -> np.ndarray:
    if isinstance(obj, SpectralGeometry):
        return spectrum_of_ds(obj).mu()
    if isinstance(obj, EigenvalueList):
        return obj.mu()
    mu = np.sort(np.asarray(obj, dtype=np.float64))[::-1]
    return mu


def dixmier_proxy(obj, p: float, N_grid) -> list[tuple[int, float]]:
    """``sigma_N / log N`` with ``sigma_N = sum_{n<N} mu_n^p``, ``mu`` nonincreasing."""
    if not p > 0:
        raise ValueError("p must be positive")
    mu = _as_mu(obj)
    N = np.asarray(N_grid, dtype=np.int64)
    if np.any(N < 2):
        raise ValueError("N must be at least 2")
    if np.any(N > mu.size):
        raise ValueError(f"N exceeds the spectrum length {mu.size}")
    partial = np.cumsum(mu ** p)
    return [(int(n), float(partial[n - 1] / math.log(n))) for n in N]


def qqh_levels(space: FiniteMetricSpace, k_start: int = 5):
    """Scales ``delta_k = 2^-k`` from ``k_start`` until ``delta_k`` drops below half the resolution."""
    stop = space.min_positive_distance / 2.0
    k = k_start
    while True:
        yield k, 2.0 ** -k, (k - 1) * 2.0 ** -(k - 1)
        if 2.0 ** -k < stop:
            return
        k += 1


def build_qqh_support(space: FiniteMetricSpace, q: float | None = None, depth_range=None) -> SupportSet:
    """Union over ``k`` of the pairs of a ``2^-k``-net no longer than ``R_k = (k-1) 2^-(k-1)``.

    ``depth_range`` is an iterable of ``k`` values (all ``>= 5``); by
    default ``k`` runs from 5 through the first scale below half the
    minimum distance.
    """
    if depth_range is None:
        schedule = list(qqh_levels(space))
    else:
        ks = sorted(int(k) for k in depth_range)
        if not ks:
            raise ValueError("empty range of levels")
        if ks[0] < 5:
            raise ValueError("levels start at k = 5")
        schedule = [(k, 2.0 ** -k, (k - 1) * 2.0 ** -(k - 1)) for k in ks]
    chunks, levels = [], []
    for k, delta, R in schedule:
        net = greedy_net(space, delta)
        sub = space.dist[np.ix_(net, net)]
        i, j = np.nonzero(np.triu(sub <= R, k=1))
        pairs = np.stack([net[i], net[j]], axis=1)
        chunks.append(pairs)
        top = float(sub[i, j].max()) if i.size else math.nan
        levels.append(Level(k, delta, R, len(net), len(pairs), top, len(net) == space.n))
    support = SupportSet(space, np.concatenate(chunks), levels=levels, meta={"method": "qqh", "q": q})
    if len(support) == 0:
        raise EmptyLevelError("no pairs at any level")
    return support


def qqh_count_bound(support: SupportSet, q: float, ts) -> tuple[float, np.ndarray]:
    """Fitted ``C = max |B_t| t^q / (log 1/t)^(2q+1)`` over ``ts`` in ``(0, 1)``, with the ratios."""
    ts = np.asarray(ts, dtype=np.float64)
    if np.any((ts <= 0) | (ts >= 1)):
        raise ValueError("scales must lie in (0, 1)")
    counts = np.array([support.count_at(t) for t in ts], dtype=np.float64)
    ratios = counts * ts ** q / np.log(1.0 / ts) ** (2 * q + 1)
    return float(ratios.max()), ratios


def level_window(support: SupportSet, per_octave: int = 2) -> np.ndarray:
    """Scales between the truncation effects at both ends of a level schedule.

    Runs from the longest pair of the second nonempty level (the first is
    cut off by where the schedule starts) down to the longest pair of the
    first level whose net is the whole space (below it counts saturate).
    """
    nonempty = [lv for lv in support.levels if lv.n_pairs > 0]
    saturated = [lv for lv in nonempty if lv.saturated]
    if len(nonempty) < 2 or not saturated:
        raise WindowError("level schedule too short for a window")
    hi, lo = nonempty[1].top_length, saturated[0].top_length
    if not hi > lo:
        raise WindowError("level schedule too short for a window")
    n = int(round(per_octave * math.log2(hi / lo))) + 1
    return geometric_window(hi, lo, max(n, 2))


def hausdorff_reference(spec: CantorSpec) -> float:
    """``log_p(n + 1)``."""
    return math.log(spec.n + 1) / math.log(spec.p)


@dataclass
class BoundCheck:
    p: float
    nu: float
    factor: float  # (2 nu)^p
    h_lower: float
    rows: list  # (N, sigma_N / log N, factor * sigma_N / log N)
    status: str  # satisfied | violated | must-diverge | inapplicable

    def summary(self) -> dict:
        return {"p": self.p, "nu": self.nu, "factor": self.factor, "h_lower": self.h_lower,
                "status": self.status, "convention": "(2 nu)^p",
                "rows": [list(r) for r in self.rows]}


def hausdorff_bound_check(geometry: SpectralGeometry, p: float, N_grid, h_lower: float = 1.0,
                          dimension: float | None = None, nu: float | None = None) -> BoundCheck:
    """Compare ``(2 nu)^p sigma_N / log N`` with a lower bound on ``H^p``.

    ``dimension`` is the known Hausdorff dimension when available; for
    ``p`` above it the measure vanishes and the check is inapplicable.
    """
    if nu is None:
        nu = relative_bounding_radius(geometry.support)
    if math.isinf(nu):
        raise ValueError("relative bounding radius is infinite")
    rows = dixmier_proxy(geometry, p, N_grid)
    factor = (2.0 * nu) ** p
    rows = [(n, v, factor * v) for n, v in rows]
    if dimension is not None and p > dimension:
        status = "inapplicable"
    elif nu == 0:
        status = "must-diverge"
    else:
        status = "satisfied" if rows[-1][2] >= h_lower else "violated"
    return BoundCheck(p, float(nu), factor, h_lower, rows, status)
