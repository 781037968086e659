"""Connes metrics on the support projection, computed as shortest paths.

On ``Y`` the Connes distance of ``M(B)`` with marked spectrum ``rho`` is the
shortest-path metric of the incidence graph weighted by ``rho``. The
oracle here solves the dual problem, maximizing ``a(y') - a(y)`` over
potentials with ``|a(u) - a(v)| <= rho(u, v)`` on every support pair,
by Jacobi relaxation and certifies the optimal potential.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import GeometryError, SpectralGeometry
from .spaces import SpaceFormatError, _read_lines, format_matrix, parse_matrix
from .support import incidence_graph

ORACLE_RTOL = 1e-9


class DisconnectedError(GeometryError):
    pass


class DisconnectedWarning(UserWarning):
    pass


class IncomparableError(ValueError):
    pass


@dataclass(frozen=True)
class MetricOnSubset:
    """Values of a metric on the point subset ``points`` (sorted original indices)."""

    points: np.ndarray
    d: np.ndarray
    connected: bool = True

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.int64)
        d = np.array(self.d, dtype=np.float64)
        if d.shape != (len(p), len(p)):
            raise ValueError("matrix shape does not match the point subset")
        p.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "d", d)

    def __len__(self) -> int:
        return len(self.points)

    def value(self, i: int, j: int) -> float:
        """Entry for two original point indices."""
        a, b = np.searchsorted(self.points, [i, j])
        if a >= len(self.points) or self.points[a] != i or b >= len(self.points) or self.points[b] != j:
            raise KeyError((i, j))
        return float(self.d[a, b])

    def restrict(self, points) -> MetricOnSubset:
        pts = np.asarray(points, dtype=np.int64)
        loc = np.searchsorted(self.points, pts)
        if np.any(loc >= len(self.points)) or np.any(self.points[np.minimum(loc, len(self.points) - 1)] != pts):
            raise KeyError("points outside the subset")
        sub = self.d[np.ix_(loc, loc)]
        return MetricOnSubset(pts, sub, bool(np.all(np.isfinite(sub))))


def graph_metric(geometry: SpectralGeometry, t: float) -> MetricOnSubset:
    """All-pairs shortest paths on the level-``t`` incidence graph; ``t <= 0`` keeps every edge."""
    g = incidence_graph(geometry.support, geometry.spectrum, t)
    return MetricOnSubset(g.vertices, g.shortest_paths(), g.connected)


def connes_metric_on_Y(geometry: SpectralGeometry) -> MetricOnSubset:
    """Connes distance among the points of ``Y``; infinite across components, with a warning."""
    m = graph_metric(geometry, 0.0)
    if not m.connected:
        warnings.warn(
            "incidence graph is disconnected; Connes distance is infinite between components",
            DisconnectedWarning,
            stacklevel=2,
        )
    return m


def _directed_edges(geometry: SpectralGeometry):
    """Edges ``u -> v`` in local indices, grouped by target for ``reduceat``."""
    g = incidence_graph(geometry.support, geometry.spectrum)
    le = g.local_edges()
    src = np.concatenate([le[:, 0], le[:, 1]])
    dst = np.concatenate([le[:, 1], le[:, 0]])
    w = np.concatenate([g.weights, g.weights])
    order = np.argsort(dst, kind="stable")
    return g.vertices, src[order], dst[order], w[order]


def _relax(n_vertices, sources, src, dst, w):
    """Largest feasible potentials below ``a(source) = 0``: iterate ``a(v) <- min(a(v), a(u) + rho)``."""
    starts = np.flatnonzero(np.r_[True, dst[1:] != dst[:-1]])
    targets = dst[starts]
    a = np.full((len(sources), n_vertices), np.inf)
    a[np.arange(len(sources)), sources] = 0.0
    for _ in range(n_vertices + 1):
        best = np.minimum.reduceat(a[:, src] + w, starts, axis=1)
        new = a.copy()
        new[:, targets] = np.minimum(a[:, targets], best)
        if np.array_equal(new, a):
            return a
        a = new
    raise RuntimeError("relaxation did not reach a fixed point")


def _certify(a, src, dst, w, rtol=ORACLE_RTOL):
    """Each finite potential row must satisfy every edge constraint."""
    for row in a:
        fin = np.isfinite(row[src]) & np.isfinite(row[dst])
        gap = np.abs(row[src][fin] - row[dst][fin]) - w[fin]
        if np.any(gap > rtol * w[fin]):
            raise RuntimeError("dual potential violates an edge constraint")
        # finite values never sit next to infinite ones inside a component
        if np.any(np.isfinite(row[src]) != np.isfinite(row[dst])):
            raise RuntimeError("dual potential is not constant-finite on components")


def connes_oracle_matrix(geometry: SpectralGeometry, block: int = 64) -> MetricOnSubset:
    """Dual-LP values for every pair of ``Y``; row ``i`` is the optimal potential for source ``Y[i]``."""
    Y, src, dst, w = _directed_edges(geometry)
    out = np.empty((len(Y), len(Y)))
    for s in range(0, len(Y), block):
        sources = np.arange(s, min(s + block, len(Y)))
        a = _relax(len(Y), sources, src, dst, w)
        _certify(a, src, dst, w)
        out[sources] = a
    return MetricOnSubset(Y, out, bool(np.all(np.isfinite(out))))


def connes_oracle(geometry: SpectralGeometry, y: int, y2: int) -> float:
    """``sup a(y2) - a(y)`` subject to ``|a(u) - a(v)| <= rho(u, v)`` on the support."""
    Y, src, dst, w = _directed_edges(geometry)
    i, j = np.searchsorted(Y, [y, y2])
    if i >= len(Y) or Y[i] != y or j >= len(Y) or Y[j] != y2:
        raise KeyError("both points must lie in the support projection")
    a = _relax(len(Y), np.array([i]), src, dst, w)
    _certify(a, src, dst, w)
    return float(a[0, j])


def bound_interval(geometry: SpectralGeometry, x: int, x2: int, D: float) -> tuple[float, float]:
    """Certified bracket ``[|xx'|, (D+2)/(D-2) |xx'|]`` for a geometry of density ``D``."""
    if not D > 2:
        raise ValueError("bounds require density > 2")
    d = geometry.space.dist[x, x2]
    factor = 1.0 if math.isinf(D) else (D + 2.0) / (D - 2.0)
    return float(d), float(d * factor)


def _aligned(d1: MetricOnSubset, d2: MetricOnSubset):
    if not np.array_equal(d1.points, d2.points):
        raise IncomparableError("metrics live on different point sets")
    off = ~np.eye(len(d1.points), dtype=bool)
    a, b = d1.d[off], d2.d[off]
    fa, fb = np.isfinite(a), np.isfinite(b)
    if np.any(fa != fb):
        raise IncomparableError("infinite entries differ in location")
    return a[fa], b[fb]


def lipschitz_distance(d1: MetricOnSubset, d2: MetricOnSubset) -> float:
    """``sup |ln(d2/d1)|`` over off-diagonal pairs."""
    a, b = _aligned(d1, d2)
    if np.any(a <= 0) or np.any(b <= 0):
        raise IncomparableError("off-diagonal entries must be positive")
    return float(np.abs(np.log(b / a)).max()) if a.size else 0.0


def uniform_metric_distance(d1: MetricOnSubset, d2: MetricOnSubset) -> float:
    a, b = _aligned(d1, d2)
    return float(np.abs(a - b).max()) if a.size else 0.0


def matrices_close(a, b, rtol: float = ORACLE_RTOL) -> bool:
    """Entrywise relative agreement; infinite entries must coincide exactly."""
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return False
    fa, fb = np.isfinite(a), np.isfinite(b)
    if np.any(fa != fb) or np.any(a[~fa] != b[~fb]):
        return False
    scale = np.maximum(np.abs(a[fa]), np.abs(b[fa]))
    return bool(np.all(np.abs(a[fa] - b[fa]) <= rtol * scale))


def save_metric(metric: MetricOnSubset, path) -> None:
    lines = ["#subset " + " ".join(str(int(i)) for i in metric.points)]
    lines += format_matrix(metric.d)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_metric(path) -> MetricOnSubset:
    lines = _read_lines(path)
    if not lines or not lines[0].startswith("#subset"):
        raise SpaceFormatError(f"{path}: missing '#subset' header")
    try:
        points = np.array([int(s) for s in lines[0].split()[1:]], dtype=np.int64)
    except ValueError:
        raise SpaceFormatError(f"{path}: bad '#subset' header") from None
    d, rest = parse_matrix(lines[1:], source=str(path))
    if rest:
        raise SpaceFormatError(f"{path}: unexpected trailing lines")
    if d.shape[0] != len(points):
        raise SpaceFormatError(f"{path}: header lists {len(points)} points, matrix has {d.shape[0]}")
    return MetricOnSubset(points, d, bool(np.all(np.isfinite(d))))
