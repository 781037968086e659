"""Support sets B, their density, bounding radii and incidence graphs.

A support is stored by its unordered pairs ``i < j``; both orientations
are implied, so symmetry holds by construction. ``B_t`` always filters on
base length ``|yy'| >= t``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .spaces import FiniteMetricSpace, SpaceFormatError

DEFAULT_PAIR_BUDGET = 50_000_000
EXACT_DENSITY_LIMIT = 1000


class SupportError(ValueError):
    pass


class EmptyLevelError(SupportError):
    """``B_t`` is empty at the requested level."""


@dataclass(frozen=True)
class Level:
    """One scale of a multiscale construction."""

    k: int
    delta: float
    radius: float  # pair-length cap in the space's units
    net_size: int
    n_pairs: int  # unordered pairs of this level before the union
    top_length: float  # longest pair of this level, nan if none
    saturated: bool  # net is the whole space


class SupportSet:
    """Symmetric set of ordered off-diagonal pairs over a :class:`FiniteMetricSpace`."""

    def __init__(self, space: FiniteMetricSpace, pairs, levels=(), meta=None):
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if np.any(p[:, 0] == p[:, 1]):
            raise SupportError("support contains diagonal pairs")
        if p.size and (p.min() < 0 or p.max() >= space.n):
            raise SupportError("pair index out of range")
        lo = np.minimum(p[:, 0], p[:, 1])
        hi = np.maximum(p[:, 0], p[:, 1])
        codes = np.unique(lo * space.n + hi)
        p = np.stack([codes // space.n, codes % space.n], axis=1)
        p.setflags(write=False)
        self.space = space
        self.pairs = p
        self.lengths = space.dist[p[:, 0], p[:, 1]]
        self.lengths.setflags(write=False)
        self.levels = tuple(levels)
        self.meta = dict(meta or {})

    @classmethod
    def from_ordered(cls, space, ordered, **kw) -> SupportSet:
        """Build from explicit ordered pairs, requiring each reverse orientation."""
        o = np.asarray(ordered, dtype=np.int64).reshape(-1, 2)
        fwd = set(map(tuple, o.tolist()))
        missing = [(i, j) for i, j in fwd if (j, i) not in fwd]
        if missing:
            i, j = min(missing)
            raise SupportError(f"pair ({i},{j}) present without ({j},{i})")
        return cls(space, o, **kw)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def n_ordered(self) -> int:
        return 2 * len(self.pairs)

    def ordered_pairs(self) -> np.ndarray:
        return np.concatenate([self.pairs, self.pairs[:, ::-1]])

    def same_pairs(self, other: SupportSet) -> bool:
        return self is other or (
            self.space is other.space and np.array_equal(self.pairs, other.pairs)
        )

    @cached_property
    def vertices(self) -> np.ndarray:
        """The projection Y of B."""
        return np.unique(self.pairs)

    def level_mask(self, t: float) -> np.ndarray:
        return self.lengths >= t

    def vertices_at(self, t: float) -> np.ndarray:
        return np.unique(self.pairs[self.level_mask(t)])

    def count_at(self, t: float) -> int:
        """|B_t| counted over ordered pairs."""
        return 2 * int(np.count_nonzero(self.level_mask(t)))

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        """Partners y' of each point y over ordered pairs (empty off Y)."""
        o = self.ordered_pairs()
        o = o[np.lexsort((o[:, 1], o[:, 0]))]
        starts = np.searchsorted(o[:, 0], np.arange(self.space.n + 1))
        return [o[starts[i]:starts[i + 1], 1] for i in range(self.space.n)]


def greedy_net(space: FiniteMetricSpace, delta: float) -> np.ndarray:
    """Greedy farthest-point net with covering radius at most ``delta``, seeded at index 0."""
    order, radii = space.traversal
    below = np.flatnonzero(radii[1:] <= delta)
    m = int(below[0]) + 1 if below.size else space.n
    return np.sort(order[:m])


def _net_pairs(space: FiniteMetricSpace, net: np.ndarray, cap: float, scale: float = 1.0) -> np.ndarray:
    sub = space.dist[np.ix_(net, net)]
    if scale != 1.0:
        sub = sub * scale
    i, j = np.nonzero(np.triu(sub <= cap, k=1))
    return np.stack([net[i], net[j]], axis=1)


def multiscale_phi(D: float):
    """Scale function for the net construction: ``2D`` for finite D, ``max(4, ln 1/t)`` otherwise."""
    if math.isinf(D):
        return lambda t: max(4.0, math.log(1.0 / t))
    return lambda t: 2.0 * D


def build_multiscale_support(
    space: FiniteMetricSpace,
    D: float = 4.0,
    delta1: float | None = None,
    net_method: str = "greedy",
) -> SupportSet:
    """Union over scales of short pairs in nested nets; density at least ``D``.

    Nets ``Y_k`` have covering radius ``delta_k = delta1 * 2**-(k-1)`` and
    level ``k >= 2`` keeps the pairs of ``Y_k`` no longer than
    ``delta_{k-1} * phi(delta_{k-1})``. The last level is the first one with
    ``delta_k`` below half the minimum positive distance, where the net is
    the whole space.

    With ``D = inf`` the selection runs on a copy of the space rescaled to
    diameter 1/4 and ``delta1`` must stay below ``1/e`` there; lengths in
    the returned support are always the original distances.
    """
    if net_method != "greedy":
        raise ValueError(f"unknown net method {net_method!r}")
    if not D > 2:
        raise SupportError(f"density target must exceed 2, got {D}")
    if space.n < 2:
        raise SupportError("need at least two points")
    phi = multiscale_phi(D)
    scale = 0.25 / space.diameter if math.isinf(D) else 1.0
    diam = space.diameter * scale
    if delta1 is None:
        d1 = diam / 2.0 if math.isinf(D) else diam / D
    else:
        d1 = delta1 * scale
    if not d1 > 0:
        raise SupportError("delta1 must be positive")
    if math.isinf(D) and not d1 < math.exp(-1):
        raise SupportError(f"delta1 must be below 1/e after rescaling, got {d1}")
    if diam > d1 * phi(d1) / 2.0 * (1 + 1e-12):
        raise SupportError(
            f"delta1 too small: diameter {diam} exceeds delta1*phi(delta1)/2 = {d1 * phi(d1) / 2}"
        )
    stop = space.min_positive_distance * scale / 2.0
    chunks, levels = [], []
    k = 2
    while True:
        dk = d1 * 2.0 ** -(k - 1)
        dprev = 2.0 * dk
        cap = dprev * phi(dprev)
        net = greedy_net(space, dk / scale)
        pairs = _net_pairs(space, net, cap, scale)
        chunks.append(pairs)
        top = float(space.dist[pairs[:, 0], pairs[:, 1]].max()) if len(pairs) else math.nan
        levels.append(Level(k, dk / scale, cap / scale, len(net), len(pairs), top, len(net) == space.n))
        if dk < stop:
            break
        k += 1
    meta = {"method": "multiscale", "D": D, "delta1": d1 / scale, "scale": scale}
    return SupportSet(space, np.concatenate(chunks), levels=levels, meta=meta)


def complete_support(space: FiniteMetricSpace, pair_budget: int = DEFAULT_PAIR_BUDGET) -> SupportSet:
    """All ordered off-diagonal pairs."""
    if space.n * (space.n - 1) > pair_budget:
        raise SupportError(f"{space.n * (space.n - 1)} ordered pairs exceeds budget {pair_budget}")
    i, j = np.triu_indices(space.n, k=1)
    return SupportSet(space, np.stack([i, j], axis=1), meta={"method": "complete"})


def _approximation_error_part(dist, neighbors, ys):
    """min over ordered b=(y,y') with y in ``ys`` of max(d(x,y), d(x',y'))."""
    n = dist.shape[0]
    e = np.full((n, n), np.inf)
    for y in ys:
        nb = neighbors[y]
        if nb.size == 0:
            continue
        partner = dist[:, nb].min(axis=1)
        np.minimum(e, np.maximum(dist[:, y, None], partner[None, :]), out=e)
    return e


def approximation_error(support: SupportSet, threads: int = 1) -> np.ndarray:
    """Matrix ``e[x, x'] = min_{b in B} |zb|`` with ``z = (x, x')`` and the max metric on X^2.

    Exact; workers split Y and are combined with an elementwise minimum,
    so the result does not depend on ``threads``.
    """
    dist = support.space.dist
    ys = [int(y) for y in support.vertices]
    nb = support.neighbors
    if threads <= 1 or len(ys) < 2:
        return _approximation_error_part(dist, nb, ys)
    parts = [ys[w::threads] for w in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda chunk: _approximation_error_part(dist, nb, chunk), parts))
    return np.minimum.reduce(results)


def _ratios(dist, e):
    n = dist.shape[0]
    r = np.full((n, n), np.inf)
    np.divide(dist, e, out=r, where=e > 0)
    np.fill_diagonal(r, np.inf)
    return r


def brute_density(support: SupportSet, threads: int = 1, limit: int = EXACT_DENSITY_LIMIT) -> float:
    """Exact ``inf_z sup_b |z| / |zb|`` over ordered off-diagonal ``z``.

    A ratio with ``|zb| = 0`` is ``+inf``; an empty infimum is ``+inf``.
    """
    if len(support) == 0:
        raise SupportError("density of an empty support")
    if support.space.n > limit:
        raise SupportError(f"exact density scan limited to {limit} points, space has {support.space.n}")
    e = approximation_error(support, threads)
    return float(_ratios(support.space.dist, e).min())


def verify_density_at_least(support: SupportSet, D: float, chunk: int = 16) -> bool:
    """Threshold mode: is ``dens(B) >= D``? Stops as soon as every z has a witness."""
    if len(support) == 0:
        raise SupportError("density of an empty support")
    dist = support.space.dist
    n = dist.shape[0]
    off = ~np.eye(n, dtype=bool)
    need = dist / D if not math.isinf(D) else np.zeros_like(dist)
    e = np.full((n, n), np.inf)
    ys = [int(y) for y in support.vertices]
    nb = support.neighbors
    for start in range(0, len(ys), chunk):
        np.minimum(e, _approximation_error_part(dist, nb, ys[start:start + chunk]), out=e)
        if np.all(e[off] <= need[off]):
            return True
    return False


def local_density_profile(support: SupportSet, t_grid, threads: int = 1) -> list[tuple[float, float]]:
    """Density restricted to ``z`` with ``|z| <= t`` for each ``t`` (strictly decreasing grid)."""
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0) or np.any(np.diff(t) >= 0):
        raise ValueError("t_grid must be strictly decreasing positive reals")
    dist = support.space.dist
    r = _ratios(dist, approximation_error(support, threads))
    off = ~np.eye(dist.shape[0], dtype=bool)
    d_off, r_off = dist[off], r[off]
    order = np.argsort(d_off, kind="stable")
    d_sorted = d_off[order]
    prefix_min = np.minimum.accumulate(r_off[order]) if r_off.size else r_off
    out = []
    for tv in t:
        m = int(np.searchsorted(d_sorted, tv, side="right"))
        out.append((float(tv), float(prefix_min[m - 1]) if m else math.inf))
    return out


def dens_loc_estimate(support: SupportSet, t_grid, threads: int = 1) -> float:
    """Profile value at the smallest ``t`` whose restriction is nonempty."""
    floor = support.space.min_positive_distance
    feasible = [v for t, v in local_density_profile(support, t_grid, threads) if t >= floor]
    return feasible[-1] if feasible else math.inf


def bounding_radius(support: SupportSet, t: float) -> float:
    """Covering radius of ``Y_t`` in the whole space."""
    yt = support.vertices_at(t)
    if yt.size == 0:
        raise EmptyLevelError(f"level {t} above largest pair length")
    return float(support.space.dist[:, yt].min(axis=1).max())


def relative_bounding_radius(support: SupportSet, t_window=None) -> float:
    """Finite proxy for ``limsup_{t->0} delta(t)/t``: the max ratio over a window of small ``t``."""
    if t_window is None:
        t_window = np.unique(support.lengths)[:20]
    t_window = np.asarray(t_window, dtype=np.float64)
    if t_window.size == 0:
        raise EmptyLevelError("empty window")
    return max(bounding_radius(support, float(t)) / float(t) for t in t_window)


@dataclass
class IncidenceGraph:
    """Level-``t`` graph: vertices ``Y_t``, edges ``B_t`` weighted by a marked spectrum."""

    t: float
    vertices: np.ndarray  # original point indices, sorted
    edges: np.ndarray  # unordered pairs, original indices
    weights: np.ndarray
    components: np.ndarray = field(init=False)
    n_components: int = field(init=False)

    def __post_init__(self):
        self.n_components, self.components = connected_components(self.adjacency(), directed=False)

    def local_edges(self) -> np.ndarray:
        return np.searchsorted(self.vertices, self.edges)

    def adjacency(self) -> csr_matrix:
        m = len(self.vertices)
        le = self.local_edges()
        rows = np.concatenate([le[:, 0], le[:, 1]])
        cols = np.concatenate([le[:, 1], le[:, 0]])
        w = np.concatenate([self.weights, self.weights])
        return csr_matrix((w, (rows, cols)), shape=(m, m))

    @property
    def connected(self) -> bool:
        return self.n_components == 1

    def degrees(self) -> np.ndarray:
        return np.bincount(self.local_edges().ravel(), minlength=len(self.vertices))

    def shortest_paths(self, sources=None) -> np.ndarray:
        """Shortest-path lengths; ``inf`` across components."""
        return dijkstra(self.adjacency(), directed=False, indices=sources)


def incidence_graph(support: SupportSet, spectrum=None, t: float = 0.0) -> IncidenceGraph:
    """Build Γ_t; ``spectrum`` is any object with ``values`` aligned to ``support.pairs`` (base lengths if None)."""
    values = support.lengths if spectrum is None else np.asarray(spectrum.values)
    if values.shape != support.lengths.shape:
        raise SupportError("spectrum is not defined on this support")
    mask = support.level_mask(t) if t > 0 else np.ones(len(support), dtype=bool)
    if not np.any(mask):
        raise EmptyLevelError(f"level {t} above largest pair length")
    edges = support.pairs[mask]
    return IncidenceGraph(float(t), np.unique(edges), edges, values[mask])


def _fmt(x: float) -> str:
    return "%.17g" % x


def _write_edges(path, header, pairs, values):
    lines = [header]
    for (i, j), v in zip(pairs.tolist(), values.tolist()):
        lines.append(f"{i},{j},{_fmt(v)}")
        lines.append(f"{j},{i},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def save_support(support: SupportSet, path) -> None:
    _write_edges(path, f"#support n={support.space.n}", support.pairs, support.lengths)


def save_graph(graph: IncidenceGraph, path) -> None:
    _write_edges(path, f"#gamma t={_fmt(graph.t)}", graph.edges, graph.weights)


def read_edge_file(path, header_prefix: str):
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").split("\n") if ln.strip()]
    if not lines or not lines[0].startswith(header_prefix):
        raise SpaceFormatError(f"{path}: missing {header_prefix!r} header")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 3:
            raise SpaceFormatError(f"{path}: bad edge line {ln!r}")
        try:
            rows.append((int(cells[0]), int(cells[1]), float(cells[2])))
        except ValueError:
            raise SpaceFormatError(f"{path}: bad edge line {ln!r}") from None
    return lines[0], rows


def load_support(path, space: FiniteMetricSpace) -> SupportSet:
    header, rows = read_edge_file(path, "#support")
    try:
        n = int(header.split("n=", 1)[1])
    except (IndexError, ValueError):
        raise SpaceFormatError(f"{path}: header must read '#support n=<points>'") from None
    if n != space.n:
        raise SupportError(f"{path}: support over {n} points, space has {space.n}")
    pairs = np.array([(i, j) for i, j, _ in rows], dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise SupportError(f"{path}: pair index out of range")
    for i, j, v in rows:
        if v != space.dist[i, j]:
            raise SupportError(f"{path}: length of ({i},{j}) is {v!r}, space distance is {space.dist[i, j]!r}")
    return SupportSet.from_ordered(space, pairs, meta={"method": "file", "path": str(path)})
