"""Finite metric spaces used as desk-scale models of a compact space.

Spaces are immutable: the distance matrix is stored read-only and every
derived quantity (diameter, farthest-first traversal, ...) is cached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

DEFAULT_POINT_BUDGET = 20_000
LOAD_RTOL = 1e-12


class SpaceFormatError(ValueError):
    """Malformed distance-matrix file."""


class MetricError(ValueError):
    """A distance matrix violates one of the metric axioms."""


class SymmetryError(MetricError):
    pass


class TriangleError(MetricError):
    def __init__(self, triple: tuple[int, int, int], message: str):
        super().__init__(message)
        self.triple = triple


class SizeOverflowError(ValueError):
    """Generated space would exceed the configured point budget."""


def check_metric(dist: np.ndarray, rtol: float = 0.0) -> None:
    """Raise a :class:`MetricError` subclass if ``dist`` is not a metric.

    ``rtol`` relaxes symmetry and the triangle inequality for data that went
    through a text round trip; generators are checked exactly.
    """
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise MetricError(f"distance matrix must be square, got shape {dist.shape}")
    if not np.all(np.isfinite(dist)):
        raise MetricError("distance matrix has non-finite entries")
    n = dist.shape[0]
    diag = np.diagonal(dist)
    if np.any(diag != 0):
        i = int(np.flatnonzero(diag != 0)[0])
        raise MetricError(f"dist({i},{i}) = {diag[i]!r} is not zero")
    asym = np.abs(dist - dist.T) > rtol * np.maximum(np.abs(dist), np.abs(dist.T))
    if np.any(asym):
        i, j = (int(v) for v in np.argwhere(asym)[0])
        raise SymmetryError(f"dist({i},{j}) = {dist[i, j]!r} but dist({j},{i}) = {dist[j, i]!r}")
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] <= 0):
        i, j = (int(v) for v in np.argwhere((dist <= 0) & off)[0])
        raise MetricError(f"dist({i},{j}) = {dist[i, j]!r} must be positive")
    for j in range(n):
        through = dist[:, j, None] + dist[None, j, :]
        bad = dist > through * (1.0 + rtol)
        if np.any(bad):
            i, k = (int(v) for v in np.argwhere(bad)[0])
            raise TriangleError(
                (i, j, k),
                f"triangle inequality fails for ({i},{j},{k}): "
                f"dist({i},{k}) = {dist[i, k]!r} > {dist[i, j]!r} + {dist[j, k]!r}",
            )


def farthest_first_traversal(dist: np.ndarray, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Greedy farthest-point ordering of all points.

    Returns ``(order, radii)`` where ``radii[m]`` is the distance from
    ``order[m]`` to ``order[:m]`` at insertion time (``radii[0] = inf``).
    Ties go to the lowest index. ``radii`` is nonincreasing, so
    ``order[:m]`` is a net with covering radius ``radii[m]`` and its points
    are pairwise at least ``radii[m-1]`` apart.
    """
    n = dist.shape[0]
    order = np.empty(n, dtype=np.int64)
    radii = np.empty(n, dtype=np.float64)
    order[0] = seed
    radii[0] = np.inf
    nearest = dist[seed].copy()
    nearest[seed] = -1.0
    for m in range(1, n):
        nxt = int(np.argmax(nearest))
        order[m] = nxt
        radii[m] = nearest[nxt]
        # selected points sit at -1 and stay there under the minimum
        np.minimum(nearest, dist[nxt], out=nearest)
        nearest[nxt] = -1.0
    return order, radii


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Point set with an exact pairwise distance matrix."""

    dist: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        d = np.array(self.dist, dtype=np.float64, copy=True)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError(f"distance matrix must be square, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != d.shape[0]:
                raise ValueError("one label per point required")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, FiniteMetricSpace):
            return NotImplemented
        return (
            self.dist.shape == other.dist.shape
            and np.array_equal(self.dist, other.dist)
            and self.labels == other.labels
        )

    __hash__ = object.__hash__

    @cached_property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    @cached_property
    def min_positive_distance(self) -> float:
        if self.n < 2:
            return math.inf
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    @cached_property
    def traversal(self) -> tuple[np.ndarray, np.ndarray]:
        return farthest_first_traversal(self.dist, seed=0)

    def index_of(self, label: str) -> int:
        if self.labels is None:
            raise KeyError(label)
        return self.labels.index(label)

    def distance(self, a, b) -> float:
        """Distance between two points given by index or label."""
        i = self.index_of(a) if isinstance(a, str) else int(a)
        j = self.index_of(b) if isinstance(b, str) else int(b)
        return float(self.dist[i, j])

    def validate(self, rtol: float = 0.0) -> None:
        check_metric(self.dist, rtol=rtol)

    def subspace(self, indices) -> FiniteMetricSpace:
        idx = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return FiniteMetricSpace(self.dist[np.ix_(idx, idx)], labels)

    def scaled(self, factor: float) -> FiniteMetricSpace:
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return FiniteMetricSpace(self.dist * factor, self.labels)


@dataclass(frozen=True)
class CantorSpec:
    """Truncated Cantor space: strings of length ``depth`` over {0..n}, base ``p``."""

    n: int
    p: float
    depth: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be an integer >= 1, got {self.n}")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"depth must be an integer >= 1, got {self.depth}")

    @property
    def size(self) -> int:
        return (self.n + 1) ** self.depth


def gen_cantor(spec: CantorSpec, budget: int = DEFAULT_POINT_BUDGET) -> FiniteMetricSpace:
    """All strings of length ``depth``; ``dist = p**-k`` with ``k`` the common prefix length.

    Points are in lexicographic order, so index ``i`` written in base
    ``n + 1`` with ``depth`` digits is the string itself.
    """
    size = spec.size
    if size > budget:
        raise SizeOverflowError(
            f"P_{{{spec.n},{spec.p}}} at depth {spec.depth} has {size} points, "
            f"budget is {budget}; reduce depth"
        )
    base = spec.n + 1
    idx = np.arange(size, dtype=np.int64)
    agree = np.zeros((size, size), dtype=np.uint8)
    for k in range(1, spec.depth + 1):
        prefix = idx // base ** (spec.depth - k)
        agree += prefix[:, None] == prefix[None, :]
    table = np.array([float(spec.p) ** -k for k in range(spec.depth + 1)])
    dist = table[agree]
    del agree
    np.fill_diagonal(dist, 0.0)
    sep = "" if spec.n < 10 else ","
    digits = np.stack([(idx // base ** (spec.depth - 1 - c)) % base for c in range(spec.depth)], axis=1)
    labels = tuple(sep.join(str(v) for v in row) for row in digits)
    return FiniteMetricSpace(dist, labels)


def gen_circle(samples: int) -> FiniteMetricSpace:
    """``samples`` equally spaced points on the unit circle with arc-length distance."""
    if int(samples) != samples or samples < 3:
        raise ValueError(f"samples must be an integer >= 3, got {samples}")
    k = np.abs(np.arange(samples)[:, None] - np.arange(samples)[None, :])
    step = 2.0 * math.pi / samples
    return FiniteMetricSpace(step * np.minimum(k, samples - k))


def _fmt(x: float) -> str:
    return "%.17g" % x


def format_matrix(d: np.ndarray) -> list[str]:
    lines = [str(d.shape[0])]
    lines.extend(",".join(_fmt(v) for v in row) for row in d)
    return lines


def parse_matrix(lines: list[str], source="<input>") -> tuple[np.ndarray, list[str]]:
    """Parse the count line and ``n`` rows; returns the matrix and the leftover lines."""
    if not lines:
        raise SpaceFormatError(f"{source}: empty file")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise SpaceFormatError(f"{source}: first line must be the point count, got {lines[0]!r}") from None
    if n < 0 or len(lines) < n + 1:
        raise SpaceFormatError(f"{source}: expected {n} matrix rows, found {max(len(lines) - 1, 0)}")
    d = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        cells = lines[i + 1].split(",")
        if len(cells) != n:
            raise SpaceFormatError(f"{source}: row {i} has {len(cells)} entries, expected {n}")
        try:
            d[i] = [float(c) for c in cells]
        except ValueError as exc:
            raise SpaceFormatError(f"{source}: row {i}: {exc}") from None
    return d, lines[n + 1:]


def _read_lines(path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return [ln for ln in text.split("\n") if ln.strip()]


def save_space(space: FiniteMetricSpace, path) -> None:
    lines = format_matrix(space.dist)
    if space.labels is not None:
        lines.extend(f"# {i} {lab}" for i, lab in enumerate(space.labels))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_space(path, rtol: float = LOAD_RTOL, budget: int = DEFAULT_POINT_BUDGET) -> FiniteMetricSpace:
    """Read a distance-matrix file and validate every metric axiom."""
    lines = _read_lines(path)
    while lines and lines[0].startswith("#"):
        lines = lines[1:]
    d, rest = parse_matrix(lines, source=str(path))
    if d.shape[0] > budget:
        raise SizeOverflowError(f"{path}: {d.shape[0]} points exceeds budget {budget}")
    labels = None
    if rest:
        found = {}
        for ln in rest:
            if not ln.startswith("#"):
                raise SpaceFormatError(f"{path}: unexpected trailing line {ln!r}")
            parts = ln[1:].strip().split(" ", 1)
            try:
                i = int(parts[0])
            except ValueError:
                raise SpaceFormatError(f"{path}: bad label line {ln!r}") from None
            found[i] = parts[1] if len(parts) > 1 else ""
        if sorted(found) != list(range(d.shape[0])):
            raise SpaceFormatError(f"{path}: labels must cover every point exactly once")
        labels = tuple(found[i] for i in range(d.shape[0]))
    check_metric(d, rtol=rtol)
    return FiniteMetricSpace(d, labels)


def check_uniformly_perfect(space: FiniteMetricSpace, R: float, eps: float):
    """Test the annulus condition ``D_r(x) \\ D_{r/R}(x) != {}`` at finite scales.

    ``r`` ranges over the distance values in ``(0, eps]`` together with
    ``eps`` itself. Returns ``(True, None)`` or ``(False, (x, r))`` for the
    first failing point and radius.
    """
    if R < 1:
        raise ValueError("R must be at least 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    values = np.unique(space.dist)
    radii = values[(values > 0) & (values <= eps)]
    radii = np.unique(np.append(radii, eps))
    rows = np.sort(space.dist, axis=1)
    for x in range(space.n):
        outer = np.searchsorted(rows[x], radii, side="right")
        inner = np.searchsorted(rows[x], radii / R, side="right")
        empty = outer <= inner
        if np.any(empty):
            return False, (x, float(radii[np.argmax(empty)]))
    return True, None
