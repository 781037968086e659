"""Marked spectra: bounded deformations of a support's base lengths.

A spectrum is a positive value per unordered support pair, aligned with
``support.pairs``; both orientations share it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .spaces import SpaceFormatError
from .support import SupportError, SupportSet, incidence_graph, read_edge_file

REGULAR_RTOL = 1e-12
# smallest relative shift h*eps/rho the perturbation will emit
MIN_RELATIVE_SHIFT = 1e-11


class SpectrumError(ValueError):
    pass


class NotRegularError(SpectrumError):
    pass


class PrecisionError(SpectrumError):
    """The perturbation would fall below what double precision can separate."""


class MarkedSpectrum:
    def __init__(self, support: SupportSet, values):
        v = np.array(values, dtype=np.float64).reshape(-1)
        if v.shape != (len(support),):
            raise SpectrumError(f"expected {len(support)} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise SpectrumError("spectrum values must be finite")
        if np.any(v <= 0):
            i = int(np.flatnonzero(v <= 0)[0])
            raise SpectrumError(f"nonpositive value {v[i]} on pair {tuple(support.pairs[i])}")
        v.setflags(write=False)
        self.support = support
        self.values = v

    @classmethod
    def base(cls, support: SupportSet) -> MarkedSpectrum:
        return cls(support, support.lengths)

    @classmethod
    def scaled(cls, support: SupportSet, factor: float) -> MarkedSpectrum:
        return cls(support, factor * support.lengths)

    @classmethod
    def from_pairs(cls, support: SupportSet, mapping) -> MarkedSpectrum:
        """Build from ``{(i, j): rho}``; either orientation may be given."""
        n = support.space.n
        index = {int(c): k for k, c in enumerate(support.pairs[:, 0] * n + support.pairs[:, 1])}
        values = np.full(len(support), np.nan)
        for (i, j), rho in mapping.items():
            i, j = min(i, j), max(i, j)
            k = index.get(i * n + j)
            if k is None:
                raise SpectrumError(f"pair ({i},{j}) is not in the support")
            if not np.isnan(values[k]) and values[k] != rho:
                raise SpectrumError(f"conflicting values for pair ({i},{j})")
            values[k] = rho
        if np.any(np.isnan(values)):
            i, j = support.pairs[int(np.flatnonzero(np.isnan(values))[0])]
            raise SpectrumError(f"missing value for pair ({i},{j})")
        return cls(support, values)

    def __len__(self) -> int:
        return len(self.values)

    def ratios(self) -> np.ndarray:
        return self.values / self.support.lengths

    def with_values(self, values) -> MarkedSpectrum:
        return MarkedSpectrum(self.support, values)

    def __mul__(self, factor: float) -> MarkedSpectrum:
        return MarkedSpectrum(self.support, factor * self.values)

    __rmul__ = __mul__


def _same_support(s1: MarkedSpectrum, s2: MarkedSpectrum) -> None:
    if not s1.support.same_pairs(s2.support):
        raise SupportError("spectra live on different supports")


def validate_bounded(spectrum: MarkedSpectrum) -> tuple[float, float]:
    """Tight constants ``c <= rho/|yy'| <= C``."""
    if len(spectrum) == 0:
        raise SpectrumError("empty spectrum")
    r = spectrum.ratios()
    return float(r.min()), float(r.max())


def closure(spectrum: MarkedSpectrum) -> np.ndarray:
    """Shortest-path value between the endpoints of each pair in the all-edges graph."""
    if len(spectrum) == 0:
        return spectrum.values.copy()
    g = incidence_graph(spectrum.support, spectrum)
    le = g.local_edges()
    sources, inverse = np.unique(le[:, 0], return_inverse=True)
    dist = dijkstra(g.adjacency(), directed=False, indices=sources)
    return dist[inverse, le[:, 1]]


def regularize(spectrum: MarkedSpectrum, rtol: float = REGULAR_RTOL) -> MarkedSpectrum:
    """Replace each value by its shortest-path closure.

    Values within ``rtol`` of the closure are kept as they are, so rounding
    in long path sums never moves an already shortest edge.
    """
    bar = closure(spectrum)
    v = spectrum.values
    out = np.where(bar < v * (1.0 - rtol), bar, v)
    return spectrum.with_values(out)


def is_regular(spectrum: MarkedSpectrum, rtol: float = REGULAR_RTOL) -> bool:
    return bool(np.all(closure(spectrum) >= spectrum.values * (1.0 - rtol)))


def is_simple(spectrum: MarkedSpectrum) -> bool:
    """Distinct unordered pairs carry distinct values (exact comparison)."""
    return np.unique(spectrum.values).size == len(spectrum)


@dataclass(frozen=True)
class EpsilonSequence:
    order: np.ndarray  # pair indices sorted by value descending, ties by index
    eps: np.ndarray  # eps[i] belongs to pair order[i]
    rho: np.ndarray  # values in sequence order


def epsilon_sequence(spectrum: MarkedSpectrum) -> EpsilonSequence:
    """Deterministic shift sizes for the simple-regular perturbation.

    ``eps_i = min(rho_i^2 / (2 (1 + rho_i)), g_i / 2, rho_min / 2, eps_{i-1} / 3)``
    where ``g_i`` is the gap from ``rho_i``'s tie group to the next smaller
    value. The ``rho_min / 2`` cap keeps paths through an earlier member of
    a tie group from undercutting a later one.
    """
    v = spectrum.values
    order = np.lexsort((np.arange(len(v)), -v))
    rho = v[order]
    distinct = np.unique(rho)[::-1]
    nxt = {float(a): float(a - b) for a, b in zip(distinct[:-1], distinct[1:])}
    rho_min = float(rho.min())
    eps = np.empty(len(rho))
    prev = math.inf
    for i, r in enumerate(rho):
        gap = nxt.get(float(r), math.inf)
        prev = min(r * r / (2.0 * (1.0 + r)), gap / 2.0, rho_min / 2.0, prev / 3.0)
        eps[i] = prev
    return EpsilonSequence(order, eps, rho)


def perturbation_conditions(seq: EpsilonSequence) -> dict[str, bool]:
    """Check the three defining conditions on an explicit sequence."""
    rho, eps = seq.rho, seq.eps
    c1 = bool(np.all(eps < rho * rho / (1.0 + rho)))
    tail = np.concatenate([np.cumsum(eps[::-1])[::-1][1:], [0.0]])
    c2 = bool(np.all(tail < eps))
    c3 = True
    first = 0
    for i in range(len(rho) - 1):
        if rho[i + 1] < rho[i]:
            c3 &= bool(eps[first] < rho[i] - rho[i + 1])
            first = i + 1
    return {"eps < rho^2/(1+rho)": c1, "eps dominates its tail": c2, "eps below the next gap": c3,
            "positive": bool(np.all(eps > 0))}


def perturb_simple_regular(spectrum: MarkedSpectrum, h: float, check: bool = True) -> MarkedSpectrum:
    """Shift ``rho(z_i)`` down by ``h * eps_i``; the result is simple and regular."""
    if not 0.0 < h < 1.0:
        raise ValueError(f"h must lie in (0, 1), got {h}")
    if len(spectrum) == 0:
        raise SpectrumError("empty spectrum")
    if not is_regular(spectrum):
        raise NotRegularError("input spectrum is not regular; regularize it first")
    seq = epsilon_sequence(spectrum)
    shift = h * seq.eps
    worst = float((shift / seq.rho).min())
    if worst < MIN_RELATIVE_SHIFT:
        raise PrecisionError(
            f"smallest relative shift {worst:.3g} is below {MIN_RELATIVE_SHIFT:g}; "
            f"{len(spectrum)} pairs is too many for double precision at h={h}"
        )
    out = np.empty(len(spectrum))
    out[seq.order] = seq.rho - shift
    result = spectrum.with_values(out)
    if check:
        if not is_simple(result):
            raise PrecisionError("perturbed values collide in double precision")
        if not is_regular(result, rtol=0.0):
            raise PrecisionError("perturbed spectrum lost regularity in double precision")
    return result


def compact_open_distance(s1: MarkedSpectrum, s2: MarkedSpectrum, t: float) -> float:
    """``max |1/rho1 - 1/rho2|`` over pairs of base length at least ``t``."""
    _same_support(s1, s2)
    mask = s1.support.level_mask(t)
    if not np.any(mask):
        raise SupportError(f"level {t} above largest pair length")
    return float(np.abs(1.0 / s1.values[mask] - 1.0 / s2.values[mask]).max())


def uniform_distance(s1: MarkedSpectrum, s2: MarkedSpectrum) -> float:
    _same_support(s1, s2)
    if len(s1) == 0:
        return 0.0
    return float(np.abs(1.0 / s1.values - 1.0 / s2.values).max())


def weak_lp_distance(s1: MarkedSpectrum, s2: MarkedSpectrum, p: float = 2.0, xi=None) -> float:
    """``sum_b |1/rho1 - 1/rho2| * xi(b)^p`` over ordered pairs; ``xi`` defaults to ``rho2``."""
    if not p > 0:
        raise ValueError("p must be positive")
    _same_support(s1, s2)
    w = s2.values if xi is None else np.asarray(xi, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return float(2.0 * np.sum(np.abs(1.0 / s1.values - 1.0 / s2.values) * w ** p))


def save_spectrum(spectrum: MarkedSpectrum, path) -> None:
    lines = ["#spectrum"]
    for (i, j), v in zip(spectrum.support.pairs.tolist(), spectrum.values.tolist()):
        lines.append("%d,%d,%.17g" % (i, j, v))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_spectrum(path, support: SupportSet) -> MarkedSpectrum:
    _, rows = read_edge_file(path, "#spectrum")
    mapping = {}
    for i, j, v in rows:
        key = (min(i, j), max(i, j))
        if key in mapping and mapping[key] != v:
            raise SpaceFormatError(f"{path}: conflicting values for pair {key}")
        mapping[key] = v
    return MarkedSpectrum.from_pairs(support, mapping)
