"""Finite spectral geometries stored as (support, multiplicity, marked spectrum).

The Hilbert space is never built: the eigenvalues of ``ds`` are ``±rho(b)``
with multiplicity ``m(b)`` per ordered pair, and every quantity used here
reduces to that list or to the commutator formula on the support.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .deformation import MarkedSpectrum, SpectrumError
from .spaces import FiniteMetricSpace
from .support import SupportSet


class GeometryError(ValueError):
    pass


class SpectralGeometry:
    """``M(B, m)`` with marked spectrum ``rho``; ``m`` and ``rho`` are per unordered pair."""

    def __init__(self, support: SupportSet, mult=None, spectrum: MarkedSpectrum | None = None):
        if mult is None:
            m = np.ones(len(support), dtype=np.int64)
        else:
            m = np.asarray(mult)
            if m.shape != (len(support),):
                raise GeometryError(f"expected {len(support)} multiplicities, got {m.size}")
            if not np.all(m == np.round(m)) or np.any(m < 1):
                raise GeometryError("multiplicities must be positive integers")
            m = m.astype(np.int64)
        m.setflags(write=False)
        if spectrum is None:
            spectrum = MarkedSpectrum.base(support)
        elif not spectrum.support.same_pairs(support):
            raise SpectrumError("spectrum is defined on a different support")
        self.support = support
        self.mult = m
        self.spectrum = spectrum

    @property
    def space(self) -> FiniteMetricSpace:
        return self.support.space

    @property
    def rho(self) -> np.ndarray:
        return self.spectrum.values

    def with_spectrum(self, spectrum: MarkedSpectrum) -> SpectralGeometry:
        return SpectralGeometry(self.support, self.mult, spectrum)


@dataclass(frozen=True)
class EigenvalueList:
    """Eigenvalues of ``|ds|``: distinct absolute values, descending, with total multiplicities.

    The signed multiset of ``ds`` has each value with sign ``+`` and ``-``
    at half the listed count.
    """

    values: np.ndarray
    counts: np.ndarray

    def __len__(self) -> int:
        return int(self.counts.sum())

    def mu(self) -> np.ndarray:
        """``mu_0 >= mu_1 >= ...`` with repetition."""
        return np.repeat(self.values, self.counts)

    def signed(self) -> list[tuple[float, float, int]]:
        rows = []
        for v, c in zip(self.values.tolist(), self.counts.tolist()):
            rows.append((v, v, c // 2))
            rows.append((v, -v, c // 2))
        return rows

    def to_csv(self, path) -> None:
        lines = ["abs_value,signed_value,multiplicity"]
        lines += ["%.17g,%.17g,%d" % row for row in self.signed()]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def spectrum_of_ds(geometry: SpectralGeometry) -> EigenvalueList:
    """Each unordered pair contributes ``rho`` with multiplicity ``2 m``."""
    rho = geometry.rho
    if rho.size == 0:
        return EigenvalueList(np.empty(0), np.empty(0, dtype=np.int64))
    vals, inv = np.unique(rho, return_inverse=True)
    counts = np.bincount(inv, weights=2 * geometry.mult).astype(np.int64)
    return EigenvalueList(vals[::-1].copy(), counts[::-1].copy())


def dim_E(geometry: SpectralGeometry, t: float) -> int:
    """Total multiplicity of eigenvalues of ``|ds|`` that are at least ``t``."""
    if not t > 0:
        raise ValueError("t must be positive")
    return int(2 * geometry.mult[geometry.rho >= t].sum())


def dim_E_counts(geometry: SpectralGeometry, ts) -> np.ndarray:
    """Vectorized :func:`dim_E` over a grid of scales."""
    order = np.argsort(geometry.rho)
    rho = geometry.rho[order]
    tail = np.concatenate([np.cumsum((2 * geometry.mult[order])[::-1])[::-1], [0]])
    return tail[np.searchsorted(rho, np.asarray(ts, dtype=np.float64), side="left")]


def commutator_norm(geometry: SpectralGeometry, a) -> float:
    """``sup |a(y) - a(y')| / rho(y, y')`` over the support."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (geometry.space.n,):
        raise GeometryError(f"function must have {geometry.space.n} values")
    if len(geometry.support) == 0:
        return 0.0
    p = geometry.support.pairs
    return float(np.max(np.abs(a[p[:, 0]] - a[p[:, 1]]) / geometry.rho))


def lipschitz_constant(space: FiniteMetricSpace, a) -> float:
    a = np.asarray(a, dtype=np.float64)
    if space.n < 2:
        return 0.0
    i, j = np.triu_indices(space.n, k=1)
    return float(np.max(np.abs(a[i] - a[j]) / space.dist[i, j]))


def rebuild_on_connes(geometry: SpectralGeometry) -> SpectralGeometry:
    """Same pairs and multiplicities over ``(Y, d_M)``, with base lengths refreshed to ``d_M``.

    Point ``k`` of the new space is ``Y[k]``; labels carry over when present.
    """
    from .connes import DisconnectedError, connes_metric_on_Y

    metric = connes_metric_on_Y(geometry)
    if not metric.connected:
        raise DisconnectedError("incidence graph is disconnected; the Connes metric is infinite between components")
    Y = metric.points
    labels = None
    if geometry.space.labels is not None:
        labels = tuple(geometry.space.labels[i] for i in Y)
    d = np.array(metric.d)
    # shortest-path matrices are symmetric only up to summation order
    d = np.minimum(d, d.T)
    space = FiniteMetricSpace(d, labels)
    local = np.searchsorted(Y, geometry.support.pairs)
    support = SupportSet(space, local, meta={"method": "rebuild", "parent": geometry.support.meta})
    # SupportSet sorts pairs; Y is sorted, so the local order matches the original
    return SpectralGeometry(support, geometry.mult, MarkedSpectrum.base(support))
