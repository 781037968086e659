"""Regenerate the randomized fixture files under src/specgeom/data.

The files are committed; this script only documents how they were made.
"""
import argparse
from pathlib import Path

import numpy as np

from specgeom.deformation import MarkedSpectrum, regularize, save_spectrum
from specgeom.spaces import FiniteMetricSpace, save_space
from specgeom.support import build_multiscale_support, complete_support, save_support

# (name, points, support kind)
PLAN = [
    ("rand1", 40, "multiscale"),
    ("rand2", 80, "multiscale"),
    ("rand3", 120, "multiscale"),
    ("rand4", 25, "complete"),
    ("rand5", 160, "multiscale"),
]


def planar_space(rng, n):
    pts = rng.random((n, 2))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    return FiniteMetricSpace(d)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/specgeom/data")
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for name, n, kind in PLAN:
        X = planar_space(rng, n)
        B = build_multiscale_support(X, 4.0) if kind == "multiscale" else complete_support(X)
        rho = MarkedSpectrum(B, B.lengths * rng.uniform(0.5, 2.0, len(B)))
        save_space(X, args.out / f"{name}_space.txt")
        save_support(B, args.out / f"{name}_support.txt")
        save_spectrum(rho, args.out / f"{name}_spectrum.txt")
    # a small space for the perturbation checks: 6 points, 15 pairs, regular random weights
    X = planar_space(rng, 6)
    B = complete_support(X)
    rho = regularize(MarkedSpectrum(B, B.lengths * rng.uniform(0.8, 1.5, len(B))))
    save_space(X, args.out / "small_space.txt")
    save_support(B, args.out / "small_support.txt")
    save_spectrum(rho, args.out / "small_spectrum.txt")


if __name__ == "__main__":
    main()
