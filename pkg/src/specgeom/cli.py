"""Command-line entry point.

    specgeom [--out DIR] [--threads K] [--format csv|json] COMMAND ...

Commands: space, support, spectrum, connes, deform, dims, run, verify.
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import platform
import sys
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .acceptance import SUITES, run_suite
from .config import ConfigError, ExperimentConfig, load_config
from .connes import (
    DisconnectedWarning,
    connes_metric_on_Y,
    connes_oracle_matrix,
    graph_metric,
    lipschitz_distance,
    matrices_close,
    save_metric,
)
from .deformation import (
    MarkedSpectrum,
    compact_open_distance,
    is_regular,
    is_simple,
    load_spectrum,
    perturb_simple_regular,
    regularize,
    save_spectrum,
    uniform_distance,
    validate_bounded,
    weak_lp_distance,
)
from .dimension import (
    WindowError,
    box_dim_estimate,
    build_qqh_support,
    hausdorff_reference,
    level_window,
    spectral_dim_estimate,
)
from .geometry import SpectralGeometry, spectrum_of_ds
from .spaces import CantorSpec, gen_cantor, gen_circle, load_space, save_space
from .support import (
    EXACT_DENSITY_LIMIT,
    bounding_radius,
    brute_density,
    build_multiscale_support,
    complete_support,
    dens_loc_estimate,
    incidence_graph,
    load_support,
    save_graph,
    save_support,
)


class StepError(RuntimeError):
    """A failure inside one step of a run, tagged with where it happened."""

    def __init__(self, module, op, inp, exc):
        super().__init__(f"{module}.{op}: {exc}")
        self.module, self.op, self.input, self.exc = module, op, inp, exc

    def as_dict(self):
        return {"module": self.module, "op": self.op, "input": self.input,
                "error": type(self.exc).__name__, "message": str(self.exc)}


def _step(module, op, inp, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:
        raise StepError(module, op, inp, exc) from exc


def _emit(rows: dict, fmt: str, stream=None):
    stream = stream or sys.stdout
    if fmt == "json":
        stream.write(json.dumps(rows, indent=2, sort_keys=True, default=_jsonable) + "\n")
    else:
        stream.write("key,value\n")
        for k, v in rows.items():
            stream.write(f"{k},{_jsonable(v) if not isinstance(v, (int, float, str)) else v}\n")


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return _jsonable(float(v))
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _clean(obj):
    """Recursively replace infinities so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _jsonable(obj)


def _dump_json(obj, path):
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# building blocks shared by the subcommands and run ---------------------------


def make_space(spec: dict, base=Path(".")):
    if "path" in spec:
        p = Path(spec["path"])
        return load_space(p if p.is_absolute() else base / p)
    if spec["generator"] == "cantor":
        return gen_cantor(CantorSpec(spec["n"], spec["p"], spec["depth"]))
    return gen_circle(spec["samples"])


def make_support(space, spec: dict, base=Path(".")):
    method = spec["method"]
    if method == "multiscale":
        return build_multiscale_support(space, spec.get("D", 4.0), spec.get("delta1"))
    if method == "qqh":
        return build_qqh_support(space, spec.get("q"))
    if method == "complete":
        return complete_support(space)
    p = Path(spec["path"])
    return load_support(p if p.is_absolute() else base / p, space)


def make_spectrum(support, spec: dict, base=Path(".")):
    kind = spec.get("kind", "base")
    if kind == "base":
        return MarkedSpectrum.base(support)
    if kind == "scaled":
        return MarkedSpectrum.scaled(support, spec["factor"])
    if kind == "perturb":
        return perturb_simple_regular(regularize(MarkedSpectrum.base(support)), spec["h"])
    p = Path(spec["path"])
    return load_spectrum(p if p.is_absolute() else base / p, support)


def _dims_window(support):
    try:
        window = level_window(support)
    except WindowError:
        return None, "percentile"
    if len(window) < 4:
        return None, "percentile"
    return window, "levels"


# run ----------------------------------------------------------------------------


def run(cfg: ExperimentConfig, out: Path, threads: int = 1) -> dict:
    """Execute a config; returns the report. Artifacts are written to ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    X = _step("spaces", "load/generate", cfg.space, make_space, cfg.space, cfg.base_dir)
    save_space(X, out / "space.txt")
    B = _step("support", cfg.support["method"], cfg.support, make_support, X, cfg.support, cfg.base_dir)
    save_support(B, out / "support.txt")
    rho = _step("deformation", cfg.spectrum["kind"], cfg.spectrum, make_spectrum, B, cfg.spectrum, cfg.base_dir)
    save_spectrum(rho, out / "spectrum.txt")
    g = SpectralGeometry(B, spectrum=rho)
    spectrum_of_ds(g).to_csv(out / "eigenvalues.csv")
    report = {"points": X.n, "pairs": len(B), "levels": [lv.__dict__ for lv in B.levels]}
    checks = {}
    density = None

    def need_density():
        nonlocal density
        if density is None:
            density = _step("support", "brute_density", {"points": X.n},
                            brute_density, B, threads=threads)
        return density

    for analysis in cfg.analysis:
        if analysis == "density":
            D = need_density()
            report["density"] = D
            if cfg.support["method"] == "multiscale":
                target = cfg.support.get("D", 4.0)
                if math.isinf(target):
                    # only the small-scale density is promised to grow without bound
                    grid = np.unique(B.lengths)[::-1]
                    report["local density"] = dens_loc_estimate(B, grid, threads=threads)
                else:
                    checks["density >= D"] = D >= target
        elif analysis == "connes":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DisconnectedWarning)
                M = _step("connes", "connes_metric_on_Y", {}, connes_metric_on_Y, g)
            if not M.connected:
                raise StepError("connes", "connes_metric_on_Y", {"components": incidence_graph(B, rho).n_components},
                                ValueError("incidence graph is disconnected: the shortest-path formula for the "
                                           "Connes metric needs a connected geometry with density > 2"))
            save_metric(M, out / "metric.txt")
            save_graph(incidence_graph(B, rho), out / "gamma.txt")
            if len(M) <= 200:
                checks["oracle equals graph metric"] = matrices_close(connes_oracle_matrix(g).d, M.d)
            if X.n <= EXACT_DENSITY_LIMIT and is_regular(rho) and need_density() > 2:
                edge = M.d[np.searchsorted(M.points, B.pairs[:, 0]), np.searchsorted(M.points, B.pairs[:, 1])]
                checks["edge exactness"] = matrices_close(edge, rho.values)
            report["connes"] = {"Y": len(M), "diameter": float(M.d.max())}
        elif analysis == "dims":
            window, how = _dims_window(B)
            ref = None
            if cfg.space.get("generator") == "cantor":
                ref = hausdorff_reference(CantorSpec(cfg.space["n"], cfg.space["p"], cfg.space["depth"]))
            spec_rep = _step("dimension", "spectral_dim_estimate", {"window": how}, spectral_dim_estimate, g, window, ref)
            box_rep = _step("dimension", "box_dim_estimate", {"window": how}, box_dim_estimate, X, window, ref)
            spec_rep.write(out / "spectral_dim.csv", out / "spectral_dim.json")
            box_rep.write(out / "box_dim.csv", out / "box_dim.json")
            report["dims"] = {"spectral": spec_rep.summary(), "box": box_rep.summary(), "window_rule": how,
                              "dim_S upper estimate": spec_rep.slope}
            checks["spectral >= box - 0.1"] = spec_rep.slope >= box_rep.slope - 0.1
        elif analysis == "deform-convergence":
            M0 = connes_metric_on_Y(g)
            errs = []
            for i in range(1, 11):
                Mi = connes_metric_on_Y(g.with_spectrum((1 + 1 / i) * rho))
                errs.append(abs(lipschitz_distance(M0, Mi) - math.log1p(1 / i)))
            report["deform-convergence"] = {"max scaling error": max(errs)}
            checks["scaling lipschitz exact"] = max(errs) <= 1e-12
        elif analysis == "bounds-check":
            D = need_density()
            report["bounds-check"] = {"density": D}
            if D > 2:
                bound = 1.0 if math.isinf(D) else D / (D - 2)
                checks["bounding radius"] = all(
                    bounding_radius(B, float(t)) <= bound * t for t in np.unique(B.lengths))
    report["checks"] = checks
    return report


def _manifest(cfg, out, report, argv):
    return {
        "versions": {"specgeom": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "config": cfg.echo() if cfg else None,
        "argv": argv,
        "artifacts": sorted(p.name for p in out.iterdir() if p.name != "manifest.json"),
        "checks": report.get("checks", {}) if report else {},
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }


# subcommands --------------------------------------------------------------------


def cmd_space(args):
    spec = {"generator": args.kind}
    if args.kind == "cantor":
        spec.update(n=args.n, p=args.p, depth=args.depth)
    elif args.kind == "circle":
        spec.update(samples=args.samples)
    else:
        spec = {"path": args.path}
    X = make_space(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    save_space(X, args.out / "space.txt")
    _emit({"points": X.n, "diameter": X.diameter, "min_distance": X.min_positive_distance,
           "file": str(args.out / "space.txt")}, args.format)
    return 0


def cmd_support(args):
    X = load_space(args.space)
    spec = {"method": args.method, "D": args.D, "delta1": args.delta1, "q": args.q}
    B = make_support(X, spec)
    args.out.mkdir(parents=True, exist_ok=True)
    save_support(B, args.out / "support.txt")
    rows = {"points": X.n, "pairs": len(B), "ordered_pairs": B.n_ordered, "levels": len(B.levels),
            "file": str(args.out / "support.txt")}
    if args.density:
        rows["density"] = brute_density(B, threads=args.threads)
    _emit(rows, args.format)
    return 0


def _load_geometry(args):
    X = load_space(args.space)
    B = load_support(args.support, X)
    rho = load_spectrum(args.spectrum, B) if getattr(args, "spectrum", None) else MarkedSpectrum.base(B)
    return SpectralGeometry(B, spectrum=rho)


def cmd_spectrum(args):
    X = load_space(args.space)
    B = load_support(args.support, X)
    spec = {"kind": args.kind, "factor": args.factor, "h": args.h, "path": args.source}
    if args.kind == "file" and not args.source:
        raise SystemExit("--from is required for kind=file")
    rho = make_spectrum(B, spec)
    args.out.mkdir(parents=True, exist_ok=True)
    save_spectrum(rho, args.out / "spectrum.txt")
    spectrum_of_ds(SpectralGeometry(B, spectrum=rho)).to_csv(args.out / "eigenvalues.csv")
    c, C = validate_bounded(rho)
    _emit({"pairs": len(rho), "c": c, "C": C, "regular": is_regular(rho), "simple": is_simple(rho),
           "file": str(args.out / "spectrum.txt")}, args.format)
    return 0


def cmd_connes(args):
    g = _load_geometry(args)
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always", DisconnectedWarning)
        M = graph_metric(g, args.t) if args.t else connes_metric_on_Y(g)
    args.out.mkdir(parents=True, exist_ok=True)
    save_metric(M, args.out / "metric.txt")
    rows = {"Y": len(M), "connected": M.connected, "file": str(args.out / "metric.txt")}
    code = 0
    if args.oracle:
        if args.t:
            raise ValueError("the oracle solves the all-edges problem; drop --t")
        ok = matrices_close(connes_oracle_matrix(g).d, M.d)
        rows["oracle_match"] = ok
        code = 0 if ok else 1
    if not M.connected:
        rows["warning"] = "disconnected incidence graph; entries across components are inf"
        code = 1
    _emit(rows, args.format)
    return code


def cmd_deform(args):
    g = _load_geometry(args)
    other = load_spectrum(args.other, g.support) if args.other else g.spectrum
    rows = {"uniform": uniform_distance(g.spectrum, other),
            "weak_lp": weak_lp_distance(g.spectrum, other, p=args.p)}
    if args.t:
        rows["compact_open"] = compact_open_distance(g.spectrum, other, args.t)
    if args.lipschitz:
        rows["lipschitz"] = lipschitz_distance(connes_metric_on_Y(g), connes_metric_on_Y(g.with_spectrum(other)))
    if args.perturb is not None:
        out = perturb_simple_regular(g.spectrum, args.perturb)
        args.out.mkdir(parents=True, exist_ok=True)
        save_spectrum(out, args.out / "perturbed_spectrum.txt")
        rows["perturbed_uniform"] = uniform_distance(g.spectrum, out)
        rows["file"] = str(args.out / "perturbed_spectrum.txt")
    _emit(rows, args.format)
    return 0


def cmd_dims(args):
    g = _load_geometry(args)
    if args.window == "levels":
        window = level_window(g.support)
    else:
        window = None
    spec = spectral_dim_estimate(g, window, args.reference)
    box = box_dim_estimate(g.space, window, args.reference)
    args.out.mkdir(parents=True, exist_ok=True)
    spec.write(args.out / "spectral_dim.csv", args.out / "spectral_dim.json")
    box.write(args.out / "box_dim.csv", args.out / "box_dim.json")
    _emit({"spectral_slope": spec.slope, "spectral_max_slope": spec.max_slope,
           "box_slope": box.slope, "window": list(spec.window)}, args.format)
    return 0


def cmd_run(args):
    cfg, report = None, None
    out = args.out
    try:
        cfg = load_config(args.config)
        if cfg.output and not args.out_given:
            out = cfg.resolve(cfg.output)
        report = run(cfg, out, threads=args.threads)
    except (ConfigError, StepError) as exc:
        out.mkdir(parents=True, exist_ok=True)
        err = exc.as_dict() if isinstance(exc, StepError) else {
            "module": "cli", "op": "load_config", "input": str(args.config),
            "error": type(exc).__name__, "message": str(exc)}
        _dump_json(err, out / "error.json")
        _dump_json(_manifest(cfg, out, report, args.argv), out / "manifest.json")
        sys.stderr.write(f"error: {err['module']}.{err['op']}: {err['message']}\n")
        return 2
    _dump_json(report, out / "report.json")
    _dump_json(_manifest(cfg, out, report, args.argv), out / "manifest.json")
    _emit({"out": str(out), **{f"check:{k}": v for k, v in report["checks"].items()}}, args.format)
    return 0 if all(report["checks"].values()) else 1


def cmd_verify(args):
    results = run_suite(args.suite)
    if args.format == "json":
        sys.stdout.write(json.dumps(_clean([
            {"criterion": r.name, "passed": r.passed, "measured": r.measured,
             "tolerance": r.tolerance, "seconds": r.seconds} for r in results]), indent=2) + "\n")
    else:
        for r in results:
            print(r.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads for density scans")
    common.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS, help="summary format")

    ap = argparse.ArgumentParser(prog="specgeom", description="Spectral geometries on finite metric spaces.",
                                 parents=[common])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("space", parents=[common], help="generate or re-save a metric space")
    p.add_argument("kind", choices=("cantor", "circle", "load"))
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--path", type=Path)
    p.set_defaults(func=cmd_space)

    p = sub.add_parser("support", parents=[common], help="build a support set")
    p.add_argument("--space", type=Path, required=True)
    p.add_argument("--method", choices=("multiscale", "qqh", "complete"), default="multiscale")
    p.add_argument("--D", type=float, default=4.0, help="density target; 'inf' allowed")
    p.add_argument("--delta1", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--density", action="store_true", help="also run the exact density scan")
    p.set_defaults(func=cmd_support)

    p = sub.add_parser("spectrum", parents=[common], help="make a marked spectrum")
    p.add_argument("--space", type=Path, required=True)
    p.add_argument("--support", type=Path, required=True)
    p.add_argument("--kind", choices=("base", "scaled", "perturb", "file"), default="base")
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.1)
    p.add_argument("--from", dest="source", type=Path)
    p.set_defaults(func=cmd_spectrum)

    for name, func, help_ in (("connes", cmd_connes, "Connes metric on the support projection"),
                              ("deform", cmd_deform, "distances between marked spectra"),
                              ("dims", cmd_dims, "spectral and box dimension estimates")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--space", type=Path, required=True)
        p.add_argument("--support", type=Path, required=True)
        p.add_argument("--spectrum", type=Path)
        p.set_defaults(func=func)
        if name == "connes":
            p.add_argument("--t", type=float, default=0.0, help="level; 0 keeps every edge")
            p.add_argument("--oracle", action="store_true", help="cross-check against the dual solver")
        elif name == "deform":
            p.add_argument("--other", type=Path, help="second spectrum file")
            p.add_argument("--t", type=float, help="level for the compact-open distance")
            p.add_argument("--p", type=float, default=2.0)
            p.add_argument("--lipschitz", action="store_true")
            p.add_argument("--perturb", type=float, metavar="H")
        else:
            p.add_argument("--window", choices=("levels", "percentile"), default="percentile")
            p.add_argument("--reference", type=float)

    p = sub.add_parser("run", parents=[common], help="run a YAML experiment config")
    p.add_argument("config", type=Path)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    p.add_argument("suite", choices=tuple(SUITES))
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = ap.parse_args(argv)
    args.argv = argv
    args.out_given = hasattr(args, "out")
    args.out = getattr(args, "out", Path("."))
    args.threads = getattr(args, "threads", 1)
    args.format = getattr(args, "format", "csv")
    try:
        return args.func(args)
    except StepError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (OSError, ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
