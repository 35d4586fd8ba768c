"""Command line driver: simulate -> fit -> optimize / sweep / compare -> validate.

Exit codes: 0 success, 2 input or configuration error, 3 numerical or fit
error, 4 Monte-Carlo budget exhausted before an SNR ladder was complete.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ConfigurationError, holevo_bound_be, secret_key_rate
from .config import PipelineConfig, load_config
from .gaussian import GaussianDomainError
from .optimizer import (
    OptimumPoint,
    distance_sweep,
    fixed_beta_baseline,
    grid_search,
    local_refine,
    make_objective,
    with_refine,
)
from .protograph import ProtographError
from .raptor import ConstructionError, RateRangeError, extend_to_rate, lift
from .sim import run_fer_grid, run_fer_point
from .surface import FitError, SurfaceError, build_surface, eval_fer, fit_rate_curve, load_surface, save_surface
from .tables import TableError, read_samples, read_sweep, write_comparison, write_samples, write_sweep

log = logging.getLogger("cvqkd_rateopt")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_BUDGET = 4

VALIDATION_COLUMNS = (
    "d_km", "rate", "s_linear", "fer_predicted", "fer_simulated", "ci_low", "ci_high",
    "frames", "errors", "tolerance", "within_tolerance", "skr_predicted", "skr_simulated",
)
FIT_REPORT_COLUMNS = ("rate", "n_samples", "s_min", "s_max", "fer_min", "fer_max", "residual_rms")


class StageError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    """``manifest.json`` in the output directory, updated stage by stage."""

    def __init__(self, cfg: PipelineConfig):
        self.path = cfg.out_dir / "manifest.json"
        self.doc = {
            "tool": "cvqkd-rateopt",
            "version": __version__,
            "config_hash": cfg.config_hash,
            "seed": cfg.seed,
            "stages": {},
        }
        if self.path.is_file():
            try:
                old = json.loads(self.path.read_text())
            except json.JSONDecodeError:
                old = {}
            if old.get("config_hash") == self.doc["config_hash"] and old.get("version") == __version__:
                self.doc["stages"] = old.get("stages", {})

    def record(self, stage: str, seconds: float, outputs) -> None:
        self.doc["stages"][stage] = {
            "wall_time_s": round(seconds, 6),
            "outputs": {p.name: _digest(p) for p in sorted(outputs)},
        }
        self.path.write_text(json.dumps(self.doc, indent=2, sort_keys=True) + "\n")


def _samples_name(rate: float) -> str:
    return f"samples_r{rate:g}.csv"


def build_code(cfg: PipelineConfig):
    c = cfg.raw["code"]
    proto = cfg.protograph()
    code = lift(proto, int(c["lifting"]), seed=int(c["lift_seed"]), ext_degree=int(c["ext_degree"]))
    for r in cfg.rates:
        if not code.rate_min - 1e-12 <= r <= code.rate_max + 1e-12:
            raise ConfigurationError(f"rate {r} outside the code family range [{code.rate_min:.6g}, {code.rate_max:.6g}]")
    return code


def cmd_simulate(cfg: PipelineConfig, args) -> list[Path]:
    code = build_code(cfg)
    out = cfg.out_dir
    for old in out.glob("samples_r*.csv"):
        old.unlink()
    sim = cfg.sim_config()
    written = []
    incomplete = []
    for r in cfg.rates:
        t0 = time.perf_counter()
        grid = run_fer_grid(code, [r], cfg.ladder, sim)
        path = out / _samples_name(r)
        write_samples(path, grid.samples)
        written.append(path)
        incomplete.extend(grid.incomplete_rates)
        log.info("rate %g: %d SNR points in %.1f s%s", r, len(grid), time.perf_counter() - t0,
                 "" if grid.complete else " (ladder incomplete)")
    if incomplete and not cfg.raw["simulation"]["allow_incomplete"]:
        args._incomplete = incomplete
    return written


def _load_sample_groups(paths):
    groups = {}
    for p in paths:
        for s in read_samples(p):
            groups.setdefault(s.rate, []).append(s)
    return groups


def cmd_fit(cfg: PipelineConfig, args) -> list[Path]:
    out = cfg.out_dir
    paths = [Path(p) for p in (getattr(args, "samples", None) or [])] or sorted(out.glob("samples_r*.csv"))
    for p in paths:
        if not p.is_file():
            raise ConfigurationError(f"samples file not found: {p}")
    groups = _load_sample_groups(paths)
    if len(groups) < 2:
        raise ConfigurationError(f"fitting a surface needs samples of at least two rates, found {len(groups)}")
    sc = cfg.raw["surface"]
    fits = []
    for rate in sorted(groups):
        fits.append(fit_rate_curve(groups[rate], int(sc["degree"]), sc["transform"], sc["abscissa"]))
    surface = build_surface(fits, sc["interpolation"])
    spath = out / "surface.json"
    save_surface(surface, spath)
    rpath = out / "fit_report.csv"
    with open(rpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIT_REPORT_COLUMNS)
        for f in surface.fits:
            fer = [x.fer for x in groups[f.rate]]
            w.writerow([repr(f.rate), f.n_samples, repr(f.s_domain[0]), repr(f.s_domain[1]), repr(min(fer)), repr(max(fer)), repr(f.residual_rms)])
            log.info("rate %g: %d samples, residual rms %.4f", f.rate, f.n_samples, f.residual_rms)
    return [spath, rpath]


def _surface(cfg: PipelineConfig, args):
    path = Path(getattr(args, "surface", None) or cfg.out_dir / "surface.json")
    if not path.is_file():
        raise ConfigurationError(f"surface file not found: {path} (run 'fit' first)")
    return load_surface(path)


def cmd_optimize(cfg: PipelineConfig, args) -> list[Path]:
    surface = _surface(cfg, args)
    d = getattr(args, "distance", None)
    d = float(cfg.raw["optimize"]["d_km"] if d is None else d)
    p = cfg.system.at_distance(d)
    space = cfg.search
    fn = make_objective(p, surface)
    grid_pt = grid_search(p, surface, space, fn=fn)
    best = local_refine(p, surface, grid_pt, space, fn=fn) if space.refine else grid_pt
    out = cfg.out_dir
    paths = [out / "optimum.csv", out / "optimum_grid.csv"]
    write_sweep(paths[0], [best])
    write_sweep(paths[1], [grid_pt])
    log.info("d=%g km: V_A*=%.4g beta*=%.4g R=%.4g FER=%.4g SKR=%.4g", d, best.v_a_star, best.beta_star, best.rate, best.fer, best.skr)
    return paths


def cmd_sweep(cfg: PipelineConfig, args) -> list[Path]:
    surface = _surface(cfg, args)
    space = cfg.search
    pts = distance_sweep(cfg.system, cfg.distances, surface, space)
    out = cfg.out_dir
    paths = [out / "sweep.csv"]
    write_sweep(paths[0], pts)
    if space.refine:
        paths.append(out / "sweep_grid.csv")
        write_sweep(paths[1], distance_sweep(cfg.system, cfg.distances, surface, with_refine(space, False)))
    for pt in pts:
        log.info("d=%5.1f km feasible=%s beta*=%.4g FER=%.4g SKR=%.4g", pt.d_km, pt.feasible, pt.beta_star, pt.fer, pt.skr)
    return paths


def cmd_compare(cfg: PipelineConfig, args) -> list[Path]:
    surface = _surface(cfg, args)
    rows = fixed_beta_baseline(cfg.system, cfg.distances, surface, float(cfg.raw["sweep"]["beta0"]), cfg.search)
    path = cfg.out_dir / "comparison.csv"
    write_comparison(path, rows)
    return [path]


def cmd_validate(cfg: PipelineConfig, args) -> list[Path]:
    surface = _surface(cfg, args)
    sweep_path = cfg.out_dir / "sweep.csv"
    if sweep_path.is_file():
        pts = read_sweep(sweep_path)
    else:
        pts = distance_sweep(cfg.system, cfg.distances, surface, cfg.search)
    code = build_code(cfg)
    sim = cfg.sim_config("validate")
    rows = []
    for pt in pts:
        if not pt.feasible:
            continue
        view = extend_to_rate(code, pt.rate)
        smp = run_fer_point(view, pt.s, sim)
        pred = float(eval_fer(surface, pt.s, pt.rate))
        tol = max(0.03, 2.0 * smp.ci_half_width)
        p = cfg.system.at_distance(pt.d_km)
        i_ab = math.log2(1.0 + pt.s)
        chi = holevo_bound_be(p, pt.v_a_star)
        skr_sim = float(secret_key_rate(i_ab, chi, pt.beta_star, smp.fer))
        rows.append((pt.d_km, pt.rate, pt.s, pred, smp.fer, smp.ci_low, smp.ci_high, smp.frames, smp.frame_errors,
                     tol, int(abs(pred - smp.fer) <= tol), pt.skr, skr_sim))
        log.info("d=%5.1f km predicted FER %.4f simulated %.4f [%.4f, %.4f]", pt.d_km, pred, smp.fer, smp.ci_low, smp.ci_high)
    path = cfg.out_dir / "validation.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VALIDATION_COLUMNS)
        for r in rows:
            w.writerow([x if isinstance(x, int) else repr(float(x)) for x in r])
    return [path]


STAGES = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "validate": cmd_validate,
}
PIPELINE = ("simulate", "fit", "optimize", "sweep", "compare", "validate")


def _run_stage(name, cfg, args, manifest):
    t0 = time.perf_counter()
    try:
        outputs = STAGES[name](cfg, args)
    except (ConfigurationError, ProtographError, ConstructionError, RateRangeError, TableError, SurfaceError, FileNotFoundError) as e:
        raise StageError(EXIT_INPUT, f"{name}: {e}") from e
    except (FitError, GaussianDomainError, FloatingPointError, np.linalg.LinAlgError) as e:
        raise StageError(EXIT_NUMERIC, f"{name}: {e}") from e
    manifest.record(name, time.perf_counter() - t0, outputs)
    if getattr(args, "_incomplete", None):
        rates = ", ".join(f"{r:g}" for r in args._incomplete)
        raise StageError(EXIT_BUDGET, f"{name}: SNR ladder budget exhausted before the FER window was covered for rate(s) {rates}")


def _global_flags(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="YAML configuration file")
    p.add_argument("--seed", type=int, default=d, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, default=d, help="decoder threads")
    p.add_argument("--out", default=d, help="output directory (overrides the config)")
    p.add_argument("--log-level", default=d, choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvqkd-rateopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "Monte-Carlo FER ladders for every configured rate",
        "fit": "fit per-rate curves and write the FER surface",
        "optimize": "joint (V_A, beta) optimum at one distance",
        "sweep": "optimum at every configured distance",
        "compare": "joint optimum against fixed beta0 per distance",
        "validate": "simulate the code at the sweep optima",
        "pipeline": "all stages in order",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        _global_flags(sp, suppress=True)
        if name == "fit":
            sp.add_argument("samples", nargs="*", help="sample CSV files (default: samples_r*.csv in the output directory)")
        if name in ("optimize", "sweep", "compare", "validate"):
            sp.add_argument("--surface", help="surface JSON (default: surface.json in the output directory)")
        if name == "optimize":
            sp.add_argument("--distance", type=float, help="fiber length in km (overrides optimize.d_km)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level or "INFO"), format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, seed=args.seed, workers=args.workers, out=args.out)
    except ConfigurationError as e:
        print(f"error: config: {e}", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create output directory: {e}", file=sys.stderr)
        return EXIT_INPUT
    manifest = Manifest(cfg)
    stages = PIPELINE if args.command == "pipeline" else (args.command,)
    try:
        for name in stages:
            log.info("stage %s", name)
            _run_stage(name, cfg, args, manifest)
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
