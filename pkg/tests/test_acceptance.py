"""Acceptance criteria 1-11, one test each.

Every test records a PASS/FAIL line (shown in the terminal summary) and then
asserts, so a failing criterion also fails the run. Criteria 7, 9 and 10 use
the desk-profile pipeline (k = 1000, five rates, 5-80 km). The simulate stage
is cached in ``.acceptance/desk-samples-<key>`` keyed by every setting it
reads. The downstream stages are cached in ``.acceptance/desk-<config hash>``.
A cache is reused only when every digest in its manifest still matches. Set
``ARTIFACT_RERUN_DESK=1`` to force a fresh run.
"""

import csv
import hashlib
import json
import math
import os
import shutil
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from cvqkd_rateopt import cli
from cvqkd_rateopt.channel import SystemParams, holevo_bound_be, mutual_information_ab
from cvqkd_rateopt.config import config_from_dict
from cvqkd_rateopt.gaussian import g_entropy
from cvqkd_rateopt.optimizer import LinkModel, SearchSpace, fixed_beta_baseline, grid_search, objective
from cvqkd_rateopt.protograph import default_protograph_path, load_protograph
from cvqkd_rateopt.raptor import encode, extend_to_rate, lift, view_from_parity_check
from cvqkd_rateopt.sim import SimConfig, run_fer_point, shannon_snr, sum_product_decode, transmit_frame
from cvqkd_rateopt.surface import InfeasibleRateError, RateCurveFit, build_surface, eval_fer, fit_rate_curve, load_surface
from cvqkd_rateopt.tables import read_samples

ROOT = Path(__file__).resolve().parents[1]
CACHE = ROOT / ".acceptance"
DESK_RATES = (0.2, 0.1, 0.05, 0.02, 0.01)
DESK_DOC = {"seed": 2024}
TINY_DOC = {
    "seed": 11,
    "code": {"lifting": 50},
    "simulation": {"rates": [0.2, 0.1, 0.05], "max_frames": 100, "target_errors": 20},
    "search": {"v_a_points": 24, "beta_points": 50},
    "sweep": {"distances": [2, 5, 10, 20, 40]},
    "validate": {"max_frames": 100, "target_errors": 20},
}


def record(n, ok, msg):
    ACCEPTANCE[n] = (bool(ok), msg)
    assert ok, msg


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@lru_cache(maxsize=None)
def desk_code():
    return lift(load_protograph(default_protograph_path()), 500, seed=1, ext_degree=2)


def _stages_ok(out, stages):
    man = out / "manifest.json"
    if not man.is_file():
        return False
    doc = json.loads(man.read_text())
    if doc.get("version") != cli.__version__ or not set(stages) <= set(doc.get("stages", {})):
        return False
    return all((out / f).is_file() and cli._digest(out / f) == h
               for name in stages for f, h in doc["stages"][name]["outputs"].items())


def _simulation_key(cfg):
    # everything the simulate stage reads; the surface and search settings do not matter
    doc = {k: cfg.raw[k] for k in ("seed", "simulation", "code")}
    doc["protograph"] = cfg.protograph_path.read_text()
    doc["version"] = cli.__version__
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]


def _cli(stage, out):
    code = cli.main(["--log-level", "WARNING", stage, "--seed", str(DESK_DOC["seed"]), "--out", str(out)])
    assert code == 0, f"desk {stage} exited with {code}"


@pytest.fixture(scope="session")
def desk_run():
    """Desk pipeline outputs; simulation and downstream stages cached separately."""
    cfg = config_from_dict(DESK_DOC, ROOT)
    rerun = bool(os.environ.get("ARTIFACT_RERUN_DESK"))
    sim_dir = CACHE / f"desk-samples-{_simulation_key(cfg)}"
    if rerun or not _stages_ok(sim_dir, ["simulate"]):
        sim_dir.mkdir(parents=True, exist_ok=True)
        _cli("simulate", sim_dir)
    out = CACHE / f"desk-{cfg.config_hash[:12]}"
    downstream = cli.PIPELINE[1:]
    if rerun or not _stages_ok(out, downstream):
        out.mkdir(parents=True, exist_ok=True)
        for old in out.glob("samples_r*.csv"):
            old.unlink()
        for f in sim_dir.glob("samples_r*.csv"):
            shutil.copyfile(f, out / f.name)
        for stage in downstream:
            _cli(stage, out)
    return out


# 1 ------------------------------------------------------------------------

def test_c1_perfect_channel_holevo():
    t0 = time.perf_counter()
    p = SystemParams(d_km=0.0, eta=1.0, xi_ch_a=0.0, xi_rec=0.0)
    chi = [holevo_bound_be(p, v) for v in (0.5, 2.0, 5.0, 10.0)]
    dt = time.perf_counter() - t0
    record(1, max(chi) <= 1e-9 and dt < 1.0, f"max chi_BE = {max(chi):.3g} (<= 1e-9), {dt:.3f} s")


# 2 ------------------------------------------------------------------------

def untrusted_heterodyne_chi(v_a, t, xi):
    """Entangling-cloner bound for ideal heterodyne, written from scratch."""
    a = v_a + 1.0
    b = t * (v_a + xi) + 1.0
    c2 = t * (a * a - 1.0)
    big_a = a * a + b * b - 2.0 * c2
    big_b = (a * b - c2) ** 2
    disc = math.sqrt(big_a * big_a - 4.0 * big_b)
    nu1 = math.sqrt(0.5 * (big_a + disc))
    nu2 = math.sqrt(0.5 * (big_a - disc))
    nu3 = a - c2 / (b + 1.0)
    return g_entropy(nu1) + g_entropy(nu2) - g_entropy(nu3)


def test_c2_untrusted_limit():
    t0 = time.perf_counter()
    worst = 0.0
    for d in (5.0, 20.0, 50.0, 100.0):
        p = SystemParams(d_km=d, eta=1.0 - 1e-6, xi_rec=0.0)
        t = 10 ** (-p.alpha_db_per_km * d / 10)
        for v in np.linspace(0.5, 10.0, 10):
            ref = untrusted_heterodyne_chi(v, t, p.xi_ch_a)
            worst = max(worst, abs(holevo_bound_be(p, v) - ref) / ref)
    dt = time.perf_counter() - t0
    record(2, worst <= 1e-4 and dt < 5.0, f"max relative deviation {worst:.3g} (<= 1e-4) on 10x4 grid, {dt:.2f} s")


# 3 ------------------------------------------------------------------------

def test_c3_monotone_in_va():
    t0 = time.perf_counter()
    v = np.linspace(0.5, 10.0, 96)
    bad = []
    for d in (3.0, 20.0, 50.0, 100.0):
        p = SystemParams(d_km=d)
        i_ab = np.asarray(mutual_information_ab(p, v))
        chi = np.array([holevo_bound_be(p, x) for x in v])
        if not (np.all(np.diff(i_ab) > 0) and np.all(np.diff(chi) > 0)):
            bad.append(d)
    dt = time.perf_counter() - t0
    record(3, not bad and dt < 10.0, f"I_AB and chi_BE strictly increasing at d = 3/20/50/100 km (violations at {bad}), {dt:.2f} s")


# 4 ------------------------------------------------------------------------

def test_c4_decoder_soundness():
    t0 = time.perf_counter()
    code = desk_code()
    rng = np.random.default_rng(4)
    errs, zero_fer = {}, {}
    for r in DESK_RATES:
        view = extend_to_rate(code, r)
        e = 0
        for _ in range(100):
            c = encode(view, rng.integers(0, 2, view.k, dtype=np.uint8), full=True)
            llr = np.zeros(view.n_vars)
            llr[view.transmitted] = 30.0 * (1.0 - 2.0 * c[view.transmitted].astype(float))
            hard, ok, _ = sum_product_decode(view, llr)
            e += int(not ok or np.any(hard != c))
        errs[r] = e
        zero_fer[r] = run_fer_point(view, 0.0, SimConfig(seed=4, max_frames=100, target_errors=100)).fer
    dt = time.perf_counter() - t0
    ok = all(v == 0 for v in errs.values()) and all(v == 1.0 for v in zero_fer.values()) and dt < 300
    record(4, ok, f"k={code.k}: noiseless errors/100 {errs}, FER at s=0 {zero_fer}, {dt:.1f} s")


# 5 ------------------------------------------------------------------------

# girth-6 toy code with 16 codewords
GIRTH6 = [[1, 1, 0, 0, 1, 0, 0], [0, 1, 1, 0, 0, 1, 0], [1, 0, 1, 1, 0, 0, 1]]
# cycle-free toy code
TREE = [[1, 1, 1, 0, 0, 0, 0], [0, 0, 1, 1, 1, 0, 0], [0, 0, 0, 0, 1, 1, 1]]


def bitwise_map(h, llr):
    n = h.shape[1]
    words = np.array([[(i >> j) & 1 for j in range(n)] for i in range(2**n)], dtype=np.uint8)
    cw = words[np.all((words @ h.T) % 2 == 0, axis=1)]
    # log-likelihood of each codeword, bit 0 <-> positive LLR
    score = (0.5 * llr * (1 - 2 * cw.astype(float))).sum(axis=1)
    w = np.exp(score - score.max())
    p1 = (w[:, None] * cw).sum(axis=0) / w.sum()
    return (p1 > 0.5).astype(np.uint8), len(cw)


def agreement(h_rows, info, early_exit, s, n_patterns=1000, seed=5):
    h = np.array(h_rows, dtype=np.uint8)
    view = view_from_parity_check(h, info)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_patterns):
        c = encode(view, rng.integers(0, 2, view.k, dtype=np.uint8), full=True)
        llr = transmit_frame(view, c, s, rng)
        hard, _, _ = sum_product_decode(view, llr, early_exit=early_exit)
        ref, n_cw = bitwise_map(h, llr)
        hits += int(np.array_equal(hard, ref))
    return hits / n_patterns, n_cw


def test_c5_spa_vs_map():
    t0 = time.perf_counter()
    a_loopy, n1 = agreement(GIRTH6, [0, 1, 2, 3], True, 1.0)
    a_tree, n2 = agreement(TREE, [0, 1, 3, 5], False, 1.0)
    dt = time.perf_counter() - t0
    ok = a_loopy >= 0.95 and a_tree == 1.0 and max(n1, n2) <= 16 and dt < 10
    record(5, ok, f"agreement girth-6 ({n1} codewords) {a_loopy:.3f} (>= 0.95), tree ({n2} codewords) {a_tree:.3f} (= 1), {dt:.1f} s")


# 6 ------------------------------------------------------------------------

def test_c6_fer_monotone_in_snr():
    t0 = time.perf_counter()
    view = extend_to_rate(desk_code(), 0.1)
    cfg = SimConfig(seed=6, max_frames=400, target_errors=40)
    ladder = sorted(shannon_snr(0.1, b) for b in (0.9, 0.86, 0.82, 0.79, 0.76, 0.73))
    smp = [run_fer_point(view, s, cfg) for s in ladder]
    bad = [i for i in range(5) if smp[i + 1].fer > smp[i].fer and smp[i + 1].ci_low > smp[i].ci_high]
    dt = time.perf_counter() - t0
    fers = ", ".join(f"{x.fer:.3f}" for x in smp)
    record(6, not bad, f"R=0.1 six-point ladder FER [{fers}], CI-separated increases at steps {bad}, {dt:.0f} s on 1 worker")


# 7 ------------------------------------------------------------------------

def _groups(run):
    g = {}
    for p in sorted(run.glob("samples_r*.csv")):
        for s in read_samples(p):
            g.setdefault(s.rate, []).append(s)
    return g


def _in_domain(fit, s):
    lo, hi = fit.s_domain
    return lo <= s.s <= hi


def test_c7_surface_fidelity(desk_run):
    groups = _groups(desk_run)
    # the surface the pipeline wrote, and refits with its own settings
    full = load_surface(desk_run / "surface.json")
    opts = dict(degree=full.fits[0].degree, transform=full.fits[0].transform, abscissa=full.fits[0].abscissa)
    fits = {r: fit_rate_curve(v, **opts) for r, v in groups.items()}
    assert all(fits[f.rate].coefficients == f.coefficients for f in full.fits)
    worst_knot = 0.0
    knot_bad = []
    for r, smp in groups.items():
        for s in smp:
            if _in_domain(fits[r], s):
                err = abs(float(eval_fer(full, s.s, r)) - s.fer)
                tol = max(0.02, 2 * s.ci_half_width)
                worst_knot = max(worst_knot, err / tol)
                if err > tol:
                    knot_bad.append((r, round(s.s, 4)))
    held = 0.05
    part = build_surface([f for r, f in fits.items() if r != held], full.interpolation)
    held_bad, n_held = [], 0
    for s in groups[held]:
        if _in_domain(fits[held], s):
            n_held += 1
            err = abs(float(eval_fer(part, s.s, held)) - s.fer)
            if err > max(0.05, 3 * s.ci_half_width):
                held_bad.append((round(s.s, 4), round(s.fer, 3), round(float(eval_fer(part, s.s, held)), 3)))
    ok = not knot_bad and not held_bad
    record(7, ok, f"{opts['transform']} cubic: knot misses {knot_bad} (worst err/tol {worst_knot:.2f}); held-out R={held}: {len(held_bad)}/{n_held} misses {held_bad}")


# 8 ------------------------------------------------------------------------

def synthetic_surface(seed):
    rng = np.random.default_rng(seed)
    u = np.linspace(0.9, 2.0, 12)
    fits = []
    for r in (0.01, 0.02, 0.05, 0.1, 0.2):
        fer = 1.0 / (1.0 + np.exp(rng.uniform(5, 15) * (u - rng.uniform(1.1, 1.5))))
        fits.append(RateCurveFit(r, tuple(np.polynomial.polynomial.polyfit(u, fer, 3)), (0.9, 2.0)))
    return build_surface(fits)


def full_scan(p, surface, space, model):
    best = None
    for b in space.beta_grid:
        for v in space.v_a_grid:
            try:
                val = objective(p, surface, v, b, model)
            except InfeasibleRateError:
                continue
            if val > 0 and (best is None or val > best[2]):
                best = (v, b, val)
    return best


def test_c8_optimizer_soundness():
    t0 = time.perf_counter()
    space = SearchSpace()
    mismatch, dominance = [], []
    for seed in range(10):
        surf = synthetic_surface(100 + seed)
        p = SystemParams(d_km=[3, 5, 10, 15, 20, 25, 30, 40, 50, 60][seed])
        chi = lru_cache(maxsize=None)(lambda v, p=p: holevo_bound_be(p, v))
        ref = full_scan(p, surf, space, LinkModel(chi=lambda params, v: chi(float(v))))
        got = grid_search(p, surf, space)
        if (ref is None and got.feasible) or (ref is not None and (got.v_a_star, got.beta_star, got.skr) != ref):
            mismatch.append(seed)
        for c in fixed_beta_baseline(SystemParams(), [5, 10, 20, 30, 40, 60, 80], surf, 0.95, space):
            if c.joint.skr < c.skr_baseline:
                dominance.append((seed, c.joint.d_km))
    dt = time.perf_counter() - t0
    record(8, not mismatch and not dominance, f"grid/oracle mismatches {mismatch} of 10; dominance violations {dominance}, {dt:.0f} s")


# 9 ------------------------------------------------------------------------

def test_c9_desk_trends(desk_run):
    sweep = [r for r in rows(desk_run / "sweep.csv") if r["feasible"] == "1"]
    d = [float(r["d_km"]) for r in sweep]
    beta = [float(r["beta_star"]) for r in sweep]
    fer = [float(r["fer"]) for r in sweep]
    # the refined optimum is located to 1e-3 of the beta range
    tol = 1e-3 * (0.99 - 0.5)
    a = all(b2 >= b1 - tol for b1, b2 in zip(beta, beta[1:]))
    b = len(fer) >= 2 and fer[-1] > fer[0]
    comp = rows(desk_run / "comparison.csv")
    unb = [float(r["d_km"]) for r in comp if float(r["skr_baseline"]) == 0 and float(r["skr"]) > 0 and r["improvement"] == "inf"]
    c = bool(unb)
    trend = ", ".join(f"{x:g}:{y:.3f}/{z:.3f}" for x, y, z in zip(d, beta, fer))
    record(9, a and b and c, f"(a) beta* non-decreasing {a}; (b) FER {fer[0]:.3f} -> {fer[-1]:.3f} {b}; "
           f"(c) unbounded improvement at d = {unb} {c}; d:beta*/FER {trend}")


# 10 -----------------------------------------------------------------------

def test_c10_validation_closure(desk_run):
    val = rows(desk_run / "validation.csv")
    hits = sum(int(r["within_tolerance"]) for r in val)
    frac = hits / len(val) if val else 0.0
    detail = ", ".join(f"{float(r['d_km']):g}:{float(r['fer_predicted']):.3f}/{float(r['fer_simulated']):.3f}" for r in val)
    record(10, frac >= 0.8, f"{hits}/{len(val)} distances within max(0.03, 2 CI half-width) (>= 80%); d:pred/sim {detail}")


# 11 -----------------------------------------------------------------------

def _digests(out):
    man = json.loads((out / "manifest.json").read_text())
    return {f: h for st in man["stages"].values() for f, h in st["outputs"].items()}


def test_c11_determinism(tmp_path):
    import yaml

    digests = []
    for name in ("first", "second"):
        cfgp = tmp_path / f"{name}.yaml"
        cfgp.write_text(yaml.safe_dump(dict(TINY_DOC, out=name)))
        assert cli.main(["--log-level", "WARNING", "pipeline", "--config", str(cfgp)]) == 0
        digests.append(_digests(tmp_path / name))
    same = digests[0] == digests[1] and len(digests[0]) >= 8
    record(11, same, f"{len(digests[0])} output files, byte-identical digests across two pipeline runs: {same}")
