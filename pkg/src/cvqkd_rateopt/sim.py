"""Monte-Carlo frame error rate of a code view over the BI-AWGN channel.

Every frame draws its information word and noise from its own generator,
seeded by ``(seed, frame_index)``. A frame's outcome therefore does not
depend on how frames are distributed over threads. The same noise
realisations are reused at every SNR of a ladder (common random numbers),
which keeps sampled FER curves monotone far more often than independent
draws would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from . import _kernels
from .raptor import CodeView, RateAdaptiveCode, encode, extend_to_rate

__all__ = [
    "SimConfig",
    "FerSample",
    "LadderPolicy",
    "FerGrid",
    "clopper_pearson",
    "transmit_frame",
    "sum_product_decode",
    "run_fer_point",
    "run_fer_grid",
    "shannon_snr",
    "snr_to_db",
    "db_to_snr",
]


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    max_frames: int = 2000
    target_errors: int = 50
    max_iterations: int = 200
    llr_clip: float = 30.0
    workers: int = 1

    def __post_init__(self):
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        if self.target_errors < 1:
            raise ValueError("target_errors must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def clopper_pearson(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    alpha = 1.0 - level
    lo = 0.0 if errors == 0 else float(stats.beta.ppf(alpha / 2, errors, frames - errors + 1))
    hi = 1.0 if errors == frames else float(stats.beta.ppf(1 - alpha / 2, errors + 1, frames - errors))
    return lo, hi


@dataclass(frozen=True)
class FerSample:
    s: float
    rate: float
    frames: int
    frame_errors: int
    seed: int = 0
    fer: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        if self.frames < 1 or not 0 <= self.frame_errors <= self.frames:
            raise ValueError("need frames >= 1 and 0 <= frame_errors <= frames")
        object.__setattr__(self, "fer", self.frame_errors / self.frames)
        lo, hi = clopper_pearson(self.frame_errors, self.frames)
        object.__setattr__(self, "ci_low", lo)
        object.__setattr__(self, "ci_high", hi)

    @property
    def ci_half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    @property
    def s_db(self) -> float:
        return snr_to_db(self.s)


def snr_to_db(s: float) -> float:
    return 10.0 * math.log10(s) if s > 0 else -math.inf


def db_to_snr(db: float) -> float:
    return 10.0 ** (db / 10.0)


def shannon_snr(rate: float, beta: float = 1.0) -> float:
    """SNR at which ``rate = beta * log2(1 + s) / 2``."""
    return 2.0 ** (2.0 * rate / beta) - 1.0


def _frame_rng(seed: int, frame: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(frame)])


def transmit_frame(view: CodeView, codeword, s: float, rng: np.random.Generator, llr_clip: float = 30.0) -> np.ndarray:
    """BPSK (0 -> +1, 1 -> -1) over AWGN with noise variance ``1/s``.

    Returns channel LLRs for every code variable; punctured ones are 0.
    """
    if s < 0:
        raise ValueError("SNR must be >= 0")
    c = np.asarray(codeword)
    tx = view.transmitted
    noise = rng.standard_normal(tx.size)
    llr = np.zeros(view.n_vars)
    # LLR = 2 y / sigma^2 = 2 s (x + z / sqrt(s))
    llr[tx] = 2.0 * s * (1.0 - 2.0 * c[tx]) + 2.0 * math.sqrt(s) * noise
    np.clip(llr, -llr_clip, llr_clip, out=llr)
    return llr


def sum_product_decode(view: CodeView, llr, max_iterations: int = 200, early_exit: bool = True):
    """Decode ``llr`` (one value per code variable).

    Returns ``(hard_bits, converged, iterations)``. Decoding stops at the
    first iteration whose hard decisions satisfy every check unless
    ``early_exit`` is off, in which case messages run to a fixed point (on a
    cycle-free graph the decisions are then exact bitwise MAP).
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.shape != (view.n_vars,):
        raise ValueError(f"expected {view.n_vars} LLRs, got shape {llr.shape}")
    hard = np.empty(view.n_vars, dtype=np.uint8)
    post = np.empty(view.n_vars)
    ok, it = _kernels.spa_decode(*view.graph, llr, int(max_iterations), hard, post, bool(early_exit))
    return hard, bool(ok), int(it)


def _draw_frame(view: CodeView, s: float, seed: int, frame: int, llr_clip: float):
    rng = _frame_rng(seed, frame)
    info = rng.integers(0, 2, size=view.k, dtype=np.uint8)
    c = encode(view, info, full=True)
    return c, transmit_frame(view, c, s, rng, llr_clip)


def _set_threads(workers: int) -> None:
    numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))


def run_fer_point(view: CodeView, s: float, cfg: SimConfig) -> FerSample:
    """Simulate until ``target_errors`` frame errors or ``max_frames`` frames.

    A frame error is a decoder that did not converge or converged to a
    codeword other than the one sent. Frames are decoded in batches, and the
    count is cut at the frame (in index order) that produced the
    ``target_errors``-th error, so the result is independent of batch size
    and thread count.
    """
    if s < 0:
        raise ValueError("SNR must be >= 0")
    _set_threads(cfg.workers)
    batch = max(8, 2 * cfg.workers)
    graph = view.graph
    errors = 0
    frames = 0
    while frames < cfg.max_frames and errors < cfg.target_errors:
        nb = min(batch, cfg.max_frames - frames)
        cws = np.empty((nb, view.n_vars), dtype=np.uint8)
        llrs = np.empty((nb, view.n_vars))
        for b in range(nb):
            cws[b], llrs[b] = _draw_frame(view, s, cfg.seed, frames + b, cfg.llr_clip)
        fe = np.zeros(nb, dtype=np.bool_)
        conv = np.zeros(nb, dtype=np.bool_)
        its = np.zeros(nb, dtype=np.int64)
        _kernels.decode_batch(*graph, llrs, cws, cfg.max_iterations, fe, conv, its)
        for b in range(nb):
            frames += 1
            errors += int(fe[b])
            if errors >= cfg.target_errors:
                break
    return FerSample(float(s), float(view.rate), frames, errors, cfg.seed)


@dataclass(frozen=True)
class LadderPolicy:
    """How the SNR points of each rate are chosen.

    The ladder starts at the SNR where the rate would run at efficiency
    ``beta_bounds[1]`` and moves in steps of ``step_db`` until it holds a
    point with FER >= ``fer_window[1]`` and one with FER <= ``fer_window[0]``.
    ``forced`` (linear SNRs, or a mapping rate -> SNRs) bypasses the search.
    """

    beta_bounds: tuple[float, float] = (0.5, 0.99)
    fer_window: tuple[float, float] = (0.005, 0.9)
    step_db: float = 0.25
    max_points: int = 14
    forced: object = None

    def forced_for(self, rate: float):
        if self.forced is None:
            return None
        if isinstance(self.forced, dict):
            for r, pts in self.forced.items():
                if abs(float(r) - rate) < 1e-9:
                    return list(pts)
            return None
        return list(self.forced)


@dataclass
class FerGrid:
    samples: list = field(default_factory=list)
    incomplete_rates: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def rates(self) -> list[float]:
        return sorted({s.rate for s in self.samples})

    def for_rate(self, rate: float) -> list[FerSample]:
        return sorted((s for s in self.samples if abs(s.rate - rate) < 1e-12), key=lambda x: x.s)

    @property
    def complete(self) -> bool:
        return not self.incomplete_rates


def _ladder(view: CodeView, policy: LadderPolicy, cfg: SimConfig):
    rate = view.rate
    lo_fer, hi_fer = policy.fer_window
    step = db_to_snr(policy.step_db)
    s0 = shannon_snr(rate, policy.beta_bounds[1])
    done = {}

    def sample(s):
        key = round(snr_to_db(s), 9)
        if key not in done:
            done[key] = run_fer_point(view, s, cfg)
        return done[key]

    first = sample(s0)
    s = s0
    cur = first
    while cur.fer < hi_fer and len(done) < policy.max_points:
        s /= step
        cur = sample(s)
    s = s0
    cur = first
    while cur.fer > lo_fer and len(done) < policy.max_points:
        s *= step
        cur = sample(s)
    pts = sorted(done.values(), key=lambda x: x.s)
    covered = pts[0].fer >= hi_fer and pts[-1].fer <= lo_fer
    return pts, covered


def run_fer_grid(code: RateAdaptiveCode, rates, s_policy: LadderPolicy | None, cfg: SimConfig) -> FerGrid:
    """Sample an SNR ladder for each rate in ``rates``."""
    policy = s_policy or LadderPolicy()
    grid = FerGrid()
    for r in rates:
        view = extend_to_rate(code, float(r))
        forced = policy.forced_for(float(r))
        if forced is not None:
            grid.samples.extend(run_fer_point(view, float(s), cfg) for s in forced)
            continue
        pts, covered = _ladder(view, policy, cfg)
        grid.samples.extend(pts)
        if not covered:
            grid.incomplete_rates.append(view.rate)
    return grid
