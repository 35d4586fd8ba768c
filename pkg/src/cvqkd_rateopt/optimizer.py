"""Joint choice of modulation variance and reconciliation efficiency.

For every ``(V_A, beta)`` the code rate ``R = beta * I_AB / 2`` picks a point
on the FER surface, and the key rate is ``(1 - FER) * (beta I_AB - chi_BE)``.
Points whose rate falls outside the surface are infeasible, never clamped.

The solvers work on an objective ``fn(V, B) -> skr`` that broadcasts over
arrays and returns NaN for infeasible points. :func:`make_objective` builds it
from system parameters and a surface; tests can pass synthetic ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import ConfigurationError, SystemParams, holevo_bound_be, quadrature_snr, secret_key_rate
from .surface import InfeasibleRateError, eval_fer

__all__ = [
    "SearchSpace",
    "OptimumPoint",
    "Comparison",
    "LinkModel",
    "make_objective",
    "objective",
    "grid_search",
    "local_refine",
    "distance_sweep",
    "fixed_beta_baseline",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchSpace:
    v_a_range: tuple = (0.5, 10.0)
    beta_range: tuple = (0.5, 0.99)
    v_a_points: int = 96
    beta_points: int = 99
    refine: bool = True

    def __post_init__(self):
        for name, (lo, hi) in (("v_a_range", self.v_a_range), ("beta_range", self.beta_range)):
            if not lo < hi:
                raise ConfigurationError(f"{name}: need lo < hi, got {(lo, hi)}")
        if self.v_a_points < 2 or self.beta_points < 2:
            raise ConfigurationError("grid sizes must be >= 2")
        if self.v_a_range[0] <= 0:
            raise ConfigurationError("modulation variance range must be positive")
        if not (0 < self.beta_range[0] and self.beta_range[1] < 1):
            raise ConfigurationError("efficiency range must lie inside (0, 1)")

    @property
    def v_a_grid(self) -> np.ndarray:
        return np.linspace(*self.v_a_range, self.v_a_points)

    @property
    def beta_grid(self) -> np.ndarray:
        return np.linspace(*self.beta_range, self.beta_points)

    def beta_index(self, beta0: float) -> int:
        g = self.beta_grid
        i = int(np.argmin(np.abs(g - beta0)))
        if abs(g[i] - beta0) > 1e-9:
            raise ConfigurationError(f"beta0={beta0} is not a point of the efficiency grid")
        return i


@dataclass(frozen=True)
class OptimumPoint:
    d_km: float
    v_a_star: float
    beta_star: float
    s: float
    rate: float
    fer: float
    skr: float
    feasible: bool


@dataclass(frozen=True)
class Comparison:
    joint: OptimumPoint
    v_a_baseline: float
    skr_baseline: float
    improvement: float


@dataclass(frozen=True)
class LinkModel:
    """SNR and Holevo terms as functions of ``(params, v_a)``.

    Defaults are the physical model; stubs make analytic test cases.
    """

    snr: object = None
    chi: object = None

    def snr_of(self, params, v):
        return np.asarray((self.snr or quadrature_snr)(params, v), dtype=float)

    def chi_of(self, params, v):
        f = self.chi or holevo_bound_be
        v = np.asarray(v, dtype=float)
        return np.vectorize(lambda x: float(f(params, x)), otypes=[float])(v)


def make_objective(params: SystemParams, surface, model: LinkModel | None = None):
    """Vectorised objective; NaN marks a rate outside the surface."""
    model = model or LinkModel()

    def fn(v, b):
        v, b = np.broadcast_arrays(np.asarray(v, dtype=float), np.asarray(b, dtype=float))
        # chi depends on V_A only: evaluate once per distinct value
        uv, inv = np.unique(v, return_inverse=True)
        s_u = model.snr_of(params, uv)
        chi_u = model.chi_of(params, uv)
        s = s_u[inv].reshape(v.shape)
        chi = chi_u[inv].reshape(v.shape)
        i_ab = np.log2(1.0 + s)
        r = 0.5 * b * i_ab
        ok = surface.contains_rate(r)
        fer = np.ones_like(r)
        if np.any(ok):
            fer[ok] = eval_fer(surface, s[ok], r[ok])
        out = secret_key_rate(i_ab, chi, b, fer)
        out = np.where(ok, out, np.nan)
        return out

    fn.details = lambda v, b: _details(params, surface, model, v, b)
    return fn


def _details(params, surface, model, v, b):
    s = float(model.snr_of(params, v))
    i_ab = math.log2(1.0 + s)
    r = 0.5 * b * i_ab
    try:
        fer = float(eval_fer(surface, s, r))
    except InfeasibleRateError:
        fer = math.nan
    return s, r, fer


def objective(params: SystemParams, surface, v_a: float, beta: float, model: LinkModel | None = None) -> float:
    """Key rate at one operating point.

    Raises :class:`InfeasibleRateError` when the implied code rate is outside
    the surface.
    """
    if not v_a > 0 or not 0 < beta < 1:
        raise ConfigurationError(f"operating point out of domain: V_A={v_a}, beta={beta}")
    val = float(make_objective(params, surface, model)(v_a, beta))
    if math.isnan(val):
        s = float((model or LinkModel()).snr_of(params, v_a))
        raise InfeasibleRateError(0.5 * beta * math.log2(1.0 + s), surface.rate_range)
    return val


def _point(d_km, fn, v, b, skr):
    details = getattr(fn, "details", None)
    if details is not None:
        s, r, fer = details(v, b)
    else:
        s = r = fer = math.nan
    return OptimumPoint(float(d_km), float(v), float(b), s, r, fer, float(skr), True)


def _infeasible(d_km):
    nan = math.nan
    return OptimumPoint(float(d_km), nan, nan, nan, nan, nan, 0.0, False)


def _grid_values(fn, space: SearchSpace):
    # rows: beta ascending, columns: V_A ascending
    vv, bb = np.meshgrid(space.v_a_grid, space.beta_grid)
    return fn(vv, bb)


def _pick(vals, space):
    """First maximum in (beta, V_A) row-major order: lower beta, then lower V_A."""
    masked = np.where(np.isnan(vals), -np.inf, vals)
    idx = int(np.argmax(masked))
    best = masked.flat[idx]
    if not best > 0:
        return None
    ib, iv = np.unravel_index(idx, vals.shape)
    return space.v_a_grid[iv], space.beta_grid[ib], best


def grid_search(params, surface, space: SearchSpace, *, model=None, fn=None) -> OptimumPoint:
    """Exhaustive search over the grid of ``space``.

    Ties go to the lower beta, then the lower V_A. The result is infeasible
    when no grid point has a supported rate and a positive key rate.
    """
    fn = fn or make_objective(params, surface, model)
    d = params.d_km if params is not None else 0.0
    pick = _pick(_grid_values(fn, space), space)
    if pick is None:
        return _infeasible(d)
    return _point(d, fn, *pick)


def _golden_max(f, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    e = a + GOLDEN * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + GOLDEN * (b - a)
            fe = f(e)
    return (c, fc) if fc >= fe else (e, fe)


def local_refine(params, surface, start: OptimumPoint, space: SearchSpace = SearchSpace(), *, model=None, fn=None, max_rounds: int = 200) -> OptimumPoint:
    """Coordinate ascent with golden-section line searches around ``start``.

    The search box starts at two grid steps per axis and halves each round
    until it is below 1e-3 of the axis range. A move is taken only if it
    raises the key rate, so the result is never worse than ``start``.
    """
    if not start.feasible:
        return start
    fn = fn or make_objective(params, surface, model)

    def f(v, b):
        val = float(fn(v, b))
        return -math.inf if math.isnan(val) else val

    (vlo, vhi), (blo, bhi) = space.v_a_range, space.beta_range
    v, b = start.v_a_star, start.beta_star
    best = f(v, b)
    hv = 2.0 * (vhi - vlo) / (space.v_a_points - 1)
    hb = 2.0 * (bhi - blo) / (space.beta_points - 1)
    tv, tb = 1e-3 * (vhi - vlo), 1e-3 * (bhi - blo)
    for _ in range(max_rounds):
        if 2 * hv < tv and 2 * hb < tb:
            break
        nv, val = _golden_max(lambda x: f(x, b), max(vlo, v - hv), min(vhi, v + hv), 1e-3 * tv)
        if val > best:
            v, best = nv, val
        nb, val = _golden_max(lambda x: f(v, x), max(blo, b - hb), min(bhi, b + hb), 1e-3 * tb)
        if val > best:
            b, best = nb, val
        hv *= 0.5
        hb *= 0.5
    if not best > start.skr:
        return start
    return _point(start.d_km, fn, v, b, best)


def _check_distances(d_list):
    d = np.asarray(list(d_list), dtype=float)
    if d.size == 0:
        raise ConfigurationError("distance list is empty")
    if np.any(np.diff(d) <= 0):
        raise ConfigurationError("distances must be strictly ascending")
    return d


def distance_sweep(params_template: SystemParams, d_list, surface, space: SearchSpace = SearchSpace(), *, model=None):
    """One optimum per distance; unreachable distances come back infeasible."""
    out = []
    for d in _check_distances(d_list):
        p = params_template.at_distance(float(d))
        fn = make_objective(p, surface, model)
        pt = grid_search(p, surface, space, fn=fn)
        if space.refine and pt.feasible:
            pt = local_refine(p, surface, pt, space, fn=fn)
        out.append(pt)
    return out


def improvement_ratio(joint: float, baseline: float) -> float:
    if baseline > 0:
        return (joint - baseline) / baseline
    return math.inf if joint > 0 else 0.0


def fixed_beta_baseline(params_template: SystemParams, d_list, surface, beta0: float = 0.95, space: SearchSpace = SearchSpace(), *, model=None):
    """Joint optimum against the best V_A at fixed ``beta0``, per distance."""
    ib = space.beta_index(beta0)
    out = []
    for d in _check_distances(d_list):
        p = params_template.at_distance(float(d))
        fn = make_objective(p, surface, model)
        vals = _grid_values(fn, space)
        pick = _pick(vals, space)
        joint = _infeasible(d) if pick is None else _point(d, fn, *pick)
        if space.refine and joint.feasible:
            joint = local_refine(p, surface, joint, space, fn=fn)
        row = np.where(np.isnan(vals[ib]), -np.inf, vals[ib])
        iv = int(np.argmax(row))
        base = float(max(row[iv], 0.0))
        v_base = float(space.v_a_grid[iv]) if row[iv] > -np.inf else math.nan
        out.append(Comparison(joint, v_base, base, improvement_ratio(joint.skr, base)))
    return out


def with_refine(space: SearchSpace, refine: bool) -> SearchSpace:
    return replace(space, refine=refine)
