"""Rate-adaptive raptor-like LDPC codes built from a protograph.

A :class:`RateAdaptiveCode` is a circulant lifting of a protograph (the
highest-rate *core*) plus a deterministic list of extension rows. Extension
row ``j`` XORs ``ext_degree`` core variables into one new parity bit, so
appending ``m`` rows lowers the rate from ``k/n_core`` to ``k/(n_core + m)``
one transmitted symbol at a time.

Variable ordering: core variables column-block by column-block (block ``j``
holds the ``z`` copies of protograph column ``j``), then extension parity
bits in row order. The *transmitted* codeword drops punctured variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .protograph import Protograph

__all__ = [
    "ConstructionError",
    "RateRangeError",
    "RateAdaptiveCode",
    "CodeView",
    "lift",
    "extend_to_rate",
    "encode",
    "view_from_parity_check",
]


class ConstructionError(ValueError):
    """The requested code cannot be built (lifting or encodability failure)."""


class RateRangeError(ValueError):
    def __init__(self, r_target, r_min, r_max):
        self.r_target = r_target
        self.achievable = (r_min, r_max)
        super().__init__(f"rate {r_target:.6g} outside achievable interval [{r_min:.6g}, {r_max:.6g}]")


def _peel_schedule(h: sp.csr_matrix, known: np.ndarray):
    """Order rows so that each one has exactly one unknown variable.

    Returns ``(row_order, pivots)`` or raises :class:`ConstructionError` if
    the matrix is not triangularizable by peeling from ``known``.
    """
    h = h.tocsr()
    hc = h.tocsc()
    known = known.copy()
    unknown_count = np.zeros(h.shape[0], dtype=np.int64)
    for r in range(h.shape[0]):
        cols = h.indices[h.indptr[r]:h.indptr[r + 1]]
        unknown_count[r] = np.count_nonzero(~known[cols])
    ready = [r for r in range(h.shape[0]) if unknown_count[r] == 1]
    done = np.zeros(h.shape[0], dtype=bool)
    order, pivots = [], []
    while ready:
        r = ready.pop(0)
        if done[r] or unknown_count[r] != 1:
            continue
        cols = h.indices[h.indptr[r]:h.indptr[r + 1]]
        v = int(cols[~known[cols]][0])
        known[v] = True
        done[r] = True
        order.append(r)
        pivots.append(v)
        for rr in hc.indices[hc.indptr[v]:hc.indptr[v + 1]]:
            unknown_count[rr] -= 1
            if not done[rr] and unknown_count[rr] == 1:
                ready.append(int(rr))
    if not done.all() or not known.all():
        raise ConstructionError(
            f"parity-check matrix is not in encodable (triangular) form: "
            f"{int((~done).sum())} rows and {int((~known).sum())} variables left after peeling"
        )
    return np.asarray(order, dtype=np.int64), np.asarray(pivots, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class CodeView:
    """One rate of a code: a parity-check matrix plus encoding schedule.

    ``h`` has ``n_vars`` columns; ``n`` counts transmitted (non-punctured)
    columns only, and ``rate == k / n``.
    """

    h: sp.csr_matrix
    k: int
    info_vars: np.ndarray
    punctured: np.ndarray
    row_order: np.ndarray
    pivots: np.ndarray
    m_ext: int = 0

    @property
    def n_vars(self) -> int:
        return int(self.h.shape[1])

    @property
    def n(self) -> int:
        return self.n_vars - int(self.punctured.sum())

    @property
    def rate(self) -> float:
        return self.k / self.n

    @cached_property
    def transmitted(self) -> np.ndarray:
        return np.flatnonzero(~self.punctured)

    @cached_property
    def graph(self):
        """``(chk_ptr, chk_var, var_ptr, var_edge)`` arrays for the kernels."""
        h = self.h
        chk_ptr = h.indptr.astype(np.int64)
        chk_var = h.indices.astype(np.int64)
        order = np.argsort(chk_var, kind="stable")
        var_ptr = np.zeros(self.n_vars + 1, dtype=np.int64)
        np.cumsum(np.bincount(chk_var, minlength=self.n_vars), out=var_ptr[1:])
        return chk_ptr, chk_var, var_ptr, order.astype(np.int64)

    def syndrome(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return (self.h @ bits) % 2


def view_from_parity_check(h, info_vars, punctured=None) -> CodeView:
    """Wrap an arbitrary binary parity-check matrix as an encodable view.

    The matrix must be triangularizable by peeling once ``info_vars`` are
    known; otherwise :class:`ConstructionError` is raised.
    """
    h = sp.csr_matrix(h, dtype=np.uint8)
    h.sum_duplicates()
    h.sort_indices()
    if np.any(h.data > 1):
        raise ConstructionError("parity-check matrix must be binary")
    info_vars = np.asarray(info_vars, dtype=np.int64)
    known = np.zeros(h.shape[1], dtype=bool)
    known[info_vars] = True
    order, pivots = _peel_schedule(h, known)
    punct = np.zeros(h.shape[1], dtype=bool) if punctured is None else np.asarray(punctured, dtype=bool)
    return CodeView(h, len(info_vars), info_vars, punct, order, pivots)


@dataclass(frozen=True, eq=False)
class RateAdaptiveCode:
    protograph: Protograph
    z: int
    shifts: tuple            # ((row, col, shift), ...) per lifted base edge
    core_h: sp.csr_matrix
    k: int
    n_core: int
    info_vars: np.ndarray
    core_punctured: np.ndarray
    core_order: np.ndarray
    core_pivots: np.ndarray
    ext_pool: np.ndarray
    extension_seed: int
    ext_degree: int
    max_extension: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_core_vars(self) -> int:
        return int(self.core_h.shape[1])

    @property
    def rate_max(self) -> float:
        return self.k / self.n_core

    @property
    def rate_min(self) -> float:
        return self.k / (self.n_core + self.max_extension)

    @cached_property
    def ext_links(self) -> np.ndarray:
        """Core variables XOR-ed by each extension row, shape (max_extension, ext_degree)."""
        rng = np.random.default_rng(self.extension_seed)
        pool = self.ext_pool
        d = self.ext_degree
        links = np.empty((self.max_extension, d), dtype=np.int64)
        if self.max_extension == 0:
            return links
        # distinct picks per row: sample without replacement via partial shuffles
        picks = rng.integers(0, pool.size, size=(self.max_extension, d))
        for j in range(1, d):
            while True:
                clash = np.zeros(self.max_extension, dtype=bool)
                for i in range(j):
                    clash |= picks[:, j] == picks[:, i]
                if not clash.any():
                    break
                picks[clash, j] = rng.integers(0, pool.size, size=int(clash.sum()))
        links[:] = pool[picks]
        links.sort(axis=1)
        links.setflags(write=False)
        return links

    def view(self, m_ext: int) -> CodeView:
        if not 0 <= m_ext <= self.max_extension:
            raise ValueError(f"m_ext={m_ext} outside [0, {self.max_extension}]")
        cached = self._cache.get(m_ext)
        if cached is not None:
            return cached
        n_vars = self.n_core_vars + m_ext
        core = self.core_h
        if m_ext:
            d = self.ext_degree
            rows = np.repeat(np.arange(m_ext), d + 1)
            cols = np.concatenate([self.ext_links[:m_ext], (self.n_core_vars + np.arange(m_ext))[:, None]], axis=1)
            ext = sp.csr_matrix(
                (np.ones(m_ext * (d + 1), dtype=np.uint8), (rows, cols.ravel())), shape=(m_ext, n_vars)
            )
            core = sp.hstack([core, sp.csr_matrix((core.shape[0], m_ext), dtype=np.uint8)])
            h = sp.vstack([core, ext]).tocsr()
        else:
            h = core.copy()
        h.sort_indices()
        punct = np.concatenate([self.core_punctured, np.zeros(m_ext, dtype=bool)])
        m_core = self.core_h.shape[0]
        order = np.concatenate([self.core_order, m_core + np.arange(m_ext)])
        pivots = np.concatenate([self.core_pivots, self.n_core_vars + np.arange(m_ext)])
        v = CodeView(h, self.k, self.info_vars, punct, order, pivots, m_ext)
        if len(self._cache) > 16:
            self._cache.clear()
        self._cache[m_ext] = v
        return v


def _four_cycle(edges, new, z, mandatory_only):
    """True if adding ``new=(i, j, a)`` closes a length-4 cycle."""
    i, j, a = new
    allv = list(edges) + [new]
    for e2 in allv:
        if e2 is new or e2[0] != i:
            continue
        j2 = e2[1]
        for e3 in allv:
            if e3 is e2 or e3[1] != j2:
                continue
            i3 = e3[0]
            for e4 in allv:
                if e4 is e3 or e4 is new or e4[0] != i3 or e4[1] != j:
                    continue
                if mandatory_only and not (j2 == j and i3 == i):
                    continue
                if (a - e2[2] + e3[2] - e4[2]) % z == 0:
                    return True
    return False


def lift(
    p: Protograph,
    z: int,
    seed: int = 0,
    *,
    ext_degree: int = 2,
    extension_seed: int | None = None,
    max_extension: int | None = None,
    rate_min: float = 0.01,
    ext_columns=None,
) -> RateAdaptiveCode:
    """Lift ``p`` with circulant permutations of size ``z``.

    Shifts are picked edge by edge in a seeded random order. A shift that
    closes a 4-cycle is avoided when possible; distinct shifts free of
    4-cycles are mandatory between parallel edges of the same base entry,
    and a :class:`ConstructionError` is raised when none exist.

    The information columns are the leading ``cols - rows`` columns and must
    not be punctured; the remaining columns must be recoverable by
    sequential back-substitution.

    Extension rows connect to variables of ``ext_columns`` (default: every
    column of base degree >= 2, i.e. the precode part of the core; all
    columns if there is none).
    """
    z = int(z)
    if z < 2:
        raise ConstructionError("lifting factor must be >= 2")
    if z < max(p.max_multiplicity, p.z_min):
        raise ConstructionError(f"lifting factor {z} below the protograph minimum {max(p.max_multiplicity, p.z_min)}")
    if ext_degree < 2:
        raise ConstructionError("ext_degree must be >= 2")
    n_info_cols = p.n_cols - p.n_rows
    if any(p.punctured[:n_info_cols]):
        raise ConstructionError("information columns (the leading cols-rows columns) must not be punctured")

    rng = np.random.default_rng(seed)
    edges: list[tuple[int, int, int]] = []
    base = p.base_matrix
    for i in range(p.n_rows):
        for j in range(p.n_cols):
            for _ in range(int(base[i, j])):
                cand = rng.permutation(z)
                chosen = None
                fallback = None
                for a in cand:
                    e = (i, j, int(a))
                    if any(x[0] == i and x[1] == j and x[2] == a for x in edges):
                        continue
                    if _four_cycle(edges, e, z, mandatory_only=True):
                        continue
                    if fallback is None:
                        fallback = e
                    if not _four_cycle(edges, e, z, mandatory_only=False):
                        chosen = e
                        break
                if chosen is None:
                    chosen = fallback
                if chosen is None:
                    raise ConstructionError(
                        f"cannot place {int(base[i, j])} parallel edges at base entry ({i}, {j}) "
                        f"with z={z} without a 4-cycle; use a larger lifting factor"
                    )
                edges.append(chosen)

    rows, cols = [], []
    r = np.arange(z)
    for i, j, a in edges:
        rows.append(i * z + r)
        cols.append(j * z + (r + a) % z)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    core = sp.csr_matrix((np.ones(rows.size, dtype=np.uint8), (rows, cols)), shape=(p.n_rows * z, p.n_cols * z))
    core.sort_indices()

    info_vars = np.arange(n_info_cols * z, dtype=np.int64)
    known = np.zeros(core.shape[1], dtype=bool)
    known[info_vars] = True
    order, pivots = _peel_schedule(core, known)

    core_punct = np.repeat(np.asarray(p.punctured, dtype=bool), z)
    k = n_info_cols * z
    n_core = p.n_transmitted * z

    if ext_columns is None:
        # degree-1 columns are extension parities themselves
        ext_columns = [j for j in range(p.n_cols) if base[:, j].sum() >= 2] or list(range(p.n_cols))
    ext_columns = sorted(set(int(c) for c in ext_columns))
    pool = np.concatenate([np.arange(c * z, (c + 1) * z) for c in ext_columns]).astype(np.int64)
    if pool.size < ext_degree:
        raise ConstructionError("extension pool smaller than ext_degree")

    if max_extension is None:
        max_extension = max(0, int(round(k / rate_min)) - n_core)
    return RateAdaptiveCode(
        protograph=p,
        z=z,
        shifts=tuple(edges),
        core_h=core,
        k=k,
        n_core=n_core,
        info_vars=info_vars,
        core_punctured=core_punct,
        core_order=order,
        core_pivots=pivots,
        ext_pool=pool,
        extension_seed=int(seed if extension_seed is None else extension_seed),
        ext_degree=int(ext_degree),
        max_extension=int(max_extension),
    )


def extend_to_rate(code: RateAdaptiveCode, r_target: float) -> CodeView:
    """View of ``code`` whose rate is the closest achievable to ``r_target``."""
    lo, hi = code.rate_min, code.rate_max
    tol = 1e-12
    if not (lo - tol <= r_target <= hi + tol):
        raise RateRangeError(r_target, lo, hi)
    m_ext = int(round(code.k / r_target)) - code.n_core
    m_ext = min(max(m_ext, 0), code.max_extension)
    return code.view(m_ext)


def encode(view: CodeView, info_bits, *, full: bool = False) -> np.ndarray:
    """Systematically encode ``info_bits``.

    Returns the ``n`` transmitted bits, or all ``n_vars`` code bits
    (punctured ones included) when ``full`` is set.
    """
    info = np.asarray(info_bits)
    if info.shape != (view.k,):
        raise ValueError(f"expected {view.k} information bits, got shape {info.shape}")
    c = np.zeros(view.n_vars, dtype=np.uint8)
    c[view.info_vars] = info.astype(np.uint8) & 1
    chk_ptr, chk_var, _, _ = view.graph
    _kernels.encode_rows(chk_ptr, chk_var, view.row_order, view.pivots, c)
    return c if full else c[view.transmitted]
