"""Zero-mean Gaussian states described by their covariance matrix.

Conventions used throughout the package:

* quadrature ordering ``(x1, p1, x2, p2, ...)``;
* shot-noise units, so the vacuum covariance is the identity;
* the symplectic form is ``Omega = diag([[0, 1], [-1, 0]], ...)``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PURITY_TOL",
    "GaussianDomainError",
    "omega",
    "validate_covariance",
    "is_physical",
    "epr_covariance",
    "thermal_covariance",
    "direct_sum",
    "apply_beamsplitter",
    "heterodyne_condition",
    "symplectic_eigenvalues",
    "g_entropy",
    "von_neumann_entropy",
]

# symplectic eigenvalues in [1 - PURITY_TOL, 1) are treated as exactly 1
PURITY_TOL = 1e-9
SYMMETRY_TOL = 1e-12


class GaussianDomainError(ValueError):
    pass


def omega(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _as_cov(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
        raise GaussianDomainError(f"covariance must be a square matrix of even size, got shape {g.shape}")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL * scale:
        raise GaussianDomainError("covariance matrix is not symmetric")
    return 0.5 * (g + g.T)


def validate_covariance(gamma) -> np.ndarray:
    """Return a symmetrized copy of ``gamma`` or raise if it is unphysical."""
    g = _as_cov(gamma)
    # squeezed states may sit below vacuum on the diagonal; only the
    # symplectic spectrum (and positivity) decide physicality
    if np.linalg.eigvalsh(g).min() <= 0.0:
        raise GaussianDomainError("covariance matrix is not positive definite")
    nu = _raw_symplectic(g)
    if nu.min() < 1.0 - PURITY_TOL:
        raise GaussianDomainError(f"symplectic eigenvalue {nu.min():.12g} < 1 violates the uncertainty principle")
    return g


def is_physical(gamma) -> bool:
    try:
        validate_covariance(gamma)
    except GaussianDomainError:
        return False
    return True


def epr_covariance(v: float) -> np.ndarray:
    """Two-mode squeezed vacuum with local quadrature variance ``v``."""
    if v < 1.0:
        raise GaussianDomainError(f"EPR variance must be >= 1, got {v}")
    c = np.sqrt(v * v - 1.0)
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    return np.block([[v * eye, c * z], [c * z, v * eye]])


def thermal_covariance(nu: float) -> np.ndarray:
    if nu < 1.0:
        raise GaussianDomainError(f"thermal variance must be >= 1, got {nu}")
    return nu * np.eye(2)


def direct_sum(*blocks) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def _mode_slice(m: int) -> slice:
    return slice(2 * m, 2 * m + 2)


def apply_beamsplitter(gamma, mode_a: int, mode_b: int, tau: float) -> np.ndarray:
    """Mix two modes on a beamsplitter of transmittance ``tau``.

    Output mode ``a`` is ``sqrt(tau) a + sqrt(1 - tau) b`` and output mode
    ``b`` is ``-sqrt(1 - tau) a + sqrt(tau) b``. With ``tau = 0`` the modes
    are swapped, with a sign flip on the new mode ``b`` which leaves every
    covariance block except the ``a``-``b`` correlations unchanged.
    """
    g = _as_cov(gamma)
    n = g.shape[0] // 2
    if not 0.0 <= tau <= 1.0:
        raise GaussianDomainError(f"transmittance must lie in [0, 1], got {tau}")
    for m in (mode_a, mode_b):
        if not 0 <= m < n:
            raise GaussianDomainError(f"mode index {m} out of range for {n} modes")
    if mode_a == mode_b:
        raise GaussianDomainError("beamsplitter needs two distinct modes")
    s = np.eye(2 * n)
    t, r = np.sqrt(tau), np.sqrt(1.0 - tau)
    a, b = _mode_slice(mode_a), _mode_slice(mode_b)
    eye = np.eye(2)
    s[a, a] = t * eye
    s[a, b] = r * eye
    s[b, a] = -r * eye
    s[b, b] = t * eye
    return s @ g @ s.T


def heterodyne_condition(gamma, measured: int) -> np.ndarray:
    """Covariance of the remaining modes after heterodyning ``measured``.

    Gaussian conditioning does not depend on the measurement outcome:
    ``G_R - G_C (G_M + I)^-1 G_C^T``.
    """
    g = _as_cov(gamma)
    n = g.shape[0] // 2
    if n < 2:
        raise GaussianDomainError("heterodyne conditioning needs at least two modes")
    if not 0 <= measured < n:
        raise GaussianDomainError(f"mode index {measured} out of range for {n} modes")
    m_idx = np.arange(2 * measured, 2 * measured + 2)
    rest = np.setdiff1d(np.arange(2 * n), m_idx)
    g_m = g[np.ix_(m_idx, m_idx)]
    g_r = g[np.ix_(rest, rest)]
    g_c = g[np.ix_(rest, m_idx)]
    denom = g_m + np.eye(2)
    # positive definite for any physical input
    assert np.linalg.det(denom) > 0.0
    return g_r - g_c @ np.linalg.solve(denom, g_c.T)


def _raw_symplectic(g: np.ndarray) -> np.ndarray:
    n = g.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * omega(n) @ g))
    ev = np.sort(ev)[::-1]
    # eigenvalues come in +/- pairs; average each pair to cancel round-off
    return 0.5 * (ev[0::2] + ev[1::2])


def symplectic_eigenvalues(gamma) -> np.ndarray:
    """Symplectic spectrum, sorted in descending order and clamped at 1."""
    g = _as_cov(gamma)
    nu = _raw_symplectic(g)
    if nu.min() < 1.0 - PURITY_TOL:
        raise GaussianDomainError(f"symplectic eigenvalue {nu.min():.12g} < 1: state is unphysical")
    return np.maximum(nu, 1.0)


def g_entropy(nu: float) -> float:
    """Entropy in bits of a thermal mode with symplectic eigenvalue ``nu``."""
    if nu < 1.0 - PURITY_TOL:
        raise GaussianDomainError(f"g(nu) needs nu >= 1, got {nu}")
    if nu <= 1.0:
        return 0.0
    a = 0.5 * (nu + 1.0)
    b = 0.5 * (nu - 1.0)
    return float(a * np.log2(a) - b * np.log2(b))


def von_neumann_entropy(gamma) -> float:
    return float(sum(g_entropy(nu) for nu in symplectic_eigenvalues(gamma)))
