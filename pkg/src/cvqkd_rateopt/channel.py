"""Gaussian-modulated, heterodyne-detected link with a trusted noisy detector.

Noise referral convention (the single place it is fixed):

* ``xi_ch_a`` is excess noise referred to the channel input, so it reaches
  the detector attenuated by ``eta * T``;
* ``xi_rec`` is the total electronic noise of the heterodyne pair referred to
  the detector output; it is not attenuated;
* heterodyne splits the received mode on a balanced beamsplitter, which
  halves signal and noise and adds half a vacuum unit per quadrature.

Per measured quadrature this gives a variance of
``1 + (eta*T*(V_A + xi_ch_a) + xi_rec) / 2`` of which ``eta*T*V_A/2`` is
signal. The trusted detector is modelled as a beamsplitter of transmittance
``eta`` mixing the signal with one arm of an EPR pair of variance
``1 + xi_rec / (1 - eta)``, which reproduces exactly that variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gaussian as gs

__all__ = [
    "ConfigurationError",
    "SystemParams",
    "OperatingPoint",
    "LinkMetrics",
    "channel_transmittance",
    "quadrature_snr",
    "mutual_information_ab",
    "holevo_bound_be",
    "detector_variance",
    "code_rate_of",
    "secret_key_rate",
    "link_metrics",
]


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    d_km: float = 0.0
    alpha_db_per_km: float = 0.2
    eta: float = 0.55
    xi_ch_a: float = 0.05
    xi_rec: float = 0.18

    def __post_init__(self):
        if self.d_km < 0:
            raise ConfigurationError(f"fiber length must be >= 0, got {self.d_km}")
        if self.alpha_db_per_km < 0:
            raise ConfigurationError(f"attenuation must be >= 0, got {self.alpha_db_per_km}")
        if not 0.0 < self.eta <= 1.0:
            raise ConfigurationError(f"detector efficiency must lie in (0, 1], got {self.eta}")
        if self.xi_ch_a < 0 or self.xi_rec < 0:
            raise ConfigurationError("noise variances must be >= 0")
        if self.eta == 1.0 and self.xi_rec > 0.0:
            raise ConfigurationError("eta = 1 with xi_rec > 0 leaves no room for detector noise in the trusted model")

    def at_distance(self, d_km: float) -> "SystemParams":
        return SystemParams(d_km, self.alpha_db_per_km, self.eta, self.xi_ch_a, self.xi_rec)

    @property
    def transmittance(self) -> float:
        return channel_transmittance(self.alpha_db_per_km, self.d_km)


@dataclass(frozen=True)
class OperatingPoint:
    v_a: float
    beta: float

    def __post_init__(self):
        if not self.v_a > 0:
            raise ConfigurationError(f"modulation variance must be > 0, got {self.v_a}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigurationError(f"reconciliation efficiency must lie in (0, 1), got {self.beta}")


@dataclass(frozen=True)
class LinkMetrics:
    t_ch: float
    s: float
    i_ab: float
    chi_be: float
    r: float


def channel_transmittance(alpha_db_per_km: float, d_km: float) -> float:
    if alpha_db_per_km < 0 or d_km < 0:
        raise ConfigurationError("attenuation and distance must be >= 0")
    return 10.0 ** (-alpha_db_per_km * d_km / 10.0)


def quadrature_snr(params: SystemParams, v_a):
    """Signal-to-noise ratio of one heterodyne quadrature (linear)."""
    et = params.eta * params.transmittance
    return (0.5 * et * np.asarray(v_a, dtype=float)) / (1.0 + 0.5 * (et * params.xi_ch_a + params.xi_rec))


def mutual_information_ab(params: SystemParams, v_a):
    """Alice-Bob mutual information in bits per symbol, both quadratures."""
    return np.log2(1.0 + quadrature_snr(params, v_a))


def detector_variance(params: SystemParams) -> float:
    """Variance of the EPR pair that models the trusted detector noise."""
    if params.xi_rec == 0.0:
        return 1.0
    if params.eta >= 1.0:
        raise ConfigurationError("eta = 1 with xi_rec > 0 leaves no room for detector noise in the trusted model")
    return 1.0 + params.xi_rec / (1.0 - params.eta)


def holevo_bound_be(params: SystemParams, v_a: float) -> float:
    """Holevo information between Eve and Bob's heterodyne data, in bits.

    Modes: A (Alice's EPR half), B (received), F1/F2 (detector EPR pair).
    Eve purifies AB, so ``S(E) = S(AB)``; ``S(E|B)`` is the entropy of
    A, F1', F2 after Bob's heterodyne on the detector output.
    """
    v_a = float(v_a)
    if not v_a > 0:
        raise ConfigurationError(f"modulation variance must be > 0, got {v_a}")
    t = params.transmittance
    v = v_a + 1.0
    a = v
    b = t * v + 1.0 - t + t * params.xi_ch_a
    c = np.sqrt(t) * np.sqrt(v * v - 1.0)
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    gamma_ab = np.block([[a * eye, c * z], [c * z, b * eye]])
    s_e = gs.von_neumann_entropy(gamma_ab)

    nu_d = detector_variance(params)
    full = gs.direct_sum(gamma_ab, gs.epr_covariance(nu_d))
    full = gs.apply_beamsplitter(full, 1, 2, params.eta)
    cond = gs.heterodyne_condition(full, 1)
    s_e_given_b = gs.von_neumann_entropy(cond)
    return max(0.0, s_e - s_e_given_b)


def code_rate_of(beta, i_ab):
    """Rate of the binary code used per quadrature."""
    return 0.5 * np.asarray(beta, dtype=float) * np.asarray(i_ab, dtype=float)


def secret_key_rate(i_ab, chi_be, beta, fer):
    """Asymptotic secret key rate in bits per symbol, floored at zero."""
    skr = (1.0 - np.asarray(fer, dtype=float)) * (np.asarray(beta) * np.asarray(i_ab) - np.asarray(chi_be))
    return np.maximum(skr, 0.0)


def link_metrics(params: SystemParams, point: OperatingPoint) -> LinkMetrics:
    s = float(quadrature_snr(params, point.v_a))
    i_ab = float(np.log2(1.0 + s))
    return LinkMetrics(
        t_ch=params.transmittance,
        s=s,
        i_ab=i_ab,
        chi_be=holevo_bound_be(params, point.v_a),
        r=float(code_rate_of(point.beta, i_ab)),
    )
