"""Closed-form FER surface built from per-rate polynomial fits.

Each rate gets a weighted least-squares polynomial of FER against an SNR
abscissa; between rates the coefficients are interpolated. The default
abscissa is the SNR normalised by the Shannon limit of the rate,
``u = s / (2**(2R) - 1)``: waterfalls of different rates sit at very
different linear SNRs but at similar ``u``, so interpolated coefficients
describe a curve that actually lies between its neighbours. ``abscissa="snr"``
fits against linear ``s`` instead.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import PchipInterpolator
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

__all__ = [
    "SURFACE_FORMAT",
    "SURFACE_VERSION",
    "FitError",
    "SurfaceError",
    "InfeasibleRateError",
    "RateCurveFit",
    "FerSurface",
    "fit_rate_curve",
    "build_surface",
    "eval_fer",
    "surface_to_json",
    "surface_from_json",
    "save_surface",
    "load_surface",
    "FerSurfaceRegressor",
]

SURFACE_FORMAT = "cvqkd-fer-surface"
SURFACE_VERSION = 1
TRANSFORMS = ("direct", "logit")
ABSCISSAE = ("normalized", "snr")
INTERPOLATIONS = ("linear", "pchip")
# FER values are clipped into [LOGIT_EPS, 1 - LOGIT_EPS] before the logit
LOGIT_EPS = 1e-4
GATE = (-0.1, 1.1)


class FitError(ValueError):
    """A per-rate fit cannot be computed or fails its quality gate."""


class SurfaceError(ValueError):
    pass


class InfeasibleRateError(ValueError):
    """Requested rate lies outside the surface's rate range."""

    def __init__(self, rate, rate_range):
        super().__init__(f"rate {rate:.6g} outside surface range [{rate_range[0]:.6g}, {rate_range[1]:.6g}]")
        self.rate = rate
        self.rate_range = rate_range


def _abscissa(s, rate, kind):
    s = np.asarray(s, dtype=float)
    if kind == "snr":
        return s
    return s / (2.0 ** (2.0 * np.asarray(rate, dtype=float)) - 1.0)


def _logit(p):
    p = np.clip(p, LOGIT_EPS, 1.0 - LOGIT_EPS)
    return np.log(p / (1.0 - p))


def _expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class RateCurveFit:
    rate: float
    coefficients: tuple
    domain: tuple
    degree: int = 3
    transform: str = "direct"
    abscissa: str = "normalized"
    residual_rms: float = 0.0
    n_samples: int = 0

    def __post_init__(self):
        if len(self.coefficients) != self.degree + 1:
            raise FitError(f"expected {self.degree + 1} coefficients, got {len(self.coefficients)}")
        if not self.domain[0] < self.domain[1]:
            raise FitError(f"empty fit domain {self.domain}")
        if self.transform not in TRANSFORMS or self.abscissa not in ABSCISSAE:
            raise FitError(f"unknown transform/abscissa {self.transform}/{self.abscissa}")

    def raw(self, s):
        """Fitted value before the inverse transform and clamping."""
        x = np.clip(_abscissa(s, self.rate, self.abscissa), *self.domain)
        return P.polyval(x, np.asarray(self.coefficients))

    def __call__(self, s):
        y = self.raw(s)
        if self.transform == "logit":
            y = _expit(y)
        return np.clip(y, 0.0, 1.0)

    @property
    def s_domain(self) -> tuple:
        if self.abscissa == "snr":
            return tuple(self.domain)
        scale = 2.0 ** (2.0 * self.rate) - 1.0
        return (self.domain[0] * scale, self.domain[1] * scale)


def _empirical_rate(samples, fer):
    """FER pulled off 0 and 1 for the logit: (errors + 1/2) / (frames + 1).

    Samples without frame counts fall back to clipping at ``LOGIT_EPS``.
    """
    try:
        e = np.array([x.frame_errors for x in samples], dtype=float)
        n = np.array([x.frames for x in samples], dtype=float)
    except AttributeError:
        return np.clip(fer, LOGIT_EPS, 1.0 - LOGIT_EPS)
    return (e + 0.5) / (n + 1.0)


def fit_rate_curve(samples, degree: int = 3, transform: str = "direct", abscissa: str = "normalized") -> RateCurveFit:
    """Weighted least squares fit of one rate's FER samples.

    Each sample is weighted by the inverse square of its confidence-interval
    width, so tight points (many frames, or FER near 0 or 1) pin the curve.
    """
    if transform not in TRANSFORMS:
        raise FitError(f"transform must be one of {TRANSFORMS}")
    if abscissa not in ABSCISSAE:
        raise FitError(f"abscissa must be one of {ABSCISSAE}")
    samples = list(samples)
    if not samples:
        raise FitError("no samples")
    rate = samples[0].rate
    if any(abs(x.rate - rate) > 1e-12 for x in samples):
        raise FitError("samples of a rate curve must share one rate")
    if len(samples) < degree + 2:
        raise FitError(f"rate {rate:.6g}: {len(samples)} samples cannot determine a degree-{degree} fit (need {degree + 2})")
    s = np.array([x.s for x in samples])
    if np.unique(s).size < 2:
        raise FitError(f"rate {rate:.6g}: all samples at one SNR")
    if np.unique(s).size < degree + 1:
        raise FitError(f"rate {rate:.6g}: only {np.unique(s).size} distinct SNRs for a degree-{degree} fit")
    fer = np.array([x.fer for x in samples])
    width = np.array([x.ci_high - x.ci_low for x in samples])
    if fer.max() < 0.8 or fer.min() > 0.02:
        warnings.warn(f"rate {rate:.6g}: samples span FER [{fer.min():.3g}, {fer.max():.3g}], narrower than [0.02, 0.8]", stacklevel=2)

    x = _abscissa(s, rate, abscissa)
    w = 1.0 / np.maximum(width, 1e-12)
    y = fer
    if transform == "logit":
        pc = _empirical_rate(samples, fer)
        y = _logit(pc)
        w = w * pc * (1.0 - pc)  # delta method
    coef = P.polyfit(x, y, degree, w=w)
    fit = RateCurveFit(
        rate=float(rate),
        coefficients=tuple(float(c) for c in coef),
        domain=(float(x.min()), float(x.max())),
        degree=degree,
        transform=transform,
        abscissa=abscissa,
        n_samples=len(samples),
    )
    resid = fit(s) - fer
    object.__setattr__(fit, "residual_rms", float(np.sqrt(np.mean(resid**2))))

    grid = np.linspace(*fit.domain, 257)
    raw = P.polyval(grid, coef)
    vals = _expit(raw) if transform == "logit" else raw
    if vals.min() < GATE[0] or vals.max() > GATE[1]:
        raise FitError(f"rate {rate:.6g}: fitted curve leaves [{GATE[0]}, {GATE[1]}] inside its domain")
    return fit


@dataclass(frozen=True, eq=False)
class FerSurface:
    fits: tuple
    interpolation: str = "linear"

    def __post_init__(self):
        if len(self.fits) < 2:
            raise SurfaceError("a surface needs at least two rate fits")
        if self.interpolation not in INTERPOLATIONS:
            raise SurfaceError(f"interpolation must be one of {INTERPOLATIONS}")
        f0 = self.fits[0]
        for f in self.fits[1:]:
            if (f.degree, f.transform, f.abscissa) != (f0.degree, f0.transform, f0.abscissa):
                raise SurfaceError("all fits must share degree, transform and abscissa")
        rates = np.array([f.rate for f in self.fits])
        if np.any(np.diff(rates) <= 0):
            raise SurfaceError("fit rates must be distinct and ascending")
        coefs = np.array([f.coefficients for f in self.fits])
        doms = np.array([f.domain for f in self.fits])
        object.__setattr__(self, "_rates", rates)
        object.__setattr__(self, "_coefs", coefs)
        object.__setattr__(self, "_doms", doms)
        if self.interpolation == "pchip":
            object.__setattr__(self, "_pchip", PchipInterpolator(rates, coefs, axis=0))

    @property
    def rates(self) -> np.ndarray:
        return self._rates.copy()

    @property
    def rate_range(self) -> tuple:
        return (float(self._rates[0]), float(self._rates[-1]))

    @property
    def degree(self) -> int:
        return self.fits[0].degree

    @property
    def transform(self) -> str:
        return self.fits[0].transform

    @property
    def abscissa(self) -> str:
        return self.fits[0].abscissa

    def contains_rate(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lo, hi = self.rate_range
        return (r >= lo) & (r <= hi)

    def __eq__(self, other):
        if not isinstance(other, FerSurface):
            return NotImplemented
        return surface_to_json(self) == surface_to_json(other)

    __hash__ = None


def build_surface(fits, interpolation: str = "linear") -> FerSurface:
    fits = sorted(fits, key=lambda f: f.rate)
    rates = [f.rate for f in fits]
    if len(set(rates)) != len(rates):
        raise SurfaceError("duplicate rates among fits")
    return FerSurface(tuple(fits), interpolation)


def _interp(surface: FerSurface, r: np.ndarray):
    rates = surface._rates
    i = np.clip(np.searchsorted(rates, r, side="right") - 1, 0, len(rates) - 2)
    w = (r - rates[i]) / (rates[i + 1] - rates[i])
    w = w[..., None]
    if surface.interpolation == "pchip":
        coefs = surface._pchip(r)
    else:
        coefs = (1.0 - w) * surface._coefs[i] + w * surface._coefs[i + 1]
    # domain is interpolated too, so a knot rate sees exactly its own domain
    doms = (1.0 - w) * surface._doms[i] + w * surface._doms[i + 1]
    return coefs, doms


def eval_fer(surface: FerSurface, s, r):
    """FER predicted by the surface at SNR ``s`` and code rate ``r``.

    Broadcasts over array inputs. Raises :class:`InfeasibleRateError` if any
    rate lies outside ``surface.rate_range``; the SNR is clamped into the
    (interpolated) fit domain.
    """
    s_arr, r_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(r, dtype=float))
    ok = surface.contains_rate(r_arr)
    if not np.all(ok):
        bad = float(np.ravel(r_arr)[~np.ravel(ok)][0])
        raise InfeasibleRateError(bad, surface.rate_range)
    coefs, doms = _interp(surface, r_arr)
    x = _abscissa(s_arr, r_arr, surface.abscissa)
    x = np.clip(x, doms[..., 0], doms[..., 1])
    # Horner over the trailing coefficient axis
    y = np.zeros_like(x)
    for k in range(coefs.shape[-1] - 1, -1, -1):
        y = y * x + coefs[..., k]
    if surface.transform == "logit":
        y = _expit(y)
    y = np.clip(y, 0.0, 1.0)
    return float(y) if y.ndim == 0 else y


def surface_to_json(surface: FerSurface) -> str:
    doc = {
        "format": SURFACE_FORMAT,
        "version": SURFACE_VERSION,
        "degree": surface.degree,
        "transform": surface.transform,
        "abscissa": surface.abscissa,
        "interpolation": surface.interpolation,
        "knots": [
            {
                "rate": f.rate,
                "coefficients": list(f.coefficients),
                "domain": list(f.domain),
                "residual_rms": f.residual_rms,
                "n_samples": f.n_samples,
            }
            for f in surface.fits
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def surface_from_json(text: str) -> FerSurface:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SurfaceError(f"surface file is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("format") != SURFACE_FORMAT:
        raise SurfaceError("not a FER surface document")
    if doc.get("version") != SURFACE_VERSION:
        raise SurfaceError(f"unsupported surface version {doc.get('version')!r}")
    try:
        fits = [
            RateCurveFit(
                rate=float(k["rate"]),
                coefficients=tuple(float(c) for c in k["coefficients"]),
                domain=tuple(float(v) for v in k["domain"]),
                degree=int(doc["degree"]),
                transform=doc["transform"],
                abscissa=doc["abscissa"],
                residual_rms=float(k.get("residual_rms", 0.0)),
                n_samples=int(k.get("n_samples", 0)),
            )
            for k in doc["knots"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise SurfaceError(f"malformed surface document: {e}") from None
    return build_surface(fits, doc.get("interpolation", "linear"))


def save_surface(surface: FerSurface, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(surface_to_json(surface))


def load_surface(path) -> FerSurface:
    with open(path, encoding="utf-8") as fh:
        return surface_from_json(fh.read())


class _Sample:
    # minimal stand-in for FerSample when fitting from arrays
    __slots__ = ("s", "rate", "fer", "ci_low", "ci_high")

    def __init__(self, s, rate, errors, frames):
        from .sim import clopper_pearson

        self.s, self.rate = s, rate
        self.fer = errors / frames
        self.ci_low, self.ci_high = clopper_pearson(errors, frames)


class FerSurfaceRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper: ``X`` columns are ``(s, rate)``, ``y`` is FER.

    ``frames`` (per sample) turns FER values back into error counts for
    the confidence-interval weights; without it every sample counts as
    ``default_frames`` frames.
    """

    def __init__(self, degree=3, transform="direct", abscissa="normalized", interpolation="linear", default_frames=1000):
        self.degree = degree
        self.transform = transform
        self.abscissa = abscissa
        self.interpolation = interpolation
        self.default_frames = default_frames

    def fit(self, X, y, frames=None):
        X, y = check_X_y(X, y, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: (s, rate)")
        if np.any((y < 0) | (y > 1)):
            raise ValueError("FER targets must lie in [0, 1]")
        frames = np.full(len(y), self.default_frames) if frames is None else np.asarray(frames, dtype=int)
        errors = np.rint(y * frames).astype(int)
        groups = {}
        for (s, r), e, n in zip(X, errors, frames):
            groups.setdefault(float(r), []).append(_Sample(float(s), float(r), int(e), int(n)))
        fits = [fit_rate_curve(g, self.degree, self.transform, self.abscissa) for _, g in sorted(groups.items())]
        self.surface_ = build_surface(fits, self.interpolation)
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "surface_")
        X = check_array(X, dtype=float)
        return np.asarray(eval_fer(self.surface_, X[:, 0], X[:, 1]), dtype=float)

    @classmethod
    def from_surface(cls, surface: FerSurface) -> "FerSurfaceRegressor":
        est = cls(degree=surface.degree, transform=surface.transform, abscissa=surface.abscissa, interpolation=surface.interpolation)
        est.surface_ = surface
        est.n_features_in_ = 2
        return est
