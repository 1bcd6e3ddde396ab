"""Survival probability, density moments, localization and shape fits,
diffusion estimates and the nonlinear on-site energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (InfiniteLengthError, InvalidParameterError, NoDiffusionError,
                     NoLocalizationError, UndefinedMomentError)
from .model import LatticeState, site_indices

# mean-squared-residual improvement over a constant fit needed to accept a shape
SHAPE_MIN_GAIN = 0.05


@dataclass(frozen=True)
class DensityProfile:
    rho: np.ndarray
    normalized_flag: bool = False

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        if rho.ndim != 1 or rho.size % 2 == 0:
            raise InvalidParameterError("a profile needs an odd number of sites")
        if np.any(rho < 0):
            raise InvalidParameterError("densities must be nonnegative")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_state(cls, state: LatticeState) -> "DensityProfile":
        return cls(state.density)

    def normalized(self) -> "DensityProfile":
        total = self.rho.sum()
        if total <= 0:
            raise UndefinedMomentError("cannot normalize an empty profile")
        return DensityProfile(self.rho / total, True)

    @property
    def sites(self) -> np.ndarray:
        return site_indices(self.rho.size)


@dataclass(frozen=True)
class LocFit:
    ell: float
    r2: float
    window: tuple


@dataclass(frozen=True)
class ShapeClass:
    label: str
    score_exp: float
    score_gauss: float
    score_flat: float = float("nan")


@dataclass(frozen=True)
class DiffusionFit:
    """Linear fit x2 = D t + b. ``exponent`` is the log-log growth exponent on
    the same window; ``diffusive`` flags |exponent - 1| <= 0.25."""

    D: float
    intercept: float
    r2: float
    exponent: float
    diffusive: bool


def _density(obj) -> np.ndarray:
    if isinstance(obj, LatticeState):
        return obj.density
    if isinstance(obj, DensityProfile):
        return obj.rho
    arr = np.asarray(obj)
    if np.iscomplexobj(arr):
        return arr.real**2 + arr.imag**2
    return arr.astype(float)


def survival(obj) -> float:
    """Total probability left in the box: sum of |c_n|^2."""
    return float(_density(obj).sum())


def second_moment(profile) -> float:
    """<n^2> of the surviving density, normalized by its total."""
    rho = _density(profile)
    total = rho.sum()
    if not total > 0:
        raise UndefinedMomentError("zero total density")
    n = site_indices(rho.size).astype(float)
    return float(np.dot(n * n, rho) / total)


def default_window(L: int, n_abs: int = 10) -> tuple:
    return (3, (L - 1) // 2 - n_abs - 2)


def _window_points(rho, window):
    lo, hi = window
    n = site_indices(rho.size)
    if lo < 0 or hi > (rho.size - 1) // 2 or lo > hi:
        raise InvalidParameterError(f"window {window} outside the box")
    sel = (np.abs(n) >= lo) & (np.abs(n) <= hi)
    r = rho[sel]
    if np.any(r <= 0):
        raise InvalidParameterError("window contains sites with zero density")
    return np.abs(n[sel]).astype(float), np.log(r)


def _linfit(x, y):
    A = np.column_stack((x, np.ones_like(x)))
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, resid


def _r2(y, resid):
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0


def fit_loc_length(profile, window=None, n_abs: int = 10) -> LocFit:
    """Fit log rho_n = -2|n|/ell + b over window[0] <= |n| <= window[1]."""
    rho = _density(profile)
    window = tuple(window) if window is not None else default_window(rho.size, n_abs)
    x, y = _window_points(rho, window)
    if x.size < 2 or np.ptp(x) == 0:
        raise InvalidParameterError("window needs at least two distinct |n|")
    (slope, _), resid = _linfit(x, y)
    if slope >= 0:
        raise NoLocalizationError(f"log-density slope {slope:g} is not negative")
    return LocFit(float(-2.0 / slope), _r2(y, resid), window)


def theoretical_loc_length(W: float) -> float:
    """Band-centre localization length 96 / W^2."""
    if W == 0:
        raise InfiniteLengthError("no disorder: localization length is infinite")
    if W < 0:
        raise InvalidParameterError(f"W must be positive, got {W!r}")
    return 96.0 / W**2


def shape_classify(profile, window=None, n_abs: int = 10) -> ShapeClass:
    """Compare exponential (log rho linear in |n|) and Gaussian (log rho linear
    in n^2) fits on the same window by mean squared residual."""
    rho = _density(profile)
    window = tuple(window) if window is not None else default_window(rho.size, n_abs)
    x, y = _window_points(rho, window)
    if x.size < 10:
        raise InvalidParameterError(f"need >= 10 usable sites, got {x.size}")
    flat = float(np.mean((y - y.mean()) ** 2))
    nan = float("nan")
    if flat <= 1e-24 * max(1.0, float(np.mean(y * y))):
        return ShapeClass("other", nan, nan, flat)
    _, res_e = _linfit(x, y)
    _, res_g = _linfit(x * x, y)
    s_e = float(np.mean(res_e**2))
    s_g = float(np.mean(res_g**2))
    best = min(s_e, s_g)
    if best > (1.0 - SHAPE_MIN_GAIN) * flat:
        label = "other"
    else:
        label = "exponential" if s_e <= s_g else "gaussian"
    return ShapeClass(label, s_e, s_g, flat)


def estimate_diffusion_coefficient(times, x2, window=None) -> DiffusionFit:
    """Slope of <x^2> against t over ``window`` = (t_lo, t_hi).

    The slope convention is <x^2> = D t, so D here is twice the textbook
    diffusion constant of a 1D walk.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(x2, dtype=float)
    if t.shape != m.shape:
        raise InvalidParameterError("times and x2 must have equal length")
    sel = np.isfinite(m)
    if window is not None:
        sel &= (t >= window[0]) & (t <= window[1])
    t, m = t[sel], m[sel]
    if t.size < 3:
        raise InvalidParameterError("need at least three samples in the window")
    (D, b), resid = _linfit(t, m)
    if D <= 0:
        raise NoDiffusionError(f"<x^2> slope {D:g} is not positive")
    pos = (t > 0) & (m > 0)
    if pos.sum() >= 2:
        (alpha, _), _ = _linfit(np.log(t[pos]), np.log(m[pos]))
    else:
        alpha = float("nan")
    return DiffusionFit(float(D), float(b), _r2(m, resid), float(alpha),
                        bool(abs(alpha - 1.0) <= 0.25))


def estimate_D_SE(D: float, W: float, gamma: float) -> float:
    """Decoherence-induced diffusion D * t_loc * gamma with t_loc = 1/W^2
    (proportionality constant set to 1)."""
    if D < 0 or W < 0 or gamma < 0:
        raise InvalidParameterError("D, W and gamma must be nonnegative")
    if W == 0:
        raise InvalidParameterError("no localization time without disorder")
    return D * gamma / W**2


def nonlinear_energy(state, g: float):
    """Per-site nonlinear shift g|c_n|^2 and its maximum."""
    v = g * _density(state)
    return v, float(v.max()) if v.size else 0.0
