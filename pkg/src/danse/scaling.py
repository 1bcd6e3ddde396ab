"""Scaled interaction strength and survival, regime labels, and data-collapse
fits of sweep curves taken at different initial widths L0.

Collapse quality is measured on the log(g~) axis: every pair of curves is
linearly interpolated on its common support and the squared difference is
integrated exactly over the merged breakpoints. The objective is the total
integral divided by the total overlap length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import InvalidParameterError, NoOverlapError

LOCALIZED_MAX = 0.1
CHAOTIC_MAX = 10.0
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SweepCurve:
    L0: int
    g_values: np.ndarray
    p_values: np.ndarray
    p_sem: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.g_values, dtype=float)
        p = np.asarray(self.p_values, dtype=float)
        if g.shape != p.shape or g.ndim != 1:
            raise InvalidParameterError("g_values and p_values must be 1-D of equal length")
        if g.size < 2:
            raise InvalidParameterError("a sweep curve needs at least two points")
        if np.any(np.diff(g) <= 0):
            raise InvalidParameterError("g_values must be strictly increasing")
        if np.any(g <= 0):
            raise InvalidParameterError("g_values must be positive for a log axis")
        if self.L0 < 1:
            raise InvalidParameterError("L0 must be >= 1")
        object.__setattr__(self, "g_values", g)
        object.__setattr__(self, "p_values", p)
        if self.p_sem is not None:
            object.__setattr__(self, "p_sem", np.asarray(self.p_sem, dtype=float))


@dataclass
class CollapseFit:
    s: float
    objective: float
    s_stderr: float
    target: str = "g"
    search: tuple = (0.0, 2.0)
    scan: tuple = field(default=((), ()), repr=False)


def scaled_g(g, L0, s):
    """g * L0^-s."""
    if np.any(np.asarray(L0) < 1):
        raise InvalidParameterError("L0 must be >= 1")
    return g * np.power(L0, -s, dtype=float)


def scaled_p(p, L0, nu):
    """p * L0^nu."""
    if np.any(np.asarray(L0) < 1):
        raise InvalidParameterError("L0 must be >= 1")
    return p * np.power(L0, nu, dtype=float)


def classify_regime(g_tilde: float) -> str:
    """'localized' below 0.1, 'chaotic' on [0.1, 10], 'self_trapped' above 10."""
    if g_tilde < 0:
        raise InvalidParameterError("g_tilde must be >= 0")
    if g_tilde < LOCALIZED_MAX:
        return "localized"
    if g_tilde <= CHAOTIC_MAX:
        return "chaotic"
    return "self_trapped"


REGIME_RANGES = {
    "localized": (0.0, LOCALIZED_MAX),
    "chaotic": (LOCALIZED_MAX, CHAOTIC_MAX),
    "self_trapped": (CHAOTIC_MAX, np.inf),
}


def _pair_integral(xa, ya, xb, yb):
    lo = max(xa[0], xb[0])
    hi = min(xa[-1], xb[-1])
    if not hi > lo:
        return 0.0, 0.0
    knots = np.concatenate((xa, xb))
    knots = np.unique(knots[(knots > lo) & (knots < hi)])
    x = np.concatenate(([lo], knots, [hi]))
    d = np.interp(x, xa, ya) - np.interp(x, xb, yb)
    h = np.diff(x)
    # exact integral of a piecewise-linear difference squared
    integral = float(np.sum(h * (d[:-1] ** 2 + d[:-1] * d[1:] + d[1:] ** 2)) / 3.0)
    return integral, float(hi - lo)


def _prepare(curves, target, s, g_tilde_range):
    """Per-curve (log g~ support, y values, log L0) for the chosen target."""
    out = []
    for c in curves:
        x = np.log(c.g_values)
        if target == "g":
            y = c.p_values
        else:
            x = x - s * np.log(c.L0)
            if np.any(c.p_values <= 0):
                keep = c.p_values > 0
                x, y = x[keep], np.log(c.p_values[keep])
            else:
                y = np.log(c.p_values)
            if g_tilde_range is not None:
                lo, hi = g_tilde_range
                keep = (x >= np.log(lo) if lo > 0 else np.ones_like(x, bool)) & (x <= np.log(hi))
                x, y = x[keep], y[keep]
        out.append((x, y, np.log(c.L0)))
    return out


def collapse_objective(curves, exponent, target="g", s=None, g_tilde_range=None,
                       _prepared=None):
    """Collapse dispersion at one exponent value.

    target "g": curves p(log g - exponent * log L0) are compared.
    target "p": with ``s`` fixed, curves log(p) + exponent * log L0 are compared
    on the log g~ axis, restricted to ``g_tilde_range`` if given.
    Returns inf when no pair of curves overlaps.
    """
    prepared = _prepared if _prepared is not None else _prepare(curves, target, s, g_tilde_range)
    total = 0.0
    length = 0.0
    for (xa, ya, la), (xb, yb, lb) in combinations(prepared, 2):
        if xa.size < 2 or xb.size < 2:
            continue
        if target == "g":
            xa2, xb2, ya2, yb2 = xa - exponent * la, xb - exponent * lb, ya, yb
        else:
            xa2, xb2, ya2, yb2 = xa, xb, ya + exponent * la, yb + exponent * lb
        integral, span = _pair_integral(xa2, ya2, xb2, yb2)
        total += integral
        length += span
    return total / length if length > 0 else np.inf


def _golden(f, a, b, tol):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _minimize(f, lo, hi, n_scan, tol):
    grid = np.linspace(lo, hi, n_scan)
    vals = np.array([f(x) for x in grid])
    if not np.isfinite(vals).any():
        raise NoOverlapError("curves never overlap on the search interval")
    k = int(np.nanargmin(np.where(np.isfinite(vals), vals, np.nan)))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, n_scan - 1)]
    x, fx = _golden(f, a, b, tol)
    if vals[k] < fx:
        x, fx = grid[k], vals[k]
    return float(x), float(fx), grid, vals


def _check_curves(curves):
    curves = list(curves)
    if len(curves) < 2:
        raise InvalidParameterError("need >= 2 curves with distinct L0")
    L0s = [c.L0 for c in curves]
    if len(set(L0s)) != len(L0s):
        raise InvalidParameterError("curves must have distinct L0")
    return curves


def _fit_once(curves, search, target, s, g_tilde_range, n_scan, tol):
    prepared = _prepare(curves, target, s, g_tilde_range)

    def f(e):
        return collapse_objective(curves, e, target, s, g_tilde_range, _prepared=prepared)
    return _minimize(f, search[0], search[1], n_scan, tol)


def fit_collapse_exponent(curves, search=None, target="g", s=None, g_tilde_range=None,
                          n_boot=200, seed=0, n_scan=81, tol=1e-5) -> CollapseFit:
    """Exponent minimizing the collapse objective.

    target "g" fits s in g~ = g L0^-s (default search [0, 2]); target "p" fits
    nu in p~ = p L0^nu at fixed ``s`` (default search [0, 1]), optionally on a
    g~ sub-range. A coarse scan brackets the minimum, golden-section search
    refines it, and ``n_boot`` bootstrap resamples of the curve points give the
    standard error.
    """
    curves = _check_curves(curves)
    if target not in ("g", "p"):
        raise InvalidParameterError("target must be 'g' or 'p'")
    if target == "p" and s is None:
        raise InvalidParameterError("target 'p' needs the g-exponent s")
    if search is None:
        search = (0.0, 2.0) if target == "g" else (0.0, 1.0)
    lo, hi = map(float, search)
    if not hi > lo:
        raise InvalidParameterError("search interval must have hi > lo")

    best, obj, grid, vals = _fit_once(curves, (lo, hi), target, s, g_tilde_range, n_scan, tol)

    boots = []
    if n_boot:
        seqs = np.random.SeedSequence(seed).spawn(n_boot)
        for sq in seqs:
            rng = np.random.default_rng(sq)
            resampled = []
            for c in curves:
                idx = np.unique(rng.integers(0, c.g_values.size, c.g_values.size))
                if idx.size < 2:
                    idx = np.array([0, c.g_values.size - 1])
                resampled.append(SweepCurve(c.L0, c.g_values[idx], c.p_values[idx]))
            try:
                b, *_ = _fit_once(resampled, (lo, hi), target, s, g_tilde_range, 41, 1e-4)
            except NoOverlapError:
                continue
            boots.append(b)
    stderr = float(np.std(boots, ddof=1)) if len(boots) > 1 else float("nan")
    return CollapseFit(best, obj, stderr, target, (lo, hi), (tuple(grid), tuple(vals)))


def regime_curves(curves, s, regime):
    """Restrict each curve to the g~ range of ``regime`` (for per-regime nu fits)."""
    lo, hi = REGIME_RANGES[regime]
    out = []
    for c in curves:
        gt = scaled_g(c.g_values, c.L0, s)
        keep = (gt >= lo) & (gt <= hi)
        if keep.sum() >= 2:
            out.append(SweepCurve(c.L0, c.g_values[keep], c.p_values[keep]))
    return out
