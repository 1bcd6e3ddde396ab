"""Lattice, disorder, initial condition and equation of motion.

Sites carry symmetric integer labels ``n = -(L-1)/2 ... (L-1)/2``; arrays are
stored in that order, so array index ``i`` is site ``i - (L-1)//2``.
Energies are in units of the hopping T and times in units of hbar/T.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import InvalidParameterError

INTEGRATORS = ("split6", "split4", "rk4")
ABSORBER_SHAPES = ("quadratic",)


@dataclass(frozen=True)
class AbsorberSpec:
    n_abs: int = 10
    amplitude: float = 1.0
    shape: str = "quadratic"

    def __post_init__(self):
        if int(self.n_abs) != self.n_abs or self.n_abs < 1:
            raise InvalidParameterError(f"n_abs must be a positive integer, got {self.n_abs!r}")
        if not self.amplitude > 0:
            raise InvalidParameterError(f"absorber amplitude must be > 0, got {self.amplitude!r}")
        if self.shape not in ABSORBER_SHAPES:
            raise InvalidParameterError(f"unknown absorber shape {self.shape!r}")


@dataclass(frozen=True)
class SimulationConfig:
    """Physical and numerical parameters of one run.

    ``absorber=None`` switches the absorbing edges off (hard walls only).
    ``t_min`` is the first nonzero time of the logarithmic sampling grid.
    """

    L: int = 101
    L0: int = 21
    W: float = 4.0
    g: float = 0.0
    gamma: float = 0.0
    t_max: float = 1.0e4
    dt_max: float = 0.05
    integrator: str = "split6"
    absorber: AbsorberSpec | None = field(default_factory=AbsorberSpec)
    seed: int = 0
    snapshot_times: tuple = ()
    samples_per_decade: int = 60
    t_min: float = 0.1

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1 or self.L % 2 == 0:
            raise InvalidParameterError(f"L must be odd and positive, got {self.L!r}")
        if int(self.L0) != self.L0 or self.L0 < 1 or self.L0 % 2 == 0:
            raise InvalidParameterError(f"L0 must be odd, got {self.L0!r}")
        if self.L0 > self.L:
            raise InvalidParameterError(f"L0={self.L0} exceeds L={self.L}")
        if not self.W >= 0:
            raise InvalidParameterError(f"W must be >= 0, got {self.W!r}")
        if not self.g >= 0:
            raise InvalidParameterError(f"g must be >= 0, got {self.g!r}")
        if not self.gamma >= 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma!r}")
        if not (self.t_max > 0 and np.isfinite(self.t_max)):
            raise InvalidParameterError(f"t_max must be positive and finite, got {self.t_max!r}")
        if not np.isfinite(self.gamma * self.t_max):
            raise InvalidParameterError("gamma * t_max must be finite")
        if not self.dt_max > 0:
            raise InvalidParameterError(f"dt_max must be > 0, got {self.dt_max!r}")
        if self.integrator not in INTEGRATORS:
            raise InvalidParameterError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.absorber is not None and 2 * self.absorber.n_abs >= self.L:
            raise InvalidParameterError(f"2*n_abs={2 * self.absorber.n_abs} must be < L={self.L}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidParameterError("seed must be a 64-bit unsigned integer")
        snaps = tuple(float(t) for t in self.snapshot_times)
        if list(snaps) != sorted(snaps) or any(t < 0 or t > self.t_max for t in snaps):
            raise InvalidParameterError("snapshot_times must be sorted and within [0, t_max]")
        object.__setattr__(self, "snapshot_times", snaps)
        if int(self.samples_per_decade) < 1:
            raise InvalidParameterError("samples_per_decade must be >= 1")
        if not 0 < self.t_min <= self.t_max:
            raise InvalidParameterError("t_min must lie in (0, t_max]")

    def replace(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class DisorderRealization:
    v: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.v, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)


@dataclass
class LatticeState:
    c: np.ndarray
    t: float = 0.0

    @property
    def density(self) -> np.ndarray:
        return self.c.real**2 + self.c.imag**2

    @property
    def norm(self) -> float:
        return float(self.density.sum())

    def copy(self) -> "LatticeState":
        return LatticeState(self.c.copy(), self.t)


def site_indices(L: int) -> np.ndarray:
    if L < 1 or L % 2 == 0:
        raise InvalidParameterError(f"L must be odd and positive, got {L!r}")
    h = (L - 1) // 2
    return np.arange(-h, h + 1)


def sample_disorder(W: float, L: int, stream: np.random.Generator) -> DisorderRealization:
    """Draw on-site energies i.i.d. uniform on [-W/2, W/2]."""
    if not W >= 0:
        raise InvalidParameterError(f"W must be >= 0, got {W!r}")
    if L < 1:
        raise InvalidParameterError(f"L must be positive, got {L!r}")
    if W == 0:
        return DisorderRealization(np.zeros(L))
    return DisorderRealization(stream.uniform(-0.5 * W, 0.5 * W, L))


def initial_state(L0: int, L: int, stream: np.random.Generator) -> LatticeState:
    """Square packet of width L0 with i.i.d. uniform random phases, unit norm."""
    if L0 < 1 or L0 % 2 == 0:
        raise InvalidParameterError(f"L0 must be odd, got {L0!r}")
    if L0 > L:
        raise InvalidParameterError(f"L0={L0} exceeds L={L}")
    theta = 2.0 * np.pi * stream.random(L0)
    c = np.zeros(L, dtype=complex)
    lo = (L - L0) // 2
    c[lo:lo + L0] = np.exp(1j * theta) / np.sqrt(L0)
    return LatticeState(c, 0.0)


def delta_state(L: int, site: int = 0) -> LatticeState:
    """Unit amplitude on a single site (default the centre)."""
    n = site_indices(L)
    c = np.zeros(L, dtype=complex)
    c[n == site] = 1.0
    if not c.any():
        raise InvalidParameterError(f"site {site} outside the lattice")
    return LatticeState(c, 0.0)


def absorber_profile(spec: AbsorberSpec | None, L: int) -> np.ndarray:
    """Imaginary-potential strengths a_n >= 0: a quadratic ramp on the last
    ``n_abs`` sites of each edge reaching ``amplitude`` at the outermost site."""
    if spec is None:
        return np.zeros(L)
    if 2 * spec.n_abs >= L:
        raise InvalidParameterError(f"2*n_abs={2 * spec.n_abs} must be < L={L}")
    n = np.abs(site_indices(L))
    edge_start = (L - 1) // 2 - spec.n_abs
    depth = np.clip(n - edge_start, 0, None) / spec.n_abs
    return spec.amplitude * depth**2


def _as_vectors(state, disorder, a):
    c = state.c if isinstance(state, LatticeState) else np.asarray(state, dtype=complex)
    v = disorder.v if isinstance(disorder, DisorderRealization) else np.asarray(disorder, dtype=float)
    a = np.asarray(a, dtype=float)
    if not (c.shape == v.shape == a.shape) or c.ndim != 1:
        raise InvalidParameterError(
            f"length mismatch: c {c.shape}, v {v.shape}, a {a.shape}")
    return c, v, a


def rhs(state, disorder, g: float, a) -> np.ndarray:
    """Time derivative dc/dt of the lattice equation with absorbing term.

    ``state`` may be a LatticeState or a complex vector, ``disorder`` a
    DisorderRealization or real vector. The chain has hard walls at both ends.
    """
    c, v, a = _as_vectors(state, disorder, a)
    kr, ki = kernels.rhs(np.ascontiguousarray(c.real), np.ascontiguousarray(c.imag),
                         np.ascontiguousarray(v), np.ascontiguousarray(a), float(g))
    return kr + 1j * ki


def energy(state, disorder, g: float) -> float:
    """H = sum v|c|^2 - sum (c_n* c_{n+1} + c.c.) + (g/2) sum |c|^4."""
    c = state.c if isinstance(state, LatticeState) else np.asarray(state, dtype=complex)
    v = disorder.v if isinstance(disorder, DisorderRealization) else np.asarray(disorder, dtype=float)
    rho = c.real**2 + c.imag**2
    hop = 2.0 * np.real(np.vdot(c[:-1], c[1:]))
    return float(np.dot(v, rho) - hop + 0.5 * g * np.dot(rho, rho))
