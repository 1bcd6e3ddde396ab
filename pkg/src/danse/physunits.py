"""Laboratory parameters to the reduced units of the lattice model.

All frequencies are taken in one caller-chosen unit; only ratios enter.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidParameterError, ResonanceError


@dataclass(frozen=True)
class LaserAtomParams:
    gamma0: float          # natural linewidth
    omega: float           # resonant Rabi frequency
    delta: float           # laser-atom detuning
    T_over_hbar: float = 1.0e3   # hopping rate, s^-1

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise InvalidParameterError("gamma0 must be > 0")
        if self.omega < 0:
            raise InvalidParameterError("omega must be >= 0")
        if self.delta == 0:
            raise InvalidParameterError("delta must be nonzero")
        if not self.T_over_hbar > 0:
            raise InvalidParameterError("T_over_hbar must be > 0")


def se_rate(params: LaserAtomParams, approximate: bool = False) -> float:
    """Spontaneous-emission rate; ``approximate`` gives the large-detuning form."""
    g0, om, de = params.gamma0, params.omega, params.delta
    if approximate:
        return g0 * om**2 / (4.0 * de**2)
    return 0.25 * g0 * om**2 / (de**2 + 0.5 * om**2 + 0.25 * g0**2)


def potential_depth(omega: float, delta: float) -> float:
    """Lattice depth Omega^2 / (8 Delta), in units of hbar."""
    if delta == 0:
        raise ResonanceError("resonant light (delta = 0) gives no dipole potential")
    return omega**2 / (8.0 * delta)


def reduced_gamma(gamma_se: float, T_over_hbar: float) -> float:
    """SE rate in units of the hopping rate T/hbar."""
    if not T_over_hbar > 0:
        raise InvalidParameterError("T_over_hbar must be > 0")
    return gamma_se / T_over_hbar
