"""Discrete periodic ambiguity surface and integrated sidelobe level.

For a beamformed power grid p[n, m] the surface is the unnormalized
2-D transform

    chi[l, nu] = sum_(n,m) p[n, m] exp(-2j pi l n / n_sc)
                             exp(+2j pi nu m / n_sym),

a forward DFT along range and an inverse one along Doppler, so
chi[0, 0] equals the total illuminated power and is real.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateMainlobeError
from .transforms import power_grid

DB_FLOOR = -300.0


def ambiguity_surface(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Complex surface chi of shape (n_sc, n_sym) for waveform ``x``."""
    p = power_grid(x, a)
    return surface_from_power(p)


def surface_from_power(p: np.ndarray) -> np.ndarray:
    n_sym = p.shape[1]
    return np.fft.ifft(np.fft.fft(p, axis=0), axis=1) * n_sym


def isl_from_power(p: np.ndarray) -> float:
    """Integrated sidelobe level via the Parseval closed form.

    sum |chi|^2 - chi[0,0]^2 collapses to
    n_cells * sum (p - mean(p))^2, which is used here because it is
    exact and free of the cancellation the raw difference suffers for
    near-flat grids.
    """
    n_cells = p.size
    centered = p - p.mean()
    return float(n_cells * np.sum(centered * centered))


def isl(x: np.ndarray, a: np.ndarray) -> float:
    """Integrated sidelobe level of the beamformed waveform."""
    return isl_from_power(power_grid(x, a))


def normalized_isl_db(x: np.ndarray, a: np.ndarray) -> float:
    """ISL relative to mainlobe power, 10 log10(isl / chi[0,0]^2).

    Returns the floor value -300 dB for a perfectly flat grid and
    raises DegenerateMainlobeError when chi[0, 0] is zero.
    """
    p = power_grid(x, a)
    mainlobe = float(p.sum())
    if mainlobe == 0.0:
        raise DegenerateMainlobeError("chi[0, 0] is zero; normalized ISL undefined")
    ratio = isl_from_power(p) / mainlobe ** 2
    if ratio <= 10.0 ** (DB_FLOOR / 10.0):
        return DB_FLOOR
    return float(10.0 * np.log10(ratio))


def zero_slices(chi: np.ndarray):
    """Zero-Doppler and zero-delay cuts in magnitude dB relative to the mainlobe.

    Returns (delay_cut, doppler_cut): |chi[l, 0]| and |chi[0, nu]| as
    20 log10 magnitude ratios, floored at -300 dB.
    """
    mainlobe = np.abs(chi[0, 0])
    if mainlobe == 0.0:
        raise DegenerateMainlobeError("chi[0, 0] is zero; slices undefined")
    floor_ratio = 10.0 ** (DB_FLOOR / 20.0)
    def cut(v):
        r = np.abs(v) / mainlobe
        return np.where(r <= floor_ratio, DB_FLOOR, 20.0 * np.log10(np.maximum(r, floor_ratio)))
    return cut(chi[:, 0]), cut(chi[0, :])


def normalized_isl_db_value(isl_value: float, mainlobe_power: float) -> float:
    """Same normalization as normalized_isl_db for precomputed pieces."""
    if mainlobe_power == 0.0:
        raise DegenerateMainlobeError("mainlobe power is zero; normalized ISL undefined")
    ratio = isl_value / mainlobe_power ** 2
    if ratio <= 10.0 ** (DB_FLOOR / 10.0):
        return DB_FLOOR
    return float(10.0 * np.log10(ratio))
