"""Array-domain primitives: steering, OFDM transforms, and power grids.

The per-symbol DFT matrix F is unitary with forward entries
exp(-2j pi p n / n_sc) / sqrt(n_sc); the block transform applied to a
full frame is I_(n_sym) kron F kron I_(n_tx).  ``to_time`` applies its
conjugate transpose, so time samples are the positively rotated sums
x_tilde[p, m] = sum_n x[n, m] exp(+2j pi p n / n_sc) / sqrt(n_sc).
"""

from __future__ import annotations

import numpy as np


def steering(theta_rad: float, n_elements: int, spacing_wavelengths: float) -> np.ndarray:
    """Uniform linear array response, entry i = exp(2j pi i d sin(theta))."""
    i = np.arange(n_elements)
    return np.exp(2j * np.pi * i * spacing_wavelengths * np.sin(theta_rad))


def to_time(x: np.ndarray) -> np.ndarray:
    """Frequency grid (n_sym, n_sc, n_tx) to time grid of the same shape."""
    return np.fft.ifft(x, axis=1, norm="ortho")


def to_freq(w: np.ndarray) -> np.ndarray:
    """Inverse of to_time."""
    return np.fft.fft(w, axis=1, norm="ortho")


def beamformed(grid: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Per-cell inner products a^H x as an (n_sym, n_sc) array."""
    return grid @ a.conj()


def power_grid(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Beamformed power p[n, m] = |a^H x[n, m]|^2, shape (n_sc, n_sym)."""
    return (np.abs(beamformed(x, a)) ** 2).T


def illumination_power(x: np.ndarray, a: np.ndarray) -> float:
    """Total beamformed power sum_(p,m) |a^H x_tilde[p, m]|^2 at the look angle.

    Evaluated in the time domain, where the illumination constraint is
    defined; by unitarity of the symbol transform it equals the sum of
    the frequency-domain power grid.
    """
    w = to_time(x)
    return float(np.sum(np.abs(beamformed(w, a)) ** 2))


def residual_quadform(w: np.ndarray, a: np.ndarray) -> float:
    """Frame power not radiated along ``a``: sum of n_tx |w|^2 - |a^H w|^2 per cell.

    This is the quadratic form of the never-materialized blockwise
    operator w -> n_tx w - a (a^H w); the illumination identity reads
    illumination = n_tx ||x||^2 - residual_quadform(to_time(x)).
    """
    n_tx = a.shape[0]
    total = n_tx * np.sum(np.abs(w) ** 2) - np.sum(np.abs(beamformed(w, a)) ** 2)
    return float(total)


def apply_residual_block(w: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Apply the per-cell operator n_tx I - a a^H to every cell of ``w``."""
    n_tx = a.shape[0]
    return n_tx * w - beamformed(w, a)[..., None] * a


def zadoff_chu(n: int, root: int = 1) -> np.ndarray:
    """Unit-modulus sequence with unit-modulus unitary DFT.

    Even lengths use exp(-j pi r k^2 / n), odd lengths
    exp(-j pi r k (k + 1) / n); the root must be coprime with n.
    """
    k = np.arange(n)
    if n % 2 == 0:
        phase = -np.pi * root * k * k / n
    else:
        phase = -np.pi * root * k * (k + 1) / n
    return np.exp(1j * phase)


def beamformed_cm_waveform(n_sym: int, n_sc: int, a: np.ndarray, amplitude: float) -> np.ndarray:
    """Frequency grid that is constant-modulus in time with a flat power grid.

    Each symbol carries a Zadoff-Chu sequence across subcarriers on the
    normalized steering direction a / sqrt(n_tx); every time-domain
    entry then has magnitude ``amplitude`` and |a^H x[n, m]|^2 is the
    same for all cells.
    """
    n_tx = a.shape[0]
    seq = zadoff_chu(n_sc)
    cell = amplitude * np.sqrt(n_tx) * seq[None, :, None] * (a / np.sqrt(n_tx))[None, None, :]
    return np.broadcast_to(cell, (n_sym, n_sc, n_tx)).copy()
