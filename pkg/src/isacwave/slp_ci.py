"""Constructive-interference regions for symbol-level precoding.

For PSK with half-sector angle phi = pi / order, the noise-free
received point must stay inside the symbol's decision sector with a
safety offset sigma_c sqrt(Gamma_k) along its center.  Each cell and
user contributes two half-spaces

    Re{ htilde^H x[n, m] } >= gamma_k,

where the pair of rotated channels htilde encodes the two sector
boundaries: their conjugate rows are h^H s* (sin(phi) -+ j cos(phi)).
At order 2 both rows coincide and the constraint degenerates to the
real-part condition alone, leaving the imaginary part free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SystemConfig, symbol_index
from .rng import complex_normal, substream


@dataclass(frozen=True)
class CiSet:
    """Half-space data for one (channel, symbol grid, config) instance.

    rotated: (n_sym, n_sc, 2 n_users, n_tx) vectors htilde; the margin
        of constraint k' at cell (m, n) is Re{rotated[m,n,k']^H x[m,n]}
        minus gamma[k'].  Users occupy consecutive pairs (2k, 2k+1).
    gamma: (2 n_users,) thresholds sigma_c sqrt(Gamma_k) sin(phi).
    phi: half sector angle pi / psk_order.
    """

    rotated: np.ndarray
    gamma: np.ndarray
    phi: float

    @property
    def n_constraints(self) -> int:
        return self.rotated.shape[2]


def build_ci(channels, symbols: np.ndarray, cfg: SystemConfig) -> CiSet:
    """Assemble the CI half-spaces from channels and the symbol grid."""
    phi = math.pi / cfg.psk_order
    sin_phi, cos_phi = math.sin(phi), math.cos(phi)
    n_sym, n_sc, n_users = symbols.shape
    # h[n, k, i] broadcast over symbols; conjugate rows are
    # h^H s* (sin -+ j cos), so the stored vectors carry s (sin +- j cos).
    h = channels.h[None, :, :, :]
    s = symbols[..., None]
    rotated = np.empty((n_sym, n_sc, 2 * n_users, cfg.n_tx), dtype=complex)
    rotated[:, :, 0::2, :] = h * (s * (sin_phi - 1j * cos_phi))
    rotated[:, :, 1::2, :] = h * (s * (sin_phi + 1j * cos_phi))
    qos = np.asarray(cfg.qos_snr_linear, dtype=float)
    gamma_users = cfg.sigma_c * np.sqrt(qos) * sin_phi
    gamma = np.repeat(gamma_users, 2)
    return CiSet(rotated=rotated, gamma=gamma, phi=phi)


def ci_margins(x: np.ndarray, ci: CiSet) -> np.ndarray:
    """Margins Re{htilde^H x} - gamma, shape (n_sym, n_sc, 2 n_users)."""
    inner = np.einsum("mnci,mni->mnc", ci.rotated.conj(), x)
    return inner.real - ci.gamma[None, None, :]


def ci_margin(x: np.ndarray, ci: CiSet) -> float:
    """Worst margin over all cells and constraints; feasible iff >= -1e-6."""
    return float(ci_margins(x, ci).min())


def sector_condition(received: np.ndarray, offset: float, phi: float) -> np.ndarray:
    """Direct geometric CI test on derotated points u = s* h^H x.

    True where (Re{u} - offset) tan(phi) - |Im{u}| >= 0, the sector
    condition the rotated half-space pair is equivalent to.
    """
    u = np.asarray(received)
    return (u.real - offset) * math.tan(phi) - np.abs(u.imag) >= 0.0


def ser_simulate(x: np.ndarray, channels, symbols: np.ndarray, cfg: SystemConfig,
                 trials: int, seed: int) -> np.ndarray:
    """Monte Carlo symbol error rate per user under the precoded waveform.

    Each trial adds circularly symmetric complex normal noise with
    variance comm_noise_w to every received cell y[m, n, k] = h^H x and
    decides by nearest PSK sector.  Noise draws come from the ``trial``
    stream in one fixed-shape block, so results are seed-reproducible.
    """
    n_sym, n_sc, n_users = symbols.shape
    rx = np.einsum("nki,mni->mnk", channels.h.conj(), x)
    rng = substream(seed, "trial")
    noise = complex_normal(rng, (trials, n_sym, n_sc, n_users), var=cfg.comm_noise_w)
    decided = symbol_index(rx[None, ...] + noise, cfg.psk_order)
    truth = symbol_index(symbols, cfg.psk_order)[None, ...]
    errors = decided != truth
    return errors.mean(axis=(0, 1, 2))
