"""System model: configuration, targets, channels, and symbol grids.

Array layout convention used across the package
-----------------------------------------------
A frequency-domain waveform is a complex array of shape
``(n_sym, n_sc, n_tx)``: symbol index ``m`` first, subcarrier ``n``
second, antenna ``i`` last.  Raveling such an array in C order yields
the stacked vector (antenna fastest, then subcarrier, then symbol) that
all flattened-operator formulas in this package assume.  Time-domain
waveforms use the same shape with axis 1 indexing the sample ``p``
inside each symbol block.  Per-cell grids (power, echo, range-Doppler
maps) are ``(n_sc, n_sym)`` arrays indexed ``[n, m]`` or ``[l, nu]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .rng import complex_normal, substream

SPEED_OF_LIGHT = 299_792_458.0  # m/s


@dataclass(frozen=True)
class SystemConfig:
    """Static description of the transmitter, users, and solver knobs.

    Powers are watts, frequencies hertz, angles radians, and the QoS
    targets are linear SNR ratios.  dB and degree conversions happen
    only at file and CLI boundaries.
    """

    n_tx: int = 6                      # transmit antennas
    n_rx: int = 6                      # receive antennas
    n_sc: int = 32                     # subcarriers per symbol
    n_sym: int = 16                    # OFDM symbols per frame
    n_users: int = 2                   # single-antenna downlink users
    carrier_hz: float = 24e9
    subcarrier_spacing_hz: float = 120e3
    cp_fraction: float = 0.25          # cyclic prefix as fraction of symbol
    tx_spacing_wavelengths: float = 0.5
    rx_spacing_wavelengths: float = 0.5
    power_budget_w: float = 10.0       # frame transmit power P_T
    min_illum_power_w: float = 8.0     # target illumination floor P_0
    qos_snr_linear: tuple = (10 ** 0.6, 10 ** 0.6)  # per-user SNR floors
    comm_noise_w: float = 1e-10        # downlink noise power (variance)
    radar_noise_w: float = 1e-10       # sensing receiver noise power
    psk_order: int = 4                 # constellation size, power of two
    conv_tol: float = 1e-4             # outer/inner stopping tolerance
    admm_penalty: float | None = None  # rho; None picks a scale-based value

    @property
    def n_tot(self) -> int:
        return self.n_sym * self.n_sc * self.n_tx

    @property
    def n_cells(self) -> int:
        return self.n_sym * self.n_sc

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def symbol_s(self) -> float:
        """Core OFDM symbol duration 1 / subcarrier spacing."""
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def cp_s(self) -> float:
        return self.cp_fraction * self.symbol_s

    @property
    def full_symbol_s(self) -> float:
        """Symbol duration including the cyclic prefix."""
        return self.symbol_s + self.cp_s

    @property
    def modulus_cap(self) -> float:
        """Per-sample amplitude sqrt(P_T / N_tot) of a constant-modulus frame."""
        return math.sqrt(self.power_budget_w / self.n_tot)

    @property
    def sigma_c(self) -> float:
        return math.sqrt(self.comm_noise_w)

    @property
    def sigma_r(self) -> float:
        return math.sqrt(self.radar_noise_w)

    def with_qos_db(self, gamma_db) -> "SystemConfig":
        """Copy of this config with QoS floors given in dB."""
        levels = np.atleast_1d(np.asarray(gamma_db, dtype=float))
        if levels.size == 1:
            levels = np.repeat(levels, self.n_users)
        return replace(self, qos_snr_linear=tuple(10 ** (levels / 10.0)))


def validate_config(cfg: SystemConfig) -> None:
    """Check every config invariant; raise ConfigError naming the first violation."""
    counts = {
        "n_tx": cfg.n_tx, "n_rx": cfg.n_rx, "n_sc": cfg.n_sc,
        "n_sym": cfg.n_sym, "n_users": cfg.n_users,
    }
    for name, value in counts.items():
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise ConfigError("bad_dimension", f"{name} must be a positive integer, got {value!r}")
    order = cfg.psk_order
    if not isinstance(order, (int, np.integer)) or order < 2 or (order & (order - 1)) != 0:
        raise ConfigError("bad_constellation", f"psk_order must be a power of two >= 2, got {order!r}")
    for name in ("carrier_hz", "subcarrier_spacing_hz", "power_budget_w"):
        if not getattr(cfg, name) > 0:
            raise ConfigError("bad_parameter", f"{name} must be positive")
    for name in ("cp_fraction", "min_illum_power_w", "comm_noise_w", "radar_noise_w",
                 "tx_spacing_wavelengths", "rx_spacing_wavelengths"):
        if getattr(cfg, name) < 0:
            raise ConfigError("bad_parameter", f"{name} must be nonnegative")
    if cfg.min_illum_power_w > cfg.n_tx * cfg.power_budget_w:
        raise ConfigError(
            "infeasible_illumination",
            f"min_illum_power_w={cfg.min_illum_power_w} exceeds the ceiling "
            f"n_tx * power_budget_w = {cfg.n_tx * cfg.power_budget_w}",
        )
    qos = np.asarray(cfg.qos_snr_linear, dtype=float)
    if qos.ndim != 1 or qos.size != cfg.n_users:
        raise ConfigError("bad_qos", f"qos_snr_linear must list {cfg.n_users} per-user values")
    if np.any(qos < 0) or not np.all(np.isfinite(qos)):
        raise ConfigError("bad_qos", "qos_snr_linear entries must be finite and nonnegative")
    if not cfg.conv_tol > 0:
        raise ConfigError("bad_tolerance", "conv_tol must be positive")
    if cfg.admm_penalty is not None and not cfg.admm_penalty > 0:
        raise ConfigError("bad_penalty", "admm_penalty must be positive when given")


@dataclass(frozen=True)
class Target:
    """One point scatterer on the range-Doppler grid.

    ``range_bin`` fixes the delay used for the echo phase ramp while
    ``range_m`` enters only the two-way amplitude, so scenes may place
    grid-aligned targets at physically round ranges.
    """

    azimuth_rad: float
    range_bin: int
    doppler_bin: int
    rcs_dbsm: float
    range_m: float


@dataclass(frozen=True)
class TargetScene:
    targets: tuple = ()

    @property
    def azimuth_rad(self) -> float:
        return self.targets[0].azimuth_rad


def make_scene(cfg: SystemConfig, targets) -> TargetScene:
    """Validate targets against the grid and CP budget and bundle them.

    All targets must share one azimuth (a single beamformed look
    direction); each range bin must keep the round-trip delay inside
    the cyclic prefix.
    """
    entries = tuple(targets)
    if not entries:
        raise ConfigError("bad_scene", "scene needs at least one target")
    azimuths = {t.azimuth_rad for t in entries}
    if len(azimuths) > 1:
        raise ConfigError("bad_scene", "all targets must share one azimuth")
    max_bin = cfg.cp_fraction * cfg.n_sc
    for t in entries:
        if not 0 <= t.range_bin < cfg.n_sc:
            raise ConfigError("bad_scene", f"range_bin {t.range_bin} outside [0, {cfg.n_sc})")
        if not 0 <= t.doppler_bin < cfg.n_sym:
            raise ConfigError("bad_scene", f"doppler_bin {t.doppler_bin} outside [0, {cfg.n_sym})")
        # tau_0 = l_0 / (n_sc * df) must stay below cp_fraction / df
        if t.range_bin >= max_bin:
            raise ConfigError(
                "bad_scene",
                f"range_bin {t.range_bin} implies a delay at or beyond the cyclic prefix "
                f"(limit {max_bin:g} bins)",
            )
        if t.range_m < 0:
            raise ConfigError("bad_scene", "range_m must be nonnegative")
    return TargetScene(targets=entries)


def target_gain(target: Target, cfg: SystemConfig) -> complex:
    """Two-way complex gain of one target.

    Magnitude follows the radar range equation
    sqrt(rcs * wavelength^2 / ((4 pi)^3 R^4)); the phase is the carrier
    rotation -2 pi f_c tau_0 over the grid-aligned delay
    tau_0 = range_bin / (n_sc * subcarrier_spacing).
    """
    if target.range_m == 0:
        raise ConfigError("zero_range", "target range must be positive for a finite gain")
    rcs_m2 = 10.0 ** (target.rcs_dbsm / 10.0)
    mag = math.sqrt(rcs_m2 * cfg.wavelength_m ** 2 / ((4.0 * math.pi) ** 3 * target.range_m ** 4))
    tau0 = target.range_bin / (cfg.n_sc * cfg.subcarrier_spacing_hz)
    phase = -2.0 * math.pi * cfg.carrier_hz * tau0
    return mag * complex(math.cos(phase), math.sin(phase))


@dataclass(frozen=True)
class ChannelSet:
    """Per-subcarrier downlink channels with their generation metadata.

    ``h`` has shape (n_sc, n_users, n_tx): ``h[n, k]`` is the frequency
    response of user k on subcarrier n.  The same response applies to
    every OFDM symbol in the frame (block-static fading).
    """

    h: np.ndarray
    user_distance_m: np.ndarray
    pathloss_ref_db: float = -30.0
    exponent: float = 2.5

    @property
    def n_users(self) -> int:
        return self.h.shape[1]


def pathloss(distance_m, ref_db: float = -30.0, exponent: float = 2.5):
    """Linear power pathloss ref * (d / 1 m)^-exponent."""
    return 10.0 ** (ref_db / 10.0) * np.asarray(distance_m, dtype=float) ** (-exponent)


def generate_channels(cfg: SystemConfig, seed: int, *, n_taps: int = 8,
                      exponent: float = 2.5, pathloss_ref_db: float = -30.0) -> ChannelSet:
    """Draw a multipath channel set from the ``channel`` stream.

    Per user: a distance uniform in [30, 100] m, then ``n_taps`` i.i.d.
    complex normal tap vectors with unit total average power per
    antenna coefficient.  The frequency response is the tap DFT scaled
    by the root pathloss.  Draw order (distances first, then the full
    tap block) is fixed, so equal seeds give bitwise-equal channels.
    """
    rng = substream(seed, "channel")
    dist = rng.uniform(30.0, 100.0, size=cfg.n_users)
    taps = complex_normal(rng, (n_taps, cfg.n_users, cfg.n_tx), var=1.0 / n_taps)
    # dft_phase[n, l] = exp(-2j pi n l / n_sc)
    grid_n = np.arange(cfg.n_sc)[:, None] * np.arange(n_taps)[None, :]
    dft_phase = np.exp(-2j * np.pi * grid_n / cfg.n_sc)
    h = np.einsum("nl,lki->nki", dft_phase, taps)
    amp = np.sqrt(pathloss(dist, pathloss_ref_db, exponent))
    h = h * amp[None, :, None]
    return ChannelSet(h=h, user_distance_m=dist,
                      pathloss_ref_db=pathloss_ref_db, exponent=exponent)


def psk_constellation(order: int) -> np.ndarray:
    """PSK points exp(j pi (2i - 1) / order), unit modulus to machine precision.

    A single renormalization keeps every magnitude within one ulp of 1;
    exact float equality is unattainable for some orders because the
    nearest representable pair straddles the unit circle.
    """
    i = np.arange(1, order + 1)
    pts = np.exp(1j * np.pi * (2 * i - 1) / order)
    return pts / np.abs(pts)


def random_symbols(cfg: SystemConfig, seed: int) -> np.ndarray:
    """Uniform PSK symbol grid of shape (n_sym, n_sc, n_users)."""
    table = psk_constellation(cfg.psk_order)
    rng = substream(seed, "symbols")
    idx = rng.integers(0, cfg.psk_order, size=(cfg.n_sym, cfg.n_sc, cfg.n_users))
    return table[idx]


def symbol_index(values: np.ndarray, order: int) -> np.ndarray:
    """Map PSK values (or noisy observations) to decision-sector indices.

    Sector i (0-based) spans phases [2 pi i / order, 2 pi (i+1) / order),
    which puts each constellation point at its sector center.
    """
    ang = np.mod(np.angle(values), 2.0 * np.pi)
    idx = np.floor(ang * order / (2.0 * np.pi)).astype(np.int64)
    return np.clip(idx, 0, order - 1)
