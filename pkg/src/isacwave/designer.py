"""Outer design loops built on the surrogate and subproblem solvers.

design_slp_waveform runs the QoS-constrained sidelobe minimizer: an MM
outer loop whose linearized subproblem is split by ADMM between the
convex constraint system (handled by solve_x_update) and the
constant-modulus set (handled by the closed-form z update).  After the
outer loop converges, a polish phase keeps the splitting running with
an escalating penalty until the phase-projected waveform passes the
final certificates, so the returned waveform is constant-modulus to
machine precision rather than to the inner tolerance.

design_radar_only is the same MM machinery with the communication and
illumination constraints removed, where the subproblem minimizer over
the constant-modulus set is a per-sample phase alignment in closed
form.  design_comm_only is the max-min fairness initializer, returned
as its own baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import DB_FLOOR, isl, normalized_isl_db_value
from .convex_sub import ConsensusState, XUpdateProblem, solve_maxmin_init, solve_x_update
from .majorize import build_surrogate
from .model import SystemConfig, validate_config
from .rng import substream
from .slp_ci import build_ci, ci_margin
from .transforms import illumination_power, steering, to_freq, to_time

OUTER_CAP = 200
INNER_CAP = 2000
POLISH_ITER_CAP = 4000
POLISH_SNAP_PERIOD = 25
POLISH_RHO_PERIOD = 120
MONOTONE_SLACK = 1e-8
CI_MARGIN_TOL = 1e-6
ILLUM_TOL_FACTOR = 1e-6
ZERO_ISL_REL = 1e-20


@dataclass
class MmAdmmState:
    """Mutable state of the MM-ADMM loop.

    lam is the dual for the coupling F^H x = z; mu is the dual for the
    modulus condition |z| = r_cap (real-valued, kept in complex storage
    so the two dual blocks share dtype and update rules).
    """

    x: np.ndarray
    z: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    rho: float
    r_cap: float
    outer_iter: int = 0
    inner_iter: int = 0
    isl_history: list = field(default_factory=list)


@dataclass
class ConvergenceTrace:
    """Per-outer-iteration record of the design run."""

    outer_iter: list = field(default_factory=list)
    isl: list = field(default_factory=list)
    normalized_isl_db: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    primal_residual: list = field(default_factory=list)
    dual_residual: list = field(default_factory=list)
    min_ci_margin: list = field(default_factory=list)
    illum_power: list = field(default_factory=list)
    status: str = "converged"
    final_isl: float = math.nan
    final_normalized_isl_db: float = math.nan
    polish_iterations: int = 0

    COLUMNS = ("outer_iter", "isl", "normalized_isl_db", "inner_iters",
               "primal_residual", "dual_residual", "min_ci_margin", "illum_power")

    def append(self, **kw) -> None:
        for name in self.COLUMNS:
            getattr(self, name).append(kw[name])

    def rows(self):
        return list(zip(*(getattr(self, name) for name in self.COLUMNS)))


def z_update(v: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Closed-form minimizer of the z block: half-sum radius, phase of v.

    z_i = (|v_i| + Re r_i)/2 * exp(j angle v_i).  angle(0) = 0, so a
    zero v_i yields the real value (Re r_i)/2.
    """
    v = np.asarray(v)
    mag = 0.5 * (np.abs(v) + np.real(r))
    return mag * np.exp(1j * np.angle(v))


def dual_update(state: MmAdmmState) -> MmAdmmState:
    """Gradient ascent on both duals at step rho; mutates and returns state."""
    w = to_time(state.x)
    state.lam = state.lam + state.rho * (w - state.z)
    state.mu = state.mu + state.rho * (np.abs(state.z) - state.r_cap).astype(complex)
    return state


def _auto_penalty(gradient_norm: float, power_budget: float) -> float:
    # scales the prox target -m/rho to waveform magnitude
    if gradient_norm <= 0.0:
        return 1.0
    return gradient_norm / math.sqrt(power_budget)


def _snap_to_cap(x: np.ndarray, cap: float) -> np.ndarray:
    w = to_time(x)
    return to_freq(cap * np.exp(1j * np.angle(w)))


def _certify(x: np.ndarray, ci, a: np.ndarray, cfg: SystemConfig) -> bool:
    margin_ok = ci_margin(x, ci) >= -CI_MARGIN_TOL
    illum_floor = cfg.min_illum_power_w - ILLUM_TOL_FACTOR * cfg.n_tx * cfg.power_budget_w
    return margin_ok and illumination_power(x, a) >= illum_floor


def _run_inner_admm(state: MmAdmmState, surrogate, ci, illum_cap: float,
                    cfg: SystemConfig, consensus: ConsensusState,
                    inner_cap: int):
    """ADMM sweeps on the linearized subproblem until both squared
    residuals fall below the configured tolerance (compared literally,
    without normalization).  Returns (iterations, primal, modulus)."""
    delta = cfg.conv_tol
    cap = state.r_cap
    rho = state.rho
    state.z = to_time(state.x)
    state.lam = np.zeros_like(state.z)
    state.mu = np.zeros_like(state.z)
    primal2 = modulus2 = math.inf
    count = 0
    for _ in range(inner_cap):
        m_t = surrogate.g_t + to_freq(state.lam - rho * state.z)
        prob = XUpdateProblem(m_t=m_t, rho=rho, ci=ci, illum_cap=illum_cap,
                              modulus_cap=cap, steering=surrogate.steering)
        state.x, _ = solve_x_update(prob, warm_start=consensus)
        w = to_time(state.x)
        state.z = z_update(w + state.lam / rho, cap - np.real(state.mu) / rho)
        dual_update(state)
        primal2 = float(np.sum(np.abs(w - state.z) ** 2))
        modulus2 = float(np.sum((np.abs(state.z) - cap) ** 2))
        count += 1
        state.inner_iter += 1
        if primal2 <= delta and modulus2 <= delta:
            break
    return count, math.sqrt(primal2), math.sqrt(modulus2)


def _polish(state: MmAdmmState, ci, a: np.ndarray, illum_cap: float,
            cfg: SystemConfig, consensus: ConsensusState):
    """Drive the time-domain samples onto the modulus sphere.

    Keeps the splitting running at the final expansion point while the
    penalty escalates, and every few sweeps tests the phase projection
    of the current point against the final certificates (recomputed by
    the ambiguity/CI/illumination code paths, not solver residuals).
    Returns (waveform, iterations, certified).
    """
    surrogate = build_surrogate(state.x, a)
    cap = state.r_cap
    candidate = _snap_to_cap(state.x, cap)
    if _certify(candidate, ci, a, cfg):
        return candidate, 0, True
    state.z = to_time(state.x)
    state.lam = np.zeros_like(state.z)
    state.mu = np.zeros_like(state.z)
    best = candidate
    for it in range(1, POLISH_ITER_CAP + 1):
        m_t = surrogate.g_t + to_freq(state.lam - state.rho * state.z)
        prob = XUpdateProblem(m_t=m_t, rho=state.rho, ci=ci, illum_cap=illum_cap,
                              modulus_cap=cap, steering=a)
        state.x, _ = solve_x_update(prob, warm_start=consensus)
        w = to_time(state.x)
        state.z = z_update(w + state.lam / state.rho, cap - np.real(state.mu) / state.rho)
        dual_update(state)
        state.inner_iter += 1
        if it % POLISH_SNAP_PERIOD == 0:
            candidate = _snap_to_cap(state.x, cap)
            best = candidate
            if _certify(candidate, ci, a, cfg):
                return candidate, it, True
        if it % POLISH_RHO_PERIOD == 0:
            state.rho *= 2.0
    return best, POLISH_ITER_CAP, False


def design_slp_waveform(cfg: SystemConfig, channels, symbols, scene_angle: float,
                        *, outer_cap: int = OUTER_CAP, inner_cap: int = INNER_CAP):
    """QoS-constrained range-Doppler sidelobe minimization.

    Initializes from the max-min fairness waveform, then alternates
    surrogate construction with ADMM solution of the linearized
    subproblem until the relative ISL change drops below conv_tol.
    Returns (waveform, ConvergenceTrace); the waveform has passed the
    constant-modulus, CI-margin, and illumination certificates unless
    the trace is flagged otherwise.
    """
    validate_config(cfg)
    a = steering(scene_angle, cfg.n_tx, cfg.tx_spacing_wavelengths)
    ci = build_ci(channels, symbols, cfg)
    cap = cfg.modulus_cap
    illum_cap = cfg.n_tx * cfg.power_budget_w - cfg.min_illum_power_w
    delta = cfg.conv_tol

    x0 = solve_maxmin_init(ci, cap, cfg)
    state = MmAdmmState(x=x0, z=to_time(x0), lam=np.zeros_like(x0), mu=np.zeros_like(x0),
                        rho=1.0, r_cap=cap)
    trace = ConvergenceTrace()
    xi = isl(state.x, a)
    state.isl_history.append(xi)
    mainlobe = illumination_power(state.x, a)
    trace.append(outer_iter=0, isl=xi,
                 normalized_isl_db=normalized_isl_db_value(xi, mainlobe),
                 inner_iters=0, primal_residual=0.0,
                 dual_residual=float(np.linalg.norm(np.abs(to_time(state.x)) - cap)),
                 min_ci_margin=ci_margin(state.x, ci),
                 illum_power=mainlobe)

    consensus = None
    trace.status = "no_progress"
    for outer in range(outer_cap):
        surrogate = build_surrogate(state.x, a)
        if outer == 0:
            state.rho = (cfg.admm_penalty if cfg.admm_penalty is not None
                         else _auto_penalty(float(np.linalg.norm(surrogate.g_t)),
                                            cfg.power_budget_w))
            consensus = ConsensusState.from_point(state.x, state.rho)
        x_prev = state.x
        inner, primal, modulus = _run_inner_admm(state, surrogate, ci, illum_cap,
                                                 cfg, consensus, inner_cap)
        xi_new = isl(state.x, a)
        rel = abs(xi_new - xi) / max(xi, np.finfo(float).tiny)
        if xi_new > xi + MONOTONE_SLACK * (1.0 + xi):
            # inner tolerance too loose to certify descent; keep the last iterate
            state.x = x_prev
            trace.status = "converged" if rel <= delta else "no_progress"
            break
        state.outer_iter = outer + 1
        state.isl_history.append(xi_new)
        mainlobe = illumination_power(state.x, a)
        trace.append(outer_iter=outer + 1, isl=xi_new,
                     normalized_isl_db=normalized_isl_db_value(xi_new, mainlobe),
                     inner_iters=inner, primal_residual=primal, dual_residual=modulus,
                     min_ci_margin=ci_margin(state.x, ci),
                     illum_power=mainlobe)
        xi = xi_new
        if rel <= delta:
            trace.status = "converged"
            break

    if consensus is None:
        consensus = ConsensusState.from_point(state.x, state.rho)
    x_final, polish_iters, certified = _polish(state, ci, a, illum_cap, cfg, consensus)
    trace.polish_iterations = polish_iters
    if not certified:
        trace.status = "no_progress"
    trace.final_isl = isl(x_final, a)
    trace.final_normalized_isl_db = normalized_isl_db_value(
        trace.final_isl, illumination_power(x_final, a))
    return x_final, trace


def design_radar_only(cfg: SystemConfig, scene_angle: float, *, seed: int = 0,
                      x0: np.ndarray | None = None, outer_cap: int = OUTER_CAP,
                      history: list | None = None) -> np.ndarray:
    """Constant-modulus sidelobe minimization without communication terms.

    Each MM step minimizes the linear surrogate exactly over the
    modulus sphere by aligning every time-domain sample's phase with
    -F^H g_t, so every iterate is constant-modulus by construction and
    the ISL sequence is non-increasing.  A list passed as history
    collects the ISL of every iterate, the initial point included.
    """
    validate_config(cfg)
    a = steering(scene_angle, cfg.n_tx, cfg.tx_spacing_wavelengths)
    cap = cfg.modulus_cap
    if x0 is None:
        rng = substream(seed, "init")
        phases = 2.0 * np.pi * rng.random((cfg.n_sym, cfg.n_sc, cfg.n_tx))
        x = to_freq(cap * np.exp(1j * phases))
    else:
        x = np.asarray(x0, dtype=complex).reshape(cfg.n_sym, cfg.n_sc, cfg.n_tx)
    xi = isl(x, a)
    if history is not None:
        history.append(xi)
    for _ in range(outer_cap):
        mainlobe = illumination_power(x, a)
        if xi <= ZERO_ISL_REL * max(mainlobe ** 2, np.finfo(float).tiny):
            break
        surrogate = build_surrogate(x, a)
        w_grad = to_time(surrogate.g_t)
        x = to_freq(cap * np.exp(1j * np.angle(-w_grad)))
        xi_new = isl(x, a)
        if history is not None:
            history.append(xi_new)
        rel = abs(xi_new - xi) / max(xi, np.finfo(float).tiny)
        xi = xi_new
        if rel <= cfg.conv_tol:
            break
    return x


def design_comm_only(cfg: SystemConfig, channels, symbols) -> np.ndarray:
    """Max-min fairness waveform under the relaxed per-sample caps."""
    validate_config(cfg)
    ci = build_ci(channels, symbols, cfg)
    return solve_maxmin_init(ci, cfg.modulus_cap, cfg)
