"""Projection-based solvers for the two convex design subproblems.

The linearized waveform update minimizes Re{m_t^H x} + (rho/2)||x||^2
over the intersection of three sets: per-cell communication half-spaces
(frequency domain), per-sample modulus caps (time domain), and the
illumination residual cap (time domain).  Completing the square turns
this into a Euclidean projection of q = -m_t/rho onto the intersection,
which is solved by consensus splitting with one exact projection per
constraint family and the unitary block DFT moving between domains.

The max-min fairness initializer maximizes the worst rotated-channel
margin under the modulus caps by bisection on the margin level, with an
alternating-projection feasibility test at each level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleError
from .slp_ci import CiSet
from .transforms import residual_quadform, to_freq, to_time

DYKSTRA_TOL = 1e-10
DYKSTRA_SWEEP_CAP = 5000
CONSENSUS_TOL = 1e-7          # times sqrt(N_tot), on primal and dual residuals
CONSENSUS_ITER_CAP = 100_000
FEASIBILITY_TOL = 1e-6
STALL_WINDOW = 100
STALL_REL_DECREASE = 1e-3
MAXMIN_SWEEP_CAP = 800
MAXMIN_STALL_WINDOW = 40
MAXMIN_BISECT_CAP = 60


@dataclass
class XUpdateProblem:
    """One linearized waveform update: data, penalty, and constraint sets.

    m_t combines the surrogate gradient with the scaled dual offset,
    m_t = g_t + F(lam - rho z).  illum_cap is the residual-form bound
    n_tx P_T - P_0; modulus_cap is the per-sample amplitude.
    """

    m_t: np.ndarray
    rho: float
    ci: CiSet
    illum_cap: float
    modulus_cap: float
    steering: np.ndarray

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ConfigError("bad_penalty", f"rho must be positive, got {self.rho}")
        if self.illum_cap < 0:
            raise ConfigError("infeasible_illumination",
                              f"illumination residual cap is negative: {self.illum_cap}")
        shape = self.ci.rotated.shape[:2] + self.ci.rotated.shape[-1:]
        self.m_t = np.asarray(self.m_t, dtype=complex).reshape(shape)


@dataclass
class SolveReport:
    """Outcome of one x-update, recomputed from the returned point."""

    iterations: int
    kkt_residual: float
    feasibility_residuals: dict
    objective: float
    status: str = "optimal"


@dataclass
class ConsensusState:
    """Constraint copies and scaled duals, reusable across warm starts."""

    u_ci: np.ndarray
    u_mod: np.ndarray
    u_ill: np.ndarray
    d_ci: np.ndarray
    d_mod: np.ndarray
    d_ill: np.ndarray
    sigma: float

    @classmethod
    def from_point(cls, x: np.ndarray, sigma: float) -> "ConsensusState":
        w = to_time(x)
        zeros = np.zeros_like(x)
        return cls(u_ci=x.copy(), u_mod=w.copy(), u_ill=w.copy(),
                   d_ci=zeros.copy(), d_mod=zeros.copy(), d_ill=zeros.copy(),
                   sigma=sigma)

    def rescale(self, sigma: float) -> None:
        # scaled duals d = y/sigma: keep the underlying multiplier y fixed
        if sigma == self.sigma:
            return
        ratio = self.sigma / sigma
        self.d_ci *= ratio
        self.d_mod *= ratio
        self.d_ill *= ratio
        self.sigma = sigma


def _halfspace_sqnorms(rotated: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(rotated) ** 2, axis=-1)


def _dykstra_halfspaces(x: np.ndarray, rotated: np.ndarray, thresholds: np.ndarray,
                        tol: float = DYKSTRA_TOL,
                        max_sweeps: int = DYKSTRA_SWEEP_CAP) -> np.ndarray:
    """Cyclic Dykstra projection onto all per-cell half-space intersections.

    x: (..., n_tx) points, rotated: (..., C, n_tx) normals (conjugated in
    the inner product), thresholds: (C,) or (..., C) right-hand sides.
    Every cell runs the same constraint cycle; cells are independent.
    """
    y = np.array(x, dtype=complex)
    n_constr = rotated.shape[-2]
    thresholds = np.broadcast_to(thresholds, rotated.shape[:-1])
    sqnorms = _halfspace_sqnorms(rotated)
    safe = np.where(sqnorms > 0.0, sqnorms, 1.0)
    corrections = np.zeros((n_constr,) + y.shape, dtype=complex)
    for _ in range(max_sweeps):
        moved = 0.0
        for c in range(n_constr):
            v = y + corrections[c]
            h = rotated[..., c, :]
            value = np.einsum("...i,...i->...", h.conj(), v).real
            deficit = np.maximum(thresholds[..., c] - value, 0.0)
            step = np.where(sqnorms[..., c] > 0.0, deficit / safe[..., c], 0.0)
            y_next = v + step[..., None] * h
            corrections[c] = v - y_next
            moved = max(moved, float(np.abs(y_next - y).max(initial=0.0)))
            y = y_next
        if moved < tol:
            break
    return y


def project_halfspaces(x: np.ndarray, rotated: np.ndarray, thresholds: np.ndarray,
                       tol: float = DYKSTRA_TOL) -> np.ndarray:
    """Project one cell's stacked vector onto its 2K half-spaces.

    x: (n_tx,), rotated: (C, n_tx), thresholds: (C,).  Dykstra cycling
    gives the exact Euclidean projection onto the intersection, unlike
    plain alternating projections.
    """
    return _dykstra_halfspaces(x[None, :], rotated[None, :, :],
                               np.asarray(thresholds, dtype=float)[None, :],
                               tol=tol)[0]


def project_modulus_caps(w: np.ndarray, cap: float) -> np.ndarray:
    """Per-scalar disk projection: entries above cap shrink radially."""
    mags = np.abs(w)
    scale = np.where(mags > cap, cap / np.where(mags > 0.0, mags, 1.0), 1.0)
    return w * scale


def project_illumination(w: np.ndarray, a: np.ndarray, cap: float) -> np.ndarray:
    """Project onto {w : sum_cells n_tx||w_cell||^2 - |a^H w_cell|^2 <= cap}.

    The quadratic form weights only the component of each time sample
    orthogonal to the steering direction, uniformly by n_tx, so the
    projection keeps the a-components and shrinks the orthogonal parts
    by the single scale factor that lands on the cap.
    """
    if cap < 0:
        raise ConfigError("infeasible_illumination", f"cap must be nonnegative, got {cap}")
    form = residual_quadform(w, a)
    if form <= cap:
        return w
    n_tx = a.size
    coeff = np.einsum("...i,i->...", w, a.conj()) / n_tx
    w_par = coeff[..., None] * a
    w_perp = w - w_par
    # form == n_tx * ||w_perp||^2 here, and form > cap >= 0
    return w_par + np.sqrt(cap / form) * w_perp


def _violations(x: np.ndarray, w: np.ndarray, prob: XUpdateProblem) -> dict:
    raw = np.einsum("mnci,mni->mnc", prob.ci.rotated.conj(), x).real
    ci_viol = float(np.maximum(prob.ci.gamma - raw, 0.0).max(initial=0.0))
    mod_viol = float(np.maximum(np.abs(w) - prob.modulus_cap, 0.0).max(initial=0.0))
    ill_viol = max(residual_quadform(w, prob.steering) - prob.illum_cap, 0.0)
    return {"ci": ci_viol, "modulus": mod_viol, "illumination": ill_viol}


def _feasibility_finisher(x: np.ndarray, prob: XUpdateProblem,
                          tol: float = FEASIBILITY_TOL) -> np.ndarray:
    """Cyclic projections until every family's violation is within tol.

    Declares the system infeasible when the worst violation stops
    shrinking (relative decrease below STALL_REL_DECREASE across
    STALL_WINDOW sweeps).
    """
    gamma = prob.ci.gamma
    window_anchor = np.inf
    for sweep in range(10 * STALL_WINDOW):
        x = _dykstra_halfspaces(x, prob.ci.rotated, gamma)
        w = to_time(x)
        w = project_illumination(w, prob.steering, prob.illum_cap)
        w = project_modulus_caps(w, prob.modulus_cap)
        x = to_freq(w)
        worst = max(_violations(x, w, prob).values())
        if worst <= tol:
            return x
        if sweep % STALL_WINDOW == STALL_WINDOW - 1:
            if worst > (1.0 - STALL_REL_DECREASE) * window_anchor:
                break
            window_anchor = worst
    raise InfeasibleError(
        f"feasibility phase stalled with max violation {worst:.3e} (tol {tol:.1e})")


def solve_x_update(prob: XUpdateProblem, warm_start=None):
    """Minimize Re{m_t^H x} + (rho/2)||x||^2 over the constraint intersection.

    Equivalent to projecting q = -m_t/rho onto the intersection.  Three
    constraint copies (half-spaces in frequency, modulus caps and the
    illumination cap in time) are driven to consensus with penalty
    sigma = rho; the consensus step is then the plain average of q and
    the three reflected copies.  warm_start may be a ConsensusState
    (updated in place, recommended inside iterative loops) or a
    frequency-domain point.  Returns (x, SolveReport).
    """
    q = -prob.m_t / prob.rho
    if isinstance(warm_start, ConsensusState):
        state = warm_start
        state.rescale(prob.rho)
    elif warm_start is not None:
        start = np.asarray(warm_start, dtype=complex).reshape(q.shape)
        state = ConsensusState.from_point(start, prob.rho)
    else:
        state = ConsensusState.from_point(q, prob.rho)

    n_tot = q.size
    stop = CONSENSUS_TOL * np.sqrt(n_tot)
    gamma = prob.ci.gamma
    status = "max_iters"
    iterations = CONSENSUS_ITER_CAP
    for it in range(CONSENSUS_ITER_CAP):
        x = 0.25 * (q + (state.u_ci - state.d_ci)
                    + to_freq(state.u_mod - state.d_mod)
                    + to_freq(state.u_ill - state.d_ill))
        w = to_time(x)
        u_ci = _dykstra_halfspaces(x + state.d_ci, prob.ci.rotated, gamma)
        u_mod = project_modulus_caps(w + state.d_mod, prob.modulus_cap)
        u_ill = project_illumination(w + state.d_ill, prob.steering, prob.illum_cap)
        primal = np.sqrt(np.sum(np.abs(x - u_ci) ** 2)
                         + np.sum(np.abs(w - u_mod) ** 2)
                         + np.sum(np.abs(w - u_ill) ** 2))
        dual = prob.rho * np.sqrt(np.sum(np.abs(u_ci - state.u_ci) ** 2)
                                  + np.sum(np.abs(u_mod - state.u_mod) ** 2)
                                  + np.sum(np.abs(u_ill - state.u_ill) ** 2))
        state.d_ci += x - u_ci
        state.d_mod += w - u_mod
        state.d_ill += w - u_ill
        state.u_ci, state.u_mod, state.u_ill = u_ci, u_mod, u_ill
        if primal < stop and dual < stop:
            status = "optimal"
            iterations = it + 1
            break

    x = _feasibility_finisher(x, prob)
    w = to_time(x)

    # fixed-point residual of one further splitting step from the result
    x_next = 0.25 * (q + (state.u_ci - state.d_ci)
                     + to_freq(state.u_mod - state.d_mod)
                     + to_freq(state.u_ill - state.d_ill))
    kkt = float(np.linalg.norm(x_next - x))
    objective = float(np.real(np.vdot(prob.m_t, x)) + 0.5 * prob.rho * np.sum(np.abs(x) ** 2))
    report = SolveReport(iterations=iterations, kkt_residual=kkt,
                         feasibility_residuals=_violations(x, w, prob),
                         objective=objective, status=status)
    return x, report


def _maxmin_feasible(x: np.ndarray, level: float, rotated: np.ndarray,
                     cap: float, tol: float = FEASIBILITY_TOL,
                     max_sweeps: int = MAXMIN_SWEEP_CAP):
    """Alternate half-space and modulus projections at one margin level.

    Returns (feasible, x) where x always satisfies the caps exactly;
    feasible means the worst margin deficit dropped below tol.
    """
    best = np.inf
    stall_anchor = np.inf
    for sweep in range(max_sweeps):
        x = _dykstra_halfspaces(x, rotated, level)
        w = project_modulus_caps(to_time(x), cap)
        x = to_freq(w)
        raw = np.einsum("mnci,mni->mnc", rotated.conj(), x).real
        deficit = float(level - raw.min())
        best = min(best, deficit)
        if deficit < tol:
            return True, x
        if sweep % MAXMIN_STALL_WINDOW == MAXMIN_STALL_WINDOW - 1:
            if best > (1.0 - STALL_REL_DECREASE) * stall_anchor:
                return False, x
            stall_anchor = best
    return False, x


def solve_maxmin_init(ci: CiSet, modulus_cap: float, cfg) -> np.ndarray:
    """Maximize the worst rotated-channel margin under the modulus caps.

    Bisection on the uniform margin level t; each level is tested by
    alternating projections between the half-space system at level t and
    the per-sample caps.  Levels count as achievable when the residual
    deficit falls below the feasibility tolerance.  The returned grid is
    the waveform from the highest achievable level, with the caps exact
    (the last operation applied is the modulus projection).
    """
    del cfg  # dimensions travel with ci; kept for signature stability
    rotated = ci.rotated
    shape = rotated.shape[:2] + rotated.shape[-1:]
    norms = np.sqrt(_halfspace_sqnorms(rotated))
    n_sc = shape[1]
    n_tx = shape[2]
    t_hi = float(norms.min()) * np.sqrt(n_sc * n_tx) * modulus_cap
    x = np.zeros(shape, dtype=complex)
    if t_hi <= 0.0:
        return x
    t_lo = 0.0
    x_best = x.copy()
    for _ in range(MAXMIN_BISECT_CAP):
        if t_hi - t_lo <= max(1e-12, 1e-4 * t_hi):
            break
        t_mid = 0.5 * (t_lo + t_hi)
        ok, x = _maxmin_feasible(x, t_mid, rotated, modulus_cap)
        if ok:
            t_lo = t_mid
            x_best = x.copy()
        else:
            t_hi = t_mid
    if t_lo > 0.0:
        # settle the winning level so the achieved margins sit on it tightly
        _, x_best = _maxmin_feasible(x_best, t_lo, rotated, modulus_cap,
                                     max_sweeps=4 * MAXMIN_SWEEP_CAP)
    return to_freq(project_modulus_caps(to_time(x_best), modulus_cap))
