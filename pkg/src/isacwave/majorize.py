"""Two-stage majorization of the quartic sidelobe objective.

At an expansion point x_t with beamformed grid y_t (flattened m-major,
so entry b = m * n_sc + n), the quartic ISL is bounded on the power
sphere ||x||^2 = P_T by the linear surrogate Re{g_t^H x} + const with

    g_t = 2 lambda_B (G_t - lambda_Gt I) x_t + 2 (M_t - lambda_Mt I) x_t.

G_t is the rank-two curvature 2(u u^H - n_tx^2 x_t x_t^H) with
u = Atilde Atilde^H x_t, and M_t = Atilde Mtilde_t Atilde^H where

    Mtilde_t = -2 n_cells (y_t y_t^H - Diag(|y_t|^2)).

The additive constants are never needed by the optimizer and are never
computed.  All operators act matrix-free; dense forms exist only in
test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PowerIterationError
from .rng import substream
from .transforms import beamformed

POWER_ITER_TOL = 1e-10
POWER_ITER_CAP = 500


def b_diag_entry(j: int, n_sc: int, n_sym: int) -> float:
    """Diagonal entry of the sidelobe selector B at flat index j.

    Mixed-radix decomposition of j over (n_sc, n_sym, n_sc, n_sym),
    fastest first: n, m', n', m.  The entry is n_cells - 1 when both
    (n - n') / n_sc and (m - m') / n_sym are integers, else -1.
    """
    n = j % n_sc
    m_row = (j // n_sc) % n_sym
    n_col = (j // (n_sym * n_sc)) % n_sc
    m_col = (j // (n_sym * n_sc * n_sc)) % n_sym
    if (n - n_col) % n_sc == 0 and (m_row - m_col) % n_sym == 0:
        return float(n_sym * n_sc - 1)
    return -1.0


@dataclass
class SurrogateState:
    """Everything the linearized subproblem needs at one expansion point."""

    x_t: np.ndarray          # (n_sym, n_sc, n_tx) frequency grid
    y_t: np.ndarray          # (n_cells,) beamformed grid, m-major
    steering: np.ndarray     # (n_tx,)
    lambda_b: float          # n_cells - 1
    lambda_c: float          # n_tx^2
    lambda_gt: float
    lambda_mt: float
    g_t: np.ndarray          # (n_sym, n_sc, n_tx) gradient grid


def _grid_dot(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b))


def apply_gt(state: SurrogateState, v: np.ndarray) -> np.ndarray:
    """G_t v for a frequency grid v, matrix-free."""
    u = _lift(state.y_t, state.steering, state.x_t.shape)
    term_u = u * _grid_dot(u, v)
    term_x = state.x_t * (state.lambda_c * _grid_dot(state.x_t, v))
    return 2.0 * (term_u - term_x)


def apply_mt(state: SurrogateState, v: np.ndarray) -> np.ndarray:
    """M_t v = Atilde Mtilde (Atilde^H v), matrix-free."""
    y_v = beamformed(v, state.steering).reshape(-1)
    return _lift(_mtilde_apply(state.y_t, y_v), state.steering, v.shape)


def lambda_gt(state: SurrogateState) -> float:
    return state.lambda_gt


def lambda_mt(state: SurrogateState) -> float:
    return state.lambda_mt


def _lift(y_flat: np.ndarray, a: np.ndarray, shape) -> np.ndarray:
    """Atilde y: place y[b] on the steering direction of its cell."""
    n_sym, n_sc, _ = shape
    return y_flat.reshape(n_sym, n_sc)[..., None] * a[None, None, :]


def _mtilde_apply(y_t: np.ndarray, v: np.ndarray) -> np.ndarray:
    n_cells = y_t.size
    return -2.0 * n_cells * (y_t * np.vdot(y_t, v) - (np.abs(y_t) ** 2) * v)


def _lambda_gt_exact(x_t: np.ndarray, u: np.ndarray, lambda_c: float) -> float:
    """Largest eigenvalue of 2(u u^H - lambda_c x x^H) from its 2-dim range."""
    n = x_t.size
    basis = []
    for vec in (u.reshape(-1), x_t.reshape(-1)):
        w = vec.astype(complex).copy()
        for q in basis:
            w -= q * np.vdot(q, w)
        nw = np.linalg.norm(w)
        if nw > 1e-14 * max(1.0, np.linalg.norm(vec)):
            basis.append(w / nw)
    if not basis:
        return 0.0
    q_mat = np.stack(basis, axis=1)
    uq = q_mat.conj().T @ u.reshape(-1)
    xq = q_mat.conj().T @ x_t.reshape(-1)
    small = 2.0 * (np.outer(uq, uq.conj()) - lambda_c * np.outer(xq, xq.conj()))
    top = float(np.linalg.eigvalsh(small).max())
    if len(basis) < n:
        top = max(top, 0.0)
    return top


def _lambda_mtilde_max(y_t: np.ndarray) -> float:
    """Largest eigenvalue of Mtilde via shifted power iteration.

    Mtilde is traceless, so its top eigenvalue is nonnegative.  The
    shift 2 n_cells ||y||^2 dominates the most negative eigenvalue,
    which makes the shifted operator positive semidefinite and the
    dominant eigenvalue the algebraic maximum.
    """
    n_cells = y_t.size
    energy = float(np.sum(np.abs(y_t) ** 2))
    if energy == 0.0:
        return 0.0
    shift = 2.0 * n_cells * energy
    rng = substream(0, "power_iter")
    v = rng.standard_normal(n_cells) + 1j * rng.standard_normal(n_cells)
    v /= np.linalg.norm(v)
    prev = None
    for _ in range(POWER_ITER_CAP):
        w = _mtilde_apply(y_t, v) + shift * v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        est = float(np.real(np.vdot(v, _mtilde_apply(y_t, v) + shift * v)))
        if prev is not None and abs(est - prev) <= POWER_ITER_TOL * max(abs(est), 1.0):
            return max(est - shift, 0.0)
        prev = est
    raise PowerIterationError(
        f"power iteration did not reach rel tol {POWER_ITER_TOL} in {POWER_ITER_CAP} iterations")


def build_surrogate(x_t: np.ndarray, a: np.ndarray) -> SurrogateState:
    """Assemble curvature bounds and gradient for the point x_t."""
    n_sym, n_sc, n_tx = x_t.shape
    n_cells = n_sym * n_sc
    y_t = beamformed(x_t, a).reshape(-1)
    u = _lift(y_t, a, x_t.shape)
    lambda_b = float(n_cells - 1)
    lambda_c = float(n_tx) ** 2
    lam_g = _lambda_gt_exact(x_t, u, lambda_c)
    # nonzero spectra of Atilde Mtilde Atilde^H and n_tx Mtilde agree
    lam_m = n_tx * _lambda_mtilde_max(y_t)
    gt_x = 2.0 * (u * _grid_dot(u, x_t) - x_t * (lambda_c * _grid_dot(x_t, x_t)))
    mt_x = _lift(_mtilde_apply(y_t, y_t), a, x_t.shape)
    g_t = 2.0 * lambda_b * (gt_x - lam_g * x_t) + 2.0 * (mt_x - lam_m * x_t)
    return SurrogateState(x_t=x_t.copy(), y_t=y_t, steering=a.copy(),
                          lambda_b=lambda_b, lambda_c=lambda_c,
                          lambda_gt=lam_g, lambda_mt=lam_m, g_t=g_t)


def surrogate_gradient(state: SurrogateState) -> np.ndarray:
    return state.g_t
