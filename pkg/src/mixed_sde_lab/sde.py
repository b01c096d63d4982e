"""Euler schemes for the mixed SDE and its smoothed Itô approximation.

Both drivers use left-point increments:

    X_{k+1} = X_k + a(X_k) dt + b(X_k) ΔW_k + c(X_k) ΔB_k            (mixed)
    X_{k+1} = X_k + (a(X_k) + c(X_k) Zdot_k) dt + b(X_k) ΔW_k          (smoothed)

The array-level functions accept leading batch axes so Monte Carlo sweeps
step all paths at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError, SolverError
from .models import CoefficientSet
from .paths import (
    GridPath,
    hurst_value,
    sample_fbm_paths,
    sample_wiener_paths,
    smoothed_driver_array,
)
from ._kernels import holder_seminorm_array
from .young import BoundReport, young_constant


def _check_finite(x, k):
    if not np.all(np.isfinite(x)):
        raise SolverError(f"non-finite state after step {k}", step=k)


def _initial(coeffs, x0, batch_shape):
    x0 = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    if x0.shape[-1] != coeffs.d:
        raise ShapeError(f"initial value has dimension {x0.shape[-1]}, model needs {coeffs.d}")
    return np.broadcast_to(x0, batch_shape + (coeffs.d,)).copy()


def euler_mixed(coeffs: CoefficientSet, x0, dW: np.ndarray, dB: np.ndarray, dt: float) -> np.ndarray:
    """Euler scheme from increments dW (..., N, m) and dB (..., N, l); returns (..., N+1, d)."""
    if dW.shape[-1] != coeffs.m or dB.shape[-1] != coeffs.l or dW.shape[:-1] != dB.shape[:-1]:
        raise ShapeError(f"driver increments {dW.shape}, {dB.shape} do not fit m={coeffs.m}, l={coeffs.l}")
    N = dW.shape[-2]
    x = _initial(coeffs, x0, dW.shape[:-2])
    out = np.empty(dW.shape[:-2] + (N + 1, coeffs.d))
    out[..., 0, :] = x
    for k in range(N):
        x = (x + coeffs.a(x) * dt
             + np.einsum("...ij,...j->...i", coeffs.b(x), dW[..., k, :])
             + np.einsum("...ij,...j->...i", coeffs.c(x), dB[..., k, :]))
        _check_finite(x, k + 1)
        out[..., k + 1, :] = x
    return out


def euler_smoothed(coeffs: CoefficientSet, x0, dW: np.ndarray, zdot: np.ndarray, dt: float) -> np.ndarray:
    """Euler scheme with drift a + c·Zdot; zdot (..., N+1, l) is read at left nodes."""
    if dW.shape[-1] != coeffs.m or zdot.shape[-1] != coeffs.l or zdot.shape[-2] != dW.shape[-2] + 1:
        raise ShapeError(f"driver shapes {dW.shape}, {zdot.shape} do not fit m={coeffs.m}, l={coeffs.l}")
    N = dW.shape[-2]
    x = _initial(coeffs, x0, dW.shape[:-2])
    out = np.empty(dW.shape[:-2] + (N + 1, coeffs.d))
    out[..., 0, :] = x
    for k in range(N):
        drift = coeffs.a(x) + np.einsum("...ij,...j->...i", coeffs.c(x), zdot[..., k, :])
        x = x + drift * dt + np.einsum("...ij,...j->...i", coeffs.b(x), dW[..., k, :])
        _check_finite(x, k + 1)
        out[..., k + 1, :] = x
    return out


def _drivers(W: GridPath, other: GridPath, m, l):
    if not W.same_grid(other):
        raise ShapeError("driver paths must share the grid")
    if W.d != m or other.d != l:
        raise ShapeError(f"drivers have ({W.d}, {other.d}) components, model needs (m={m}, l={l})")


def solve_mixed(coeffs: CoefficientSet, X0, W: GridPath, B: GridPath) -> GridPath:
    """Left-point Euler solution of the mixed SDE driven by W (Itô) and B (Young)."""
    _drivers(W, B, coeffs.m, coeffs.l)
    vals = euler_mixed(coeffs, X0, W.increments(), B.increments(), W.dt)
    return GridPath(W.t0, W.dt, vals)


def solve_smoothed(coeffs: CoefficientSet, X0, W: GridPath, Zdot: GridPath) -> GridPath:
    """Euler solution of the Itô SDE with drift a(X) + c(X)·Zdot and diffusion b(X)."""
    _drivers(W, Zdot, coeffs.m, coeffs.l)
    vals = euler_smoothed(coeffs, X0, W.increments(), Zdot.values, W.dt)
    return GridPath(W.t0, W.dt, vals)


# ---------------------------------------------------------------------------
# pathwise bound
# ---------------------------------------------------------------------------

def ito_integral_paths(coeffs: CoefficientSet, Y: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Running integrals ∫_0^· b_ij(Y) dW^j for every (i, j); shape (..., N+1, d, m)."""
    bY = coeffs.b(Y[..., :-1, :])
    dW = np.diff(W, axis=-2)
    incr = bY * dW[..., None, :]
    zero = np.zeros(incr.shape[:-3] + (1,) + incr.shape[-2:])
    return np.concatenate([zero, np.cumsum(incr, axis=-3)], axis=-3)


def j_statistic_array(coeffs: CoefficientSet, Y: np.ndarray, W: np.ndarray, dt: float, theta: float) -> np.ndarray:
    """Σ_ij ‖∫ b_ij(Y) dW^j‖_θ over the whole grid; Y (..., N+1, d), W (..., N+1, m)."""
    I = ito_integral_paths(coeffs, Y, W)
    batch = I.shape[:-3]
    n1 = I.shape[-3]
    flat = I.reshape((-1, n1, coeffs.d * coeffs.m))
    total = np.zeros(flat.shape[0])
    for col in range(flat.shape[-1]):
        total += holder_seminorm_array(flat[:, :, col:col + 1], dt, theta)
    return total.reshape(batch) if batch else float(total[0])


def lemma_rhs(coeffs: CoefficientSet, y0_norm, J, gamma_mu, t, theta, mu):
    """Right-hand side of the explicit pathwise bound on sup_{[0,t]} |Y|."""
    K = young_constant(theta, mu)
    bd = coeffs.bounds
    lead = bd.a + J + K * gamma_mu * bd.c
    return y0_norm + 2.0 * lead * (t ** theta + t * (2.0 * K * gamma_mu * bd.dc + 1.0) ** ((1.0 - theta) / mu))


def _check_theta_mu(theta, mu):
    if not (mu > 0.5 and mu < 1.0):
        raise DomainError(f"driver Hölder exponent μ must lie in (1/2, 1), got {mu}")
    if not (1.0 - mu < theta < 0.5):
        raise DomainError(f"θ must lie in (1-μ, 1/2) = ({1 - mu:g}, 0.5), got {theta}")


def pathwise_bound_check(Y: GridPath, coeffs: CoefficientSet, gamma: GridPath, W: GridPath,
                         theta: float, mu: float, t=None) -> BoundReport:
    """Evaluate both sides of the sup-norm bound for a solution driven by (W, γ) on [0, t].

    All norms are grid norms; J is the θ-Hölder statistic of the Itô parts.
    """
    _check_theta_mu(theta, mu)
    _drivers(W, gamma, coeffs.m, coeffs.l)
    if not Y.same_grid(W):
        raise ShapeError("solution and drivers must share the grid")
    k = Y.N if t is None else Y.index_of(t)
    if k < 1:
        raise DomainError("the bound needs t > t0")
    tt = k * Y.dt
    lhs = float(np.max(np.linalg.norm(Y.values[:k + 1], axis=1)))
    J = j_statistic_array(coeffs, Y.values[:k + 1], W.values[:k + 1], Y.dt, theta)
    g_mu = holder_seminorm_array(gamma.values[:k + 1], gamma.dt, mu)
    rhs = float(lemma_rhs(coeffs, np.linalg.norm(Y.values[0]), J, g_mu, tt, theta, mu))
    return BoundReport(lhs, rhs, lhs <= rhs)


def pathwise_bound_sweep(coeffs: CoefficientSet, x0, *, H, T, N, n_paths, seed, theta, mu):
    """Lemma-type bound on ``n_paths`` simulated solutions; returns arrays (lhs, rhs)."""
    _check_theta_mu(theta, mu)
    W = sample_wiener_paths(n_paths, N, T, coeffs.m, seed)
    B = sample_fbm_paths(n_paths, N, T, H, coeffs.l, seed)
    Y = euler_mixed(coeffs, x0, np.diff(W, axis=-2), np.diff(B, axis=-2), T / N)
    lhs = np.max(np.linalg.norm(Y, axis=-1), axis=-1)
    J = j_statistic_array(coeffs, Y, W, T / N, theta)
    g_mu = holder_seminorm_array(B, T / N, mu)
    rhs = lemma_rhs(coeffs, np.linalg.norm(np.atleast_1d(x0)), J, g_mu, T, theta, mu)
    return lhs, rhs


# ---------------------------------------------------------------------------
# convergence of the smoothed approximation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    n: float
    median: float
    q25: float
    q75: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list

    @property
    def medians(self) -> np.ndarray:
        return np.array([r.median for r in self.rows])

    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.medians) < 0))

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "median_sup_error", "q25", "q75"])
            for r in self.rows:
                w.writerow([repr(float(r.n)), repr(r.median), repr(r.q25), repr(r.q75)])


def smoothed_errors(coeffs: CoefficientSet, x0, *, H, T, N, n_list, n_paths, seed) -> np.ndarray:
    """sup_t |X^n_t - X_t| for each n and each path; shape (len(n_list), n_paths)."""
    hurst_value(H)
    dt = T / N
    for n in n_list:
        if 1.0 / n < dt * (1 - 1e-9):
            raise DomainError(f"smoothing rate n={n} needs 1/n >= dt={dt:g}")
    W = sample_wiener_paths(n_paths, N, T, coeffs.m, seed)
    B = sample_fbm_paths(n_paths, N, T, H, coeffs.l, seed)
    dW = np.diff(W, axis=-2)
    X = euler_mixed(coeffs, x0, dW, np.diff(B, axis=-2), dt)
    errs = []
    for n in n_list:
        _, zdot = smoothed_driver_array(B, dt, n)
        Xn = euler_smoothed(coeffs, x0, dW, zdot, dt)
        errs.append(np.max(np.linalg.norm(Xn - X, axis=-1), axis=-1))
    return np.array(errs)


def convergence_study(coeffs: CoefficientSet, X0, T, N, n_list, seeds, H=0.75) -> ConvergenceTable:
    """Median and quartiles of sup-errors of the smoothed solution versus the mixed one.

    ``seeds`` is either a path count (paths 0..seeds-1 of master seed 0) or a
    pair (master_seed, path_count). Each path shares (W, B) across all n.
    """
    master, count = (0, int(seeds)) if np.isscalar(seeds) else (int(seeds[0]), int(seeds[1]))
    errs = smoothed_errors(coeffs, X0, H=H, T=T, N=N, n_list=n_list, n_paths=count, seed=master)
    rows = []
    for n, e in zip(n_list, errs):
        q25, med, q75 = np.percentile(e, [25, 50, 75])
        rows.append(ConvergenceRow(n, float(med), float(q25), float(q75)))
    return ConvergenceTable(rows)
