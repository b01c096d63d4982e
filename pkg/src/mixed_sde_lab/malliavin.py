"""Malliavin derivatives of the smoothed solution through linear variational equations.

For a solved path X (frozen), every variational equation shares the one-step
tangent map

    M_k = I + ∇a(X_k) dt + Σ_j ∇b_{·j}(X_k) ΔW^j_k + Σ_q ∇c_{·q}(X_k) Δγ^q_k,

so a derivative field for many start times s is a single forward sweep over
the grid with one state row per s. For the smoothed system the fBm-side
driver is γ = ∫ Zdot du, built by :func:`rate_to_path`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError
from .models import CoefficientSet
from .moments import MomentReport, batch_report
from .paths import (
    GridPath,
    hurst_value,
    sample_fbm,
    sample_wiener,
    smoothed_driver,
    substream,
)
from .sde import solve_smoothed
from .young import StepFunction, cameron_martin_shift, mixed_inner_product, shift_rate

_DRIVERS = ("fbm", "wiener")


@dataclass(frozen=True, eq=False)
class DerivativeField:
    """Values D_s X_t in R^d for s in ``s_times`` and t in ``t_times``; zero for s > t."""

    driver: str
    component: int
    s_times: np.ndarray
    t_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.driver not in _DRIVERS:
            raise DomainError(f"driver must be one of {_DRIVERS}, got {self.driver!r}")
        s = np.asarray(self.s_times, dtype=np.float64)
        t = np.asarray(self.t_times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[:2] != (s.size, t.size):
            raise ShapeError(f"values shape {v.shape} does not match ({s.size}, {t.size}, d)")
        if not np.all(np.isfinite(v)):
            raise DomainError("derivative field has non-finite entries")
        future = s[:, None] > t[None, :] + 1e-12
        if np.any(v[future] != 0.0):
            raise DomainError("derivative field is not adapted: D_s X_t != 0 for some s > t")
        object.__setattr__(self, "s_times", s)
        object.__setattr__(self, "t_times", t)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[2]

    def at(self, t: float) -> np.ndarray:
        """Slice s -> D_s X_t, shape (S, d)."""
        k = int(np.argmin(np.abs(self.t_times - t)))
        if abs(self.t_times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise DomainError(f"field not recorded at t={t}")
        return self.values[:, k, :]

    def to_csv(self, path) -> None:
        """Rows ``s,t,component,value`` for s <= t; component is the 1-based state coordinate."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["s", "t", "component", "value"])
            for a, s in enumerate(self.s_times):
                for b, t in enumerate(self.t_times):
                    if s > t + 1e-12:
                        continue
                    for i in range(self.d):
                        w.writerow([repr(float(s)), repr(float(t)), i + 1, repr(float(self.values[a, b, i]))])


# ---------------------------------------------------------------------------
# linear propagation
# ---------------------------------------------------------------------------

def rate_to_path(rate: GridPath) -> GridPath:
    """γ_k = Σ_{j<k} rate_j dt, so that Δγ_k = rate_k dt matches the smoothed Euler step."""
    incr = rate.values[:-1] * rate.dt
    vals = np.concatenate([np.zeros((1, rate.d)), np.cumsum(incr, axis=0)])
    return GridPath(rate.t0, rate.dt, vals)


def tangent_matrices(coeffs: CoefficientSet, X: GridPath, W: GridPath, gamma: GridPath) -> np.ndarray:
    """One-step tangent maps M_k of the Euler scheme along X, shape (N, d, d)."""
    if not (X.same_grid(W) and X.same_grid(gamma)):
        raise ShapeError("solution and drivers must share the grid")
    if X.d != coeffs.d or W.d != coeffs.m or gamma.d != coeffs.l:
        raise ShapeError("path dimensions do not match the model")
    Xl = X.values[:-1]
    M = np.eye(coeffs.d) + coeffs.jac_a(Xl) * X.dt
    M = M + np.einsum("kijx,kj->kix", coeffs.jac_b(Xl), W.increments())
    M = M + np.einsum("kiqx,kq->kix", coeffs.jac_c(Xl), gamma.increments())
    return M


def _propagate(M, starts, inits, t_idx, source=None):
    """Run D_{k+1} = M_k D_k + source(k, D-rows) for rows starting at node ``starts[r]``.

    Row r is zero before its start node, where ``inits[r]`` is added. Returns
    values at the node indices ``t_idx``, shape (rows, len(t_idx), d); entries
    with t < start stay exactly zero.
    """
    N, d = M.shape[0], M.shape[1]
    starts = np.asarray(starts)
    R = starts.size
    D = np.zeros((R, d))
    out = np.zeros((R, len(t_idx), d))
    rec = {int(k): pos for pos, k in enumerate(t_idx)}
    order = np.argsort(starts, kind="stable")
    ptr = 0
    for k in range(N + 1):
        while ptr < R and starts[order[ptr]] == k:
            r = order[ptr]
            D[r] += inits[r]
            ptr += 1
        if k in rec:
            live = starts <= k
            out[live, rec[k]] = D[live]
        if k < N:
            D = D @ M[k].T
            if source is not None:
                D += source(k)
    return out


def _node_index(p: GridPath, t: float, what: str) -> int:
    try:
        return p.index_of(t)
    except DomainError:
        raise DomainError(f"{what} = {t} is not a grid node") from None


def solve_R(coeffs: CoefficientSet, X: GridPath, W: GridPath, gamma: GridPath, z: float, init) -> GridPath:
    """Euler solution on [z, T] of the linear equation with frozen path X, R_z = init."""
    M = tangent_matrices(coeffs, X, W, gamma)
    k0 = _node_index(X, z, "start time z")
    init = np.asarray(init, dtype=np.float64).reshape(1, coeffs.d)
    vals = _propagate(M, [k0], init, range(k0, X.N + 1))[0]
    return GridPath(X.t0 + k0 * X.dt, X.dt, vals)


def _window_cells(n, dt):
    w = 1.0 / (n * dt)
    if w < 1 - 1e-9:
        raise DomainError(f"smoothing window 1/n = {1 / n:g} shorter than grid step {dt:g}")
    return w if abs(w - round(w)) > 1e-9 else float(round(w))


def _fbm_source(cq, n, dt, starts):
    """Source increments n ∫_{cell ∩ [s, s+1/n]} c_q(X_u) du with c_q linearly interpolated."""
    w = _window_cells(n, dt)
    starts = np.asarray(starts)

    def source(k):
        j = k - starts
        frac = np.clip(w - j, 0.0, 1.0)
        frac[j < 0] = 0.0
        chi = cq[k] + frac[:, None] * (cq[k + 1] - cq[k])
        return (n * dt) * frac[:, None] * 0.5 * (cq[k][None, :] + chi)

    return source


def _smoothed_setup(coeffs, Xn, W, Zn_dot, q):
    if not 0 <= q < coeffs.l:
        raise DomainError(f"fBm component q={q} out of range for l={coeffs.l}")
    gamma = rate_to_path(Zn_dot)
    M = tangent_matrices(coeffs, Xn, W, gamma)
    cq = coeffs.c(Xn.values)[:, :, q]
    return M, cq


def _grid_indices(p: GridPath, times, what):
    if times is None:
        return np.arange(p.N + 1)
    return np.array([_node_index(p, t, what) for t in np.atleast_1d(times)])


def derivative_field_fbm(coeffs: CoefficientSet, Xn: GridPath, W: GridPath, Zn_dot: GridPath, n: float,
                         q: int = 0, s_times=None, t_times=None) -> DerivativeField:
    """D^{H,q}_s X^n_t for all grid s (or ``s_times``) at ``t_times`` (default: all nodes)."""
    M, cq = _smoothed_setup(coeffs, Xn, W, Zn_dot, q)
    s_idx = _grid_indices(Xn, s_times, "s")
    t_idx = _grid_indices(Xn, t_times, "t")
    src = _fbm_source(cq, n, Xn.dt, s_idx)
    vals = _propagate(M, s_idx, np.zeros((s_idx.size, coeffs.d)), t_idx, source=src)
    return DerivativeField("fbm", q, Xn.times[s_idx], Xn.times[t_idx], vals)


def solve_variational_fbm(coeffs: CoefficientSet, Xn: GridPath, W: GridPath, Zn_dot: GridPath,
                          n: float, s: float, q: int = 0) -> GridPath:
    """D^{H,q}_s X^n_t over t in [s, T] from the inhomogeneous linear equation.

    The source n∫_s^{(s+1/n)∧t} c_q(X^n_u) du enters cell by cell (trapezoid
    rule), the homogeneous part is driven by (du, dW, dZ^n).
    """
    k0 = _node_index(Xn, s, "s")
    field = derivative_field_fbm(coeffs, Xn, W, Zn_dot, n, q, s_times=[s], t_times=Xn.times[k0:])
    return GridPath(Xn.t0 + k0 * Xn.dt, Xn.dt, field.values[0])


def _segment_weights(u: float, size: int) -> np.ndarray:
    """Weights w_j with ∫_0^u f = Σ w_j f(j) for the piecewise-linear interpolant on nodes 0..size-1."""
    w = np.zeros(size)
    full = int(np.floor(u + 1e-12))
    if full > 0:
        w[:full + 1] += 0.5
        w[1:full] += 0.5
    f = u - full
    if f > 1e-12:
        w[full] += f - 0.5 * f * f
        w[full + 1] += 0.5 * f * f
    return w


def duhamel_reconstruct(coeffs: CoefficientSet, Xn: GridPath, W: GridPath, Zn_dot: GridPath,
                        n: float, s: float, q: int = 0) -> GridPath:
    """D_t = n ∫_s^{(s+1/n)∧t} R_t(z) dz, R(z) the homogeneous solution started at c_q(X^n_z).

    Every grid node of the window is a quadrature node; the integral is exact
    for the piecewise-linear interpolant in z.
    """
    M, cq = _smoothed_setup(coeffs, Xn, W, Zn_dot, q)
    k0 = _node_index(Xn, s, "s")
    w = _window_cells(n, Xn.dt)
    last = min(k0 + int(np.ceil(w - 1e-12)), Xn.N)
    z_idx = np.arange(k0, last + 1)
    t_idx = np.arange(k0, Xn.N + 1)
    R = _propagate(M, z_idx, cq[z_idx], t_idx)
    out = np.zeros((t_idx.size, coeffs.d))
    for pos, k in enumerate(t_idx):
        u = min(w, float(k - k0))
        if u <= 0:
            continue
        wts = _segment_weights(u, z_idx.size)
        out[pos] = n * Xn.dt * (wts @ R[:, pos, :])
    return GridPath(Xn.t0 + k0 * Xn.dt, Xn.dt, out)


def derivative_field_wiener(coeffs: CoefficientSet, X: GridPath, W: GridPath, gamma: GridPath,
                            j: int = 0, s_times=None, t_times=None) -> DerivativeField:
    """D^{W,j}_s X_t: homogeneous solutions started at b_{·j}(X_s) at time s."""
    if not 0 <= j < coeffs.m:
        raise DomainError(f"Wiener component j={j} out of range for m={coeffs.m}")
    M = tangent_matrices(coeffs, X, W, gamma)
    s_idx = _grid_indices(X, s_times, "s")
    t_idx = _grid_indices(X, t_times, "t")
    inits = coeffs.b(X.values[s_idx])[:, :, j]
    vals = _propagate(M, s_idx, inits, t_idx)
    return DerivativeField("wiener", j, X.times[s_idx], X.times[t_idx], vals)


def solve_variational_wiener(coeffs: CoefficientSet, X: GridPath, W: GridPath, B: GridPath,
                             s: float, j: int = 0) -> GridPath:
    """D^{W,j}_s X_t over [s, T]: solve_R with init b_{·j}(X_s) and fBm-side driver B."""
    if not 0 <= j < coeffs.m:
        raise DomainError(f"Wiener component j={j} out of range for m={coeffs.m}")
    k0 = _node_index(X, s, "s")
    return solve_R(coeffs, X, W, B, s, coeffs.b(X.values[k0])[:, j])


def first_variation(coeffs: CoefficientSet, X: GridPath, W: GridPath, gamma: GridPath) -> np.ndarray:
    """Jacobians Y_k = ∂X_k/∂X_0 of the scheme, shape (N+1, d, d)."""
    M = tangent_matrices(coeffs, X, W, gamma)
    Y = np.empty((X.N + 1, coeffs.d, coeffs.d))
    Y[0] = np.eye(coeffs.d)
    for k in range(X.N):
        Y[k + 1] = M[k] @ Y[k]
    return Y


# ---------------------------------------------------------------------------
# finite-difference directional derivatives and the H-pairing
# ---------------------------------------------------------------------------

DEFAULT_EPS = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True, eq=False)
class FDResult:
    eps: np.ndarray
    values: np.ndarray          # (E, N+1, d)
    drift: np.ndarray           # (E-1,) relative change between consecutive ε
    best: int                   # index into eps of the plateau value
    derivative: GridPath
    stable: bool
    message: str = ""


def _shifted_solution(coeffs, X0, W, B, shift, n):
    Bs = GridPath(B.t0, B.dt, B.values + shift)
    _, zdot = smoothed_driver(Bs, n)
    return solve_smoothed(coeffs, X0, W, zdot).values


def directional_derivative_fd(coeffs: CoefficientSet, X0, W: GridPath, B: GridPath, h: StepFunction,
                              eps_list=DEFAULT_EPS, n: float = 32, H=0.75, plateau_tol: float = 1e-2) -> FDResult:
    """Central differences of X^n under B -> B ± ε·(Cameron-Martin shift of h).

    ``h`` has one component per fBm coordinate. The ladder ε_i is scaled by
    1/max(1, sup|shift|); the plateau is the pair of consecutive ε with the
    smallest relative drift, and the smaller ε of that pair is reported.
    """
    hurst_value(H)
    if h.components != coeffs.l:
        raise ShapeError(f"direction has {h.components} components, model has l={coeffs.l}")
    eps = np.sort(np.asarray(eps_list, dtype=np.float64))[::-1]
    if eps.size < 2 or np.any(eps <= 0):
        raise DomainError("need at least two positive ε values")
    g = cameron_martin_shift(h, H, B.times - B.t0)
    eps = eps / max(1.0, float(np.max(np.abs(g))))
    vals = np.stack([
        (_shifted_solution(coeffs, X0, W, B, e * g, n) - _shifted_solution(coeffs, X0, W, B, -e * g, n)) / (2 * e)
        for e in eps
    ])
    drift = np.empty(eps.size - 1)
    for i in range(eps.size - 1):
        ref = np.linalg.norm(vals[i + 1])
        diff = np.linalg.norm(vals[i + 1] - vals[i])
        drift[i] = 0.0 if diff == 0 else diff / ref if ref > 0 else np.inf
    i = int(np.argmin(drift))
    stable = bool(drift[i] <= plateau_tol)
    msg = "" if stable else f"no stable ε plateau: minimal relative drift {drift[i]:.3e} > {plateau_tol:g}"
    return FDResult(eps, vals, drift, i + 1, GridPath(B.t0, B.dt, vals[i + 1]), stable, msg)


def _trapezoid_weights(times):
    dt = np.diff(times)
    w = np.zeros(times.size)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def gradient_pairing(fields, h: StepFunction, H) -> np.ndarray:
    """Σ_q ∫ D^{H,q}_s X_t (∫ φ(s,v) h_q(v) dv) ds for every recorded t; shape (len(t_times), d).

    The inner integral is exact; the outer one is the trapezoid rule on the s-grid.
    """
    if isinstance(fields, DerivativeField):
        fields = [fields]
    if len(fields) != h.components:
        raise ShapeError(f"{len(fields)} derivative fields for a {h.components}-component direction")
    total = 0.0
    for f in fields:
        if f.driver != "fbm":
            raise DomainError("the H-pairing applies to fBm-side derivative fields")
        k = shift_rate(h.component(f.component), H, f.s_times)[:, 0]
        wts = _trapezoid_weights(f.s_times) * k
        total = total + np.einsum("s,std->td", wts, f.values)
    return total


@dataclass(frozen=True)
class PairingReport:
    t: float
    pairing: np.ndarray
    fd: np.ndarray
    rel_error: float
    fd_stable: bool


def gradient_pairing_check(fields, h: StepFunction, H, fd: FDResult, t=None) -> PairingReport:
    """Relative error |pairing - FD| / |FD| at time t (default: the final node)."""
    fields_l = [fields] if isinstance(fields, DerivativeField) else list(fields)
    t = float(fd.derivative.T if t is None else t)
    k = int(np.argmin(np.abs(fields_l[0].t_times - t)))
    pair = gradient_pairing(fields_l, h, H)[k]
    fdv = fd.derivative.values[fd.derivative.index_of(t)]
    denom = np.linalg.norm(fdv)
    diff = np.linalg.norm(pair - fdv)
    rel = 0.0 if diff == 0 else float(diff / denom) if denom > 0 else np.inf
    return PairingReport(t, pair, fdv, rel, fd.stable)


def sup_relative_difference(a: GridPath, b: GridPath) -> float:
    """max_t |a_t - b_t| / max_t |b_t|."""
    num = np.max(np.linalg.norm(a.values - b.values, axis=1))
    den = np.max(np.linalg.norm(b.values, axis=1))
    return 0.0 if num == 0 else float(num / den) if den > 0 else np.inf


# ---------------------------------------------------------------------------
# Sobolev-norm proxy
# ---------------------------------------------------------------------------

def _cell_steps(s_times, D, k):
    """Step functions on [0, t_k) with cell levels = mean of the two end values, one per coordinate."""
    bp = s_times[:k + 1]
    mid = 0.5 * (D[:k] + D[1:k + 1])
    return [StepFunction(bp, mid[:, i:i + 1]) for i in range(D.shape[1])]


def h_norm_sq(fbm_fields, wiener_fields, t: float, H) -> float:
    """‖D X_t‖²_𝔥 summed over state coordinates, on the grid-discretised fields."""
    total = 0.0
    ref = (fbm_fields or wiener_fields)[0]
    k = int(np.argmin(np.abs(ref.s_times - t)))
    cols = [f.at(t) for f in fbm_fields], [f.at(t) for f in wiener_fields]
    d = ref.d
    per_coord_h = [_cell_steps(ref.s_times, D, k) for D in cols[0]]
    per_coord_w = [_cell_steps(ref.s_times, D, k) for D in cols[1]]
    for i in range(d):
        fi = ([steps[i] for steps in per_coord_h], [steps[i] for steps in per_coord_w])
        total += mixed_inner_product(fi, fi, H)
    return float(total)


@dataclass(frozen=True)
class SobolevReport:
    p: float
    t: float
    n_list: tuple
    reports: list            # MomentReport per n
    estimates: np.ndarray
    spread: float
    extrapolated: float


def extrapolate_large_n(estimates) -> float:
    """Aitken Δ² extrapolation of the last three estimates of a geometric n-ladder."""
    e = np.asarray(estimates, dtype=np.float64)
    if e.size < 3:
        return float(e[-1])
    x0, x1, x2 = e[-3:]
    den = x2 - 2 * x1 + x0
    if den == 0 or not np.isfinite(den):
        return float(x2)
    return float(x2 - (x2 - x1) ** 2 / den)


def sobolev_sample(coeffs: CoefficientSet, X0, W: GridPath, B: GridPath, n: float, p: float, t: float, H) -> float:
    """|X^n_t|^p + ‖D X^n_t‖^p_𝔥 for one pair of driver paths."""
    _, zdot = smoothed_driver(B, n)
    Xn = solve_smoothed(coeffs, X0, W, zdot)
    gamma = rate_to_path(zdot)
    fb = [derivative_field_fbm(coeffs, Xn, W, zdot, n, q, t_times=[t]) for q in range(coeffs.l)]
    fw = [derivative_field_wiener(coeffs, Xn, W, gamma, j, t_times=[t]) for j in range(coeffs.m)]
    xt = np.linalg.norm(Xn.values[Xn.index_of(t)])
    return float(xt ** p + h_norm_sq(fb, fw, t, H) ** (p / 2))


def sobolev_norm_estimate(coeffs: CoefficientSet, X0, *, H=0.75, T=1.0, N=512, n_list=(8, 16, 32),
                          p=2.0, t=None, n_paths=200, seed=0, batches=4) -> SobolevReport:
    """Monte Carlo E[|X^n_t|^p + ‖D X^n_t‖^p_𝔥] for each n, common driver paths across n."""
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    hurst_value(H)
    t = T if t is None else t
    samples = np.empty((len(n_list), n_paths))
    for i in range(n_paths):
        W = sample_wiener(N, T, coeffs.m, seed=substream(seed, "wiener", i))
        B = sample_fbm(N, T, H, coeffs.l, seed=substream(seed, "fbm", i))
        for a, n in enumerate(n_list):
            samples[a, i] = sobolev_sample(coeffs, X0, W, B, n, p, t, H)
    reports = [
        batch_report("sobolev_norm_p", samples[a], batches, seed,
                     {"n": float(n), "p": float(p), "t": float(t), "H": float(H)})
        for a, n in enumerate(n_list)
    ]
    est = np.array([r.pooled for r in reports])
    spread = float((est.max() - est.min()) / est.mean()) if est.mean() != 0 else 0.0
    return SobolevReport(float(p), float(t), tuple(n_list), reports, est, spread, extrapolate_large_n(est))
