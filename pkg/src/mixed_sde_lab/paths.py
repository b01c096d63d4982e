"""Grid paths, Wiener and fractional Brownian sampling, grid norms.

All paths live on uniform grids. The time of node ``k`` is ``t0 + k * dt``
(index-scaled, never accumulated). fBm is sampled exactly on the grid by
circulant embedding of the fractional Gaussian noise covariance, with a
dense Cholesky factorisation of the path covariance as fallback.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from ._kernels import holder_seminorm_array
from .errors import CholeskyError, DomainError, ResolutionError, ShapeError

# relative tolerance for deciding that a time lies on a grid node
_GRID_TOL = 1e-9
# circulant eigenvalues below -_EIG_TOL * max(eig) trigger the Cholesky fallback
_EIG_TOL = 1e-10


@dataclass(frozen=True)
class HurstParam:
    """Hurst index restricted to the open interval (1/2, 1)."""

    H: float

    def __post_init__(self):
        if not (0.5 < float(self.H) < 1.0):
            raise DomainError(f"Hurst index must lie in (1/2, 1), got {self.H}")

    def __float__(self):
        return float(self.H)


def hurst_value(H) -> float:
    """Validate ``H`` (float or HurstParam) and return it as a float."""
    return float(HurstParam(float(H)))


@dataclass(frozen=True, eq=False)
class GridPath:
    """Values of an R^d-valued process on a uniform time grid.

    ``values`` has shape (N+1, d); node ``k`` sits at ``t0 + k * dt``.
    """

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise ShapeError(f"values must be 1-D or 2-D, got shape {vals.shape}")
        if vals.shape[0] < 2:
            raise ShapeError("a grid path needs at least two nodes (N >= 1)")
        if not (self.dt > 0):
            raise DomainError(f"grid step must be positive, got {self.dt}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid path values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> float:
        return self.t0 + self.N * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.N + 1) * self.dt

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def index_of(self, t: float) -> int:
        """Index of the grid node at time ``t``; raises if ``t`` is off-grid."""
        x = (t - self.t0) / self.dt
        k = int(round(x))
        if abs(x - k) > _GRID_TOL * max(1.0, abs(x)) or not (0 <= k <= self.N):
            raise DomainError(f"time {t} is not a node of the grid [{self.t0}, {self.T}] step {self.dt}")
        return k

    def window(self, a=None, b=None) -> tuple[int, int]:
        """Inclusive node-index range of the nodes lying in [a, b]."""
        a = self.t0 if a is None else a
        b = self.T if b is None else b
        slack = _GRID_TOL * max(1.0, abs(self.T))
        if a < self.t0 - slack or b > self.T + slack or b < a:
            raise DomainError(f"window [{a}, {b}] not within grid span [{self.t0}, {self.T}]")
        i0 = int(np.ceil((a - self.t0) / self.dt - _GRID_TOL))
        i1 = int(np.floor((b - self.t0) / self.dt + _GRID_TOL))
        return max(i0, 0), min(i1, self.N)

    def same_grid(self, other: GridPath) -> bool:
        return (
            self.N == other.N
            and abs(self.t0 - other.t0) <= _GRID_TOL * max(1.0, abs(self.T))
            and abs(self.dt - other.dt) <= _GRID_TOL * self.dt
        )

    def subsample(self, factor: int) -> GridPath:
        """Every ``factor``-th node; N must be divisible by ``factor``."""
        if factor < 1 or self.N % factor:
            raise ShapeError(f"cannot coarsen N={self.N} by factor {factor}")
        return GridPath(self.t0, self.dt * factor, self.values[::factor])

    def to_csv(self, path) -> None:
        write_paths_csv(path, self)

    @classmethod
    def from_csv(cls, path) -> GridPath:
        return read_path_csv(path)


def write_paths_csv(path, p: GridPath) -> None:
    """Write ``t,x1,...,xd`` with one row per node, full float precision."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(p.d)])
        for t, row in zip(p.times, p.values):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_path_csv(path) -> GridPath:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "t" or len(header) < 2:
        raise ShapeError(f"bad path CSV header {header}")
    arr = np.array(body, dtype=np.float64)
    t = arr[:, 0]
    N = len(t) - 1
    if N < 1:
        raise ShapeError("path CSV needs at least two rows")
    dt = (t[-1] - t[0]) / N
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0.0):
        raise ShapeError("path CSV times are not a uniform grid")
    return GridPath(t[0], dt, arr[:, 1:])


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little")


def substream(master: int, label: str, index: int = 0) -> np.random.SeedSequence:
    """Seed sequence for path ``index`` of the named stream ``label``.

    Streams with different labels or indices are statistically independent,
    and a path's randomness does not depend on how many other paths are drawn.
    """
    return np.random.SeedSequence(entropy=int(master), spawn_key=(_label_key(label), int(index)))


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# fractional Brownian motion
# ---------------------------------------------------------------------------

def fbm_covariance(t, s, H):
    """Covariance ½(t^{2H} + s^{2H} - |t-s|^{2H}) of fBm; broadcasts over arrays."""
    H = hurst_value(H)
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("fBm covariance is defined for non-negative times only")
    out = 0.5 * (t ** (2 * H) + s ** (2 * H) - np.abs(t - s) ** (2 * H))
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(k, H):
    """Autocovariance of unit-step fractional Gaussian noise at integer lag ``k``."""
    k = np.abs(np.asarray(k, dtype=np.float64))
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


@lru_cache(maxsize=32)
def _circulant_eigenvalues(N: int, H: float) -> np.ndarray:
    gam = fgn_autocovariance(np.arange(N + 1), H)
    row = np.concatenate([gam, gam[-2:0:-1]])
    return np.fft.fft(row).real


@lru_cache(maxsize=8)
def _path_cholesky(N: int, H: float) -> np.ndarray:
    t = np.arange(1, N + 1, dtype=np.float64)
    cov = 0.5 * (t[:, None] ** (2 * H) + t[None, :] ** (2 * H) - np.abs(t[:, None] - t[None, :]) ** (2 * H))
    return cholesky_lower(cov)


def cholesky_lower(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises CholeskyError naming the failing pivot."""
    c, info = lapack.dpotrf(np.asarray(cov, dtype=np.float64), lower=1, clean=1)
    if info > 0:
        # lapack pivots are 1-based
        raise CholeskyError(f"covariance not positive definite at pivot index {info - 1}", pivot=int(info) - 1)
    if info < 0:
        raise CholeskyError(f"invalid argument {-info} to dpotrf", pivot=0)
    return c


def _choose_method(N: int, H: float, method: str) -> str:
    if method not in ("auto", "circulant", "cholesky"):
        raise DomainError(f"unknown fBm sampling method {method!r}")
    if method == "cholesky":
        return method
    lam = _circulant_eigenvalues(N, H)
    if lam.min() < -_EIG_TOL * lam.max():
        if method == "circulant":
            raise np.linalg.LinAlgError(f"circulant embedding has negative eigenvalue {lam.min():.3e}")
        return "cholesky"
    return "circulant"


def _draw_fbm_normals(rng: np.random.Generator, N: int, l: int, method: str) -> np.ndarray:
    if method == "circulant":
        return rng.standard_normal((l, 2, 2 * N))
    return rng.standard_normal((l, N))


def _fbm_from_normals(normals: np.ndarray, N: int, T: float, H: float, method: str) -> np.ndarray:
    """Map standard normals (leading batch axes allowed) to fBm node values (..., N+1, l)."""
    scale = (T / N) ** H
    if method == "circulant":
        lam = np.clip(_circulant_eigenvalues(N, H), 0.0, None)
        w = np.sqrt(lam / (2 * N)) * (normals[..., 0, :] + 1j * normals[..., 1, :])
        incr = np.fft.fft(w, axis=-1).real[..., :N] * scale
        vals = np.cumsum(incr, axis=-1)
    else:
        L = _path_cholesky(N, H)
        vals = np.einsum("ij,...j->...i", L, normals) * scale
    vals = np.moveaxis(vals, -2, -1)
    zero = np.zeros(vals.shape[:-2] + (1, vals.shape[-1]))
    return np.concatenate([zero, vals], axis=-2)


def _check_grid_args(N, T, count, what):
    if int(N) != N or N < 1:
        raise DomainError(f"grid size N must be an integer >= 1, got {N}")
    if not (T > 0):
        raise DomainError(f"horizon T must be positive, got {T}")
    if int(count) != count or count < 1:
        raise DomainError(f"{what} must be an integer >= 1, got {count}")


def sample_fbm(N: int, T: float, H, l: int = 1, seed=None, method: str = "auto") -> GridPath:
    """Sample ``l`` independent fBm components on the grid k*T/N, k=0..N.

    Args:
        N: number of grid steps.
        T: horizon.
        H: Hurst index in (1/2, 1).
        l: number of independent components.
        seed: int, SeedSequence or Generator.
        method: "auto" (circulant embedding, Cholesky fallback),
            "circulant" or "cholesky".
    """
    H = hurst_value(H)
    _check_grid_args(N, T, l, "component count l")
    method = _choose_method(N, H, method)
    normals = _draw_fbm_normals(as_generator(seed), N, l, method)
    return GridPath(0.0, T / N, _fbm_from_normals(normals, N, T, H, method))


def sample_fbm_paths(n_paths: int, N: int, T: float, H, l: int = 1, seed: int = 0,
                     stream: str = "fbm", method: str = "auto") -> np.ndarray:
    """Batch of fBm paths, shape (n_paths, N+1, l).

    Path ``i`` equals ``sample_fbm(N, T, H, l, seed=substream(seed, stream, i))``.
    """
    H = hurst_value(H)
    _check_grid_args(N, T, l, "component count l")
    method = _choose_method(N, H, method)
    normals = np.stack([
        _draw_fbm_normals(as_generator(substream(seed, stream, i)), N, l, method) for i in range(n_paths)
    ])
    return _fbm_from_normals(normals, N, T, H, method)


# ---------------------------------------------------------------------------
# Wiener process
# ---------------------------------------------------------------------------

def _wiener_from_normals(normals: np.ndarray, dt: float) -> np.ndarray:
    vals = np.cumsum(normals * np.sqrt(dt), axis=-2)
    zero = np.zeros(vals.shape[:-2] + (1, vals.shape[-1]))
    return np.concatenate([zero, vals], axis=-2)


def sample_wiener(N: int, T: float, m: int = 1, seed=None) -> GridPath:
    """Sample an m-dimensional standard Wiener process on the grid k*T/N."""
    _check_grid_args(N, T, m, "component count m")
    normals = as_generator(seed).standard_normal((N, m))
    return GridPath(0.0, T / N, _wiener_from_normals(normals, T / N))


def sample_wiener_paths(n_paths: int, N: int, T: float, m: int = 1, seed: int = 0,
                        stream: str = "wiener") -> np.ndarray:
    """Batch of Wiener paths, shape (n_paths, N+1, m); path i uses ``substream(seed, stream, i)``."""
    _check_grid_args(N, T, m, "component count m")
    normals = np.stack([
        as_generator(substream(seed, stream, i)).standard_normal((N, m)) for i in range(n_paths)
    ])
    return _wiener_from_normals(normals, T / N)


# ---------------------------------------------------------------------------
# grid norms
# ---------------------------------------------------------------------------

def holder_seminorm(p: GridPath, gamma: float, a=None, b=None) -> float:
    """Exact max of |p(t)-p(s)| / |t-s|^γ over ordered node pairs in [a, b]."""
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"Hölder exponent must lie in (0, 1), got {gamma}")
    i0, i1 = p.window(a, b)
    if i1 - i0 < 1:
        raise DomainError(f"window [{a}, {b}] contains fewer than two grid nodes")
    return holder_seminorm_array(p.values[i0:i1 + 1], p.dt, gamma)


def sup_norm(p: GridPath, a=None, b=None) -> float:
    """Max Euclidean norm over the grid nodes in [a, b]."""
    i0, i1 = p.window(a, b)
    if i1 < i0:
        raise DomainError(f"window [{a}, {b}] contains no grid node")
    return float(np.max(np.linalg.norm(p.values[i0:i1 + 1], axis=1)))


# ---------------------------------------------------------------------------
# smoothed driver
# ---------------------------------------------------------------------------

def _interp_back(vals: np.ndarray, shift: float):
    """Linear interpolation of node values at (k - shift) ∨ 0 for all k.

    ``vals`` has the time axis at -2. Returns the interpolated values and the
    (fractional) positions used.
    """
    n1 = vals.shape[-2]
    pos = np.maximum(np.arange(n1) - shift, 0.0)
    j = np.minimum(np.floor(pos).astype(int), n1 - 1)
    w = (pos - j)[:, None]
    jn = np.minimum(j + 1, n1 - 1)
    return (1.0 - w) * vals[..., j, :] + w * vals[..., jn, :], pos


def smoothed_driver_array(B: np.ndarray, dt: float, n: float):
    """Array version of :func:`smoothed_driver`; time axis at -2, leading batch axes allowed."""
    shift = 1.0 / (n * dt)
    B = np.asarray(B, dtype=np.float64)
    Bback, pos = _interp_back(B, shift)
    zdot = n * (B - Bback)
    # cumulative trapezoid of the piecewise-linear interpolant
    cell = 0.5 * (B[..., 1:, :] + B[..., :-1, :]) * dt
    zero = np.zeros(B.shape[:-2] + (1, B.shape[-1]))
    C = np.concatenate([zero, np.cumsum(cell, axis=-2)], axis=-2)
    j = np.minimum(np.floor(pos).astype(int), B.shape[-2] - 1)
    frac = (pos - j)[:, None] * dt
    Cback = C[..., j, :] + frac * 0.5 * (B[..., j, :] + Bback)
    Z = n * (C - Cback)
    return Z, zdot


def smoothed_driver(B: GridPath, n: float) -> tuple[GridPath, GridPath]:
    """Trailing moving average of ``B`` with window 1/n and its time derivative.

    Z_t = n ∫_{(t-1/n)∨t0}^t B_s ds by exact integration of the piecewise-linear
    interpolant (trapezoid rule), and Zdot_t = n (B_t - B_{(t-1/n)∨t0}).
    """
    if not (n >= 1):
        raise DomainError(f"smoothing rate n must be >= 1, got {n}")
    if 1.0 / n < B.dt * (1 - _GRID_TOL):
        raise ResolutionError(
            f"smoothing window 1/n = {1.0 / n:g} is shorter than the grid step {B.dt:g}; "
            f"use N >= {int(np.ceil(n * (B.T - B.t0)))} nodes per horizon"
        )
    Z, zdot = smoothed_driver_array(B.values, B.dt, n)
    return GridPath(B.t0, B.dt, Z), GridPath(B.t0, B.dt, zdot)
