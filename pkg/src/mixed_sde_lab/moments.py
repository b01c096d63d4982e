"""Monte Carlo checks of exponential moments, sub-Gaussian tails and the J statistic.

Finiteness of an expectation cannot be observed directly; the reports here
expose batch-to-batch stability and tail-decay fits instead. Overflowing
exponentials are counted, never clamped.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ._kernels import holder_seminorm_array
from .errors import DomainError, ShapeError
from .models import CoefficientSet
from .paths import GridPath, hurst_value, sample_fbm_paths, sample_wiener_paths
from .sde import euler_mixed, j_statistic_array


@dataclass(frozen=True)
class MomentReport:
    name: str
    params: dict
    batch_estimates: list
    batch_counts: list
    pooled: float
    spread: float
    n_samples: int
    seed: int | None = None
    overflow: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def csv_rows(self) -> list:
        rows = [["batch", "estimate", "count"]]
        for i, (e, c) in enumerate(zip(self.batch_estimates, self.batch_counts)):
            rows.append([str(i), repr(float(e)), str(c)])
        rows.append(["pooled", repr(float(self.pooled)), str(self.n_samples)])
        return rows

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(self.csv_rows())


def batch_report(name: str, values, batches: int, seed=None, params=None) -> MomentReport:
    """Batch means in index order (pairwise summation), pooled mean and relative spread."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if batches < 1 or batches > values.size:
        raise DomainError(f"need 1 <= batches <= {values.size}, got {batches}")
    parts = np.array_split(values, batches)
    est = [float(np.mean(p)) for p in parts]
    pooled = float(np.mean(values))
    overflow = int(np.sum(~np.isfinite(values)))
    if overflow or pooled == 0:
        spread = float("inf") if overflow else 0.0
    else:
        spread = float((max(est) - min(est)) / abs(pooled))
    return MomentReport(name, dict(params or {}), est, [int(p.size) for p in parts], pooled, spread,
                        int(values.size), seed, overflow)


def alpha_max(H) -> float:
    """Largest admissible exponent 4H/(2H+1) for the exponential moment of the sup-norm."""
    H = hurst_value(H)
    return 4.0 * H / (2.0 * H + 1.0)


def estimate_exp_moment(sup_samples, z: float, alpha: float, batches: int = 4, H=None, seed=None) -> MomentReport:
    """Batch estimates of E exp(z · sup^α) from pre-computed sup-norm samples."""
    if z < 0:
        raise DomainError(f"z must be non-negative, got {z}")
    if alpha <= 0:
        raise DomainError(f"α must be positive, got {alpha}")
    if H is not None and alpha >= alpha_max(H):
        raise DomainError(f"α = {alpha} must be below 4H/(2H+1) = {alpha_max(H):.6g} for H = {float(H)}")
    s = np.asarray(sup_samples, dtype=np.float64)
    if np.any(s < 0):
        raise DomainError("sup-norm samples must be non-negative")
    with np.errstate(over="ignore"):
        vals = np.exp(z * s ** alpha)
    params = {"z": float(z), "alpha": float(alpha)}
    if H is not None:
        params["H"] = float(H)
    return batch_report("exp_moment", vals, batches, seed, params)


def simulate_sup_norms(coeffs: CoefficientSet, x0, *, H, T, N, n_paths, seed) -> np.ndarray:
    """sup_t |X_t| on the grid for ``n_paths`` Euler solutions of the mixed SDE."""
    W = sample_wiener_paths(n_paths, N, T, coeffs.m, seed)
    B = sample_fbm_paths(n_paths, N, T, H, coeffs.l, seed)
    X = euler_mixed(coeffs, x0, np.diff(W, axis=-2), np.diff(B, axis=-2), T / N)
    return np.max(np.linalg.norm(X, axis=-1), axis=-1)


# ---------------------------------------------------------------------------
# sub-Gaussian tail of Hölder norms of Itô integrals
# ---------------------------------------------------------------------------

def tail_bound(x, A: float, kappa: float, t: float):
    """4 exp(-x² / (2 A² t^{1-2κ})); zero for A = 0 and x > 0."""
    x = np.asarray(x, dtype=np.float64)
    var = 2.0 * A ** 2 * t ** (1.0 - 2.0 * kappa)
    with np.errstate(divide="ignore"):
        return 4.0 * np.exp(-(x ** 2) / var) if var > 0 else np.where(x > 0, 0.0, 4.0)


def simulate_integral_norms(A: float, kappa: float, t: float, N: int, n_samples: int, seed: int) -> np.ndarray:
    """Grid κ-Hölder seminorms of Z = ∫ A dV = A·V on [0, t] for a scalar Wiener V."""
    if not (0 < kappa < 0.5):
        raise DomainError(f"κ must lie in (0, 1/2), got {kappa}")
    V = sample_wiener_paths(n_samples, N, t, 1, seed, stream="tail")
    return holder_seminorm_array(A * V, t / N, kappa)


@dataclass(frozen=True)
class TailRow:
    x: float
    empirical: float
    bound: float
    se: float
    satisfied: bool
    status: str


@dataclass(frozen=True)
class TailReport:
    A: float
    kappa: float
    t: float
    mean: float
    n_samples: int
    rows: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return all(r.satisfied for r in self.rows)


def tail_gaussianity_check(norms, A: float, kappa: float, t: float, x_grid, n_se: float = 3.0) -> TailReport:
    """Empirical P(norm > mean + x) against 4 exp(-x²/(2A²t^{1-2κ})) + n_se · binomial SE.

    The centring is the empirical mean of ``norms``. Rows with mean + x beyond
    the largest sample are marked "no data" and do not count as failures.
    """
    if not (0 < kappa < 0.5):
        raise DomainError(f"κ must lie in (0, 1/2), got {kappa}")
    norms = np.asarray(norms, dtype=np.float64)
    n = norms.size
    m = float(np.mean(norms))
    top = float(np.max(norms))
    rows = []
    for x in np.asarray(x_grid, dtype=np.float64):
        p = float(np.mean(norms > m + x))
        se = float(np.sqrt(p * (1.0 - p) / n))
        bound = float(tail_bound(x, A, kappa, t))
        status = "ok" if m + x <= top else "no data"
        rows.append(TailRow(float(x), p, bound, se, p <= bound + n_se * se, status))
    return TailReport(float(A), float(kappa), float(t), m, n, rows)


# ---------------------------------------------------------------------------
# Fernique-type integrability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FerniqueReport:
    moment: MomentReport
    slope: float
    slope_se: float
    slope_upper: float
    passed: bool


def log_tail_slope(samples, q_lo: float = 0.5, min_exceed: int = 50, points: int = 25):
    """Least-squares slope of log P(s > x) against x², with its standard error and dof."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    n = s.size
    q_hi = 1.0 - min_exceed / n
    if q_hi <= q_lo:
        raise DomainError(f"too few samples ({n}) for a tail fit")
    xs = np.quantile(s, np.linspace(q_lo, q_hi, points))
    surv = 1.0 - np.searchsorted(s, xs, side="right") / n
    keep = surv > 0
    fit = stats.linregress(xs[keep] ** 2, np.log(surv[keep]))
    return float(fit.slope), float(fit.stderr), int(keep.sum()) - 2


def fernique_check(norm_samples, a: float, y: float, batches: int = 4, seed=None, confidence: float = 0.95) -> FerniqueReport:
    """Batch means of exp(y · s^a) plus a one-sided test that the log-tail decays in x²."""
    if not (0 < a < 2):
        raise DomainError(f"exponent a must lie in (0, 2), got {a}")
    if y < 0:
        raise DomainError(f"y must be non-negative, got {y}")
    s = np.asarray(norm_samples, dtype=np.float64)
    with np.errstate(over="ignore"):
        vals = np.exp(y * s ** a)
    moment = batch_report("fernique", vals, batches, seed, {"a": float(a), "y": float(y)})
    slope, se, dof = log_tail_slope(s)
    upper = slope + stats.t.ppf(confidence, dof) * se
    return FerniqueReport(moment, slope, se, float(upper), bool(upper < 0))


def simulate_fbm_holder_norms(H, nu: float, T: float, N: int, n_samples: int, seed: int) -> np.ndarray:
    """Grid ν-Hölder seminorms of scalar fBm paths on [0, T]."""
    if not (0 < nu < hurst_value(H)):
        raise DomainError(f"ν must lie in (0, H), got ν={nu}, H={H}")
    B = sample_fbm_paths(n_samples, N, T, H, 1, seed, stream="fernique")
    return holder_seminorm_array(B, T / N, nu)


# ---------------------------------------------------------------------------
# J statistic
# ---------------------------------------------------------------------------

def J_statistic(Y: GridPath, coeffs: CoefficientSet, W: GridPath, theta: float, t=None) -> float:
    """Σ_i Σ_j of the θ-Hölder seminorm on [0, t] of ∫_0^· b_ij(Y_s) dW^j_s (left-point sums)."""
    if not (0 < theta < 0.5):
        raise DomainError(f"θ must lie in (0, 1/2), got {theta}")
    if not Y.same_grid(W):
        raise ShapeError("solution and Wiener path must share the grid")
    k = Y.N if t is None else Y.index_of(t)
    if k < 1:
        raise DomainError("J statistic needs t > t0")
    return float(j_statistic_array(coeffs, Y.values[:k + 1], W.values[:k + 1], Y.dt, theta))
