"""Coefficient sets (a, b, c) with exact Jacobians, and the model zoo.

Shape conventions, all broadcasting over leading batch axes of ``x`` (..., d):

    a(x)      (..., d)          jac_a(x)  (..., d, d)      [i, k]    = ∂a_i/∂x_k
    b(x)      (..., d, m)       jac_b(x)  (..., d, m, d)   [i, j, k] = ∂b_ij/∂x_k
    c(x)      (..., d, l)       jac_c(x)  (..., d, l, d)   [i, q, k] = ∂c_iq/∂x_k

Declared bounds are Frobenius-norm bounds, hence also bounds for the
operator norms used in the pathwise estimates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class CoefficientBounds:
    a: float
    b: float
    c: float
    da: float
    db: float
    dc: float
    d2c: float

    def __post_init__(self):
        for name, v in vars(self).items():
            if not (np.isfinite(v) and v >= 0):
                raise DomainError(f"declared bound {name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class CoefficientSet:
    name: str
    d: int
    m: int
    l: int
    a: Callable
    b: Callable
    c: Callable
    jac_a: Callable
    jac_b: Callable
    jac_c: Callable
    bounds: CoefficientBounds
    notes: str = ""

    def _probe_points(self, n, seed, scale):
        rng = np.random.default_rng(seed)
        # mix of moderate and far-out points so bounded tails are exercised
        x = rng.standard_normal((n, self.d)) * scale
        x[::4] *= 10.0
        return x

    def bound_violations(self, n_probe: int = 10_000, seed: int = 0, scale: float = 3.0) -> dict:
        """Largest ratio sampled-norm / declared-bound per coefficient (> 1 means violated)."""
        x = self._probe_points(n_probe, seed, scale)
        bd = self.bounds

        def fro(v, axes):
            return np.sqrt(np.sum(v ** 2, axis=axes))

        sampled = {
            "a": fro(self.a(x), (-1,)),
            "b": fro(self.b(x), (-2, -1)),
            "c": fro(self.c(x), (-2, -1)),
            "da": fro(self.jac_a(x), (-2, -1)),
            "db": fro(self.jac_b(x), (-3, -2, -1)),
            "dc": fro(self.jac_c(x), (-3, -2, -1)),
        }
        out = {}
        for k, v in sampled.items():
            bound = getattr(bd, k)
            mx = float(v.max())
            out[k] = mx / bound if bound > 0 else (0.0 if mx == 0 else np.inf)
        return out

    def jacobian_error(self, n_probe: int = 1000, seed: int = 1, h: float = 1e-5) -> float:
        """Max relative error of the declared Jacobians against central differences."""
        x = self._probe_points(n_probe, seed, 2.0)
        worst = 0.0
        for fn, jac in ((self.a, self.jac_a), (self.b, self.jac_b), (self.c, self.jac_c)):
            J = jac(x)
            fd = np.empty_like(J)
            for k in range(self.d):
                e = np.zeros(self.d)
                e[k] = h
                fd[..., k] = (fn(x + e) - fn(x - e)) / (2 * h)
            scale = max(np.max(np.abs(J)), 1e-12)
            worst = max(worst, float(np.max(np.abs(J - fd)) / scale))
        return worst

    def check(self) -> None:
        """Raise if probed norms exceed declared bounds or Jacobians disagree with differences."""
        viol = self.bound_violations()
        bad = {k: v for k, v in viol.items() if v > 1 + 1e-12}
        if bad:
            raise DomainError(f"model {self.name!r} exceeds its declared bounds: {bad}")
        err = self.jacobian_error()
        if err > 1e-6:
            raise DomainError(f"model {self.name!r} Jacobians disagree with central differences ({err:.2e})")


# ---------------------------------------------------------------------------
# zoo
# ---------------------------------------------------------------------------

def _ones(x):
    return np.ones(np.shape(x)[:-1])


def constant_model(a, b, c, name: str = "const") -> CoefficientSet:
    """Model with constant a (d,), b (d, m), c (d, l); all Jacobians vanish."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    d = a.size
    if b.shape[0] != d or c.shape[0] != d:
        raise ShapeError(f"coefficient shapes disagree: a {a.shape}, b {b.shape}, c {c.shape}")
    m, l = b.shape[1], c.shape[1]

    def tile(v):
        return lambda x: _ones(x)[(...,) + (None,) * v.ndim] * v

    def zero(*shape):
        return lambda x: np.zeros(np.shape(x)[:-1] + shape)

    return CoefficientSet(
        name=name, d=d, m=m, l=l,
        a=tile(a), b=tile(b), c=tile(c),
        jac_a=zero(d, d), jac_b=zero(d, m, d), jac_c=zero(d, l, d),
        bounds=CoefficientBounds(
            a=float(np.linalg.norm(a)), b=float(np.linalg.norm(b)), c=float(np.linalg.norm(c)),
            da=0.0, db=0.0, dc=0.0, d2c=0.0,
        ),
        notes="constant coefficients; Euler is exact: X = X0 + a t + b W_t + c B_t",
    )


def trig1d() -> CoefficientSet:
    """d = m = l = 1: a = 0.3 sin x, b = 0.5 cos x, c = 1/(1+x^2)."""

    def a(x):
        return 0.3 * np.sin(x)

    def b(x):
        return 0.5 * np.cos(x)[..., None]

    def c(x):
        return (1.0 / (1.0 + x ** 2))[..., None]

    def jac_a(x):
        return 0.3 * np.cos(x)[..., None]

    def jac_b(x):
        return -0.5 * np.sin(x)[..., None, None]

    def jac_c(x):
        return (-2.0 * x / (1.0 + x ** 2) ** 2)[..., None, None]

    return CoefficientSet(
        name="trig1d", d=1, m=1, l=1, a=a, b=b, c=c, jac_a=jac_a, jac_b=jac_b, jac_c=jac_c,
        # |c'| peaks at x = 1/sqrt(3); |c''| = |6x^2-2|/(1+x^2)^3 peaks at x = 0
        bounds=CoefficientBounds(a=0.3, b=0.5, c=1.0, da=0.3, db=0.5, dc=3 * np.sqrt(3) / 8, d2c=2.0),
        notes="bounded trigonometric/rational coefficients",
    )


_TANH2_MAX = 4.0 / (3.0 * np.sqrt(3.0))  # sup |tanh''|


def tanh2d() -> CoefficientSet:
    """d = 2, m = 1, l = 1 with tanh-based coefficients.

    a = (-0.5 tanh x1 + 0.2 tanh x2, 0.3 tanh x1 - 0.4 tanh x2)
    b = (0.3 + 0.1 tanh x2, 0.2 + 0.1 tanh x1)^T
    c = (0.5 + 0.25 tanh x1, 0.4 - 0.2 tanh(x1 - x2))^T
    """
    A = np.array([[-0.5, 0.2], [0.3, -0.4]])

    def sech2(u):
        return 1.0 / np.cosh(u) ** 2

    def a(x):
        return np.tanh(x) @ A.T

    def jac_a(x):
        return A * sech2(x)[..., None, :]

    def b(x):
        t = np.tanh(x)
        return np.stack([0.3 + 0.1 * t[..., 1], 0.2 + 0.1 * t[..., 0]], axis=-1)[..., None]

    def jac_b(x):
        s = sech2(x)
        out = np.zeros(x.shape[:-1] + (2, 1, 2))
        out[..., 0, 0, 1] = 0.1 * s[..., 1]
        out[..., 1, 0, 0] = 0.1 * s[..., 0]
        return out

    def c(x):
        u = x[..., 0] - x[..., 1]
        return np.stack([0.5 + 0.25 * np.tanh(x[..., 0]), 0.4 - 0.2 * np.tanh(u)], axis=-1)[..., None]

    def jac_c(x):
        su = sech2(x[..., 0] - x[..., 1])
        out = np.zeros(x.shape[:-1] + (2, 1, 2))
        out[..., 0, 0, 0] = 0.25 * sech2(x[..., 0])
        out[..., 1, 0, 0] = -0.2 * su
        out[..., 1, 0, 1] = 0.2 * su
        return out

    return CoefficientSet(
        name="tanh2d", d=2, m=1, l=1, a=a, b=b, c=c, jac_a=jac_a, jac_b=jac_b, jac_c=jac_c,
        bounds=CoefficientBounds(
            a=float(np.hypot(0.7, 0.7)),
            b=0.5,
            c=float(np.hypot(0.75, 0.6)),
            da=float(np.linalg.norm(A)),
            db=float(np.hypot(0.1, 0.1)),
            dc=float(np.sqrt(0.25 ** 2 + 2 * 0.2 ** 2)),
            d2c=float(np.sqrt(0.25 ** 2 + 4 * 0.2 ** 2) * _TANH2_MAX),
        ),
        notes="bounded tanh coefficients coupling both coordinates",
    )


@dataclass(frozen=True)
class ModelZooEntry:
    name: str
    coeffs: CoefficientSet
    notes: str


def _const():
    return constant_model([0.1, -0.2], [[0.3, 0.0], [0.1, 0.2]], [[0.5], [0.25]], name="const")


_ZOO = {
    "trig1d": trig1d,
    "tanh2d": tanh2d,
    "const": _const,
    "zero": lambda: constant_model([0.0], [[0.0]], [[0.0]], name="zero"),
    "brownian": lambda: constant_model([0.0], [[1.0]], [[0.0]], name="brownian"),
}


def model_names() -> list[str]:
    return list(_ZOO)


def get_model(name: str) -> CoefficientSet:
    try:
        return _ZOO[name]()
    except KeyError:
        raise DomainError(f"unknown model {name!r}; choose from {sorted(_ZOO)}") from None


def zoo() -> list[ModelZooEntry]:
    return [ModelZooEntry(n, m, m.notes) for n, m in ((n, get_model(n)) for n in _ZOO)]
