"""Chebyshev expansions with Gibbs damping (kernel polynomial method).

A truncated expansion ``p(x) = g_0 w_0 / 2 + sum_k g_k w_k T_k(x)`` with
damping factors ``g_k`` taken from one of seven classical kernels.  The
coefficients ``w`` may be learnable; :func:`kernel_polynomial_loss` gives
the order-weighted penalty used to keep high orders small.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import value
from .numeric import DomainError

__all__ = [
    "KERNELS",
    "ChebFilter",
    "cheb_nodes",
    "cheb_T",
    "cpi_coefficients",
    "cheb_series",
    "gibbs_factors",
    "kpm_eval",
    "kernel_polynomial_loss",
    "step_demo",
    "write_step_demo",
]

KERNELS = ("dirichlet", "fejer", "jackson", "lanczos", "lorentz", "vekic", "wang")


def _check_domain(x, what="argument"):
    x = np.asarray(x)
    if x.size and (np.iscomplexobj(x) or np.max(np.abs(x)) > 1.0):
        raise DomainError(f"{what} must be real and lie in [-1, 1]")


def cheb_nodes(K: int) -> np.ndarray:
    """The ``K + 1`` Chebyshev points ``cos(pi (j + 1/2) / (K + 1))``, decreasing."""
    j = np.arange(K + 1)
    return np.cos(np.pi * (j + 0.5) / (K + 1))


def cheb_T(K: int, x) -> np.ndarray:
    """Rows ``T_0(x) .. T_K(x)`` from the three-term recurrence; shape ``(K+1, len(x))``."""
    if K < 0:
        raise ValueError(f"order must be non-negative, got {K}")
    x = np.asarray(x, dtype=np.float64)
    _check_domain(x)
    T = np.empty((K + 1,) + x.shape)
    T[0] = 1.0
    if K >= 1:
        T[1] = x
    for k in range(2, K + 1):
        T[k] = 2.0 * x * T[k - 1] - T[k - 2]
    return T


def cpi_coefficients(f, K: int) -> np.ndarray:
    """Interpolation coefficients ``mu_k = 2/(K+1) sum_j f(x_j) T_k(x_j)``.

    Paired with :func:`cheb_series`, ``p(x) = mu_0/2 + sum_k mu_k T_k(x)``
    interpolates ``f`` at the Chebyshev nodes.
    """
    nodes = cheb_nodes(K)
    fx = np.asarray(f(nodes), dtype=np.float64)
    if not np.all(np.isfinite(fx)):
        raise FloatingPointError("function is not finite on the Chebyshev nodes")
    return (2.0 / (K + 1)) * cheb_T(K, nodes) @ fx


def cheb_series(mu, x, g=None) -> np.ndarray:
    """Evaluate ``g_0 mu_0 / 2 + sum_k g_k mu_k T_k(x)`` by explicit matrix product."""
    mu = np.asarray(mu)
    g = np.ones_like(mu) if g is None else np.asarray(g)
    c = g * mu
    c = np.concatenate([[0.5 * c[0]], c[1:]])
    return c @ cheb_T(len(mu) - 1, x)


def gibbs_factors(kernel: str, K: int, M: int = 3, xi: float = 4.0,
                  a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Damping vector ``g_0 .. g_K`` for a named kernel.

    Parameters
    ----------
    kernel : str
        One of ``KERNELS``.
    K : int
        Truncation order.
    M : int
        Lanczos exponent (positive integer).
    xi : float
        Lorentz width (non-zero).
    a, b : float
        Wang scale and exponent (both positive).
    """
    if K < 0:
        raise ValueError(f"order must be non-negative, got {K}")
    k = np.arange(K + 1, dtype=np.float64)
    r = k / (K + 1)
    kernel = kernel.lower()
    if kernel == "dirichlet":
        g = np.ones(K + 1)
    elif kernel == "fejer":
        g = 1.0 - r
    elif kernel == "jackson":
        q = np.pi / (K + 2)
        g = ((K + 2 - k) * np.cos(k * q) + np.sin(k * q) / np.tan(q)) / (K + 2)
    elif kernel == "lanczos":
        if int(M) != M or M < 1:
            raise ValueError(f"Lanczos exponent must be a positive integer, got {M}")
        g = np.sinc(r) ** int(M)  # np.sinc(t) = sin(pi t) / (pi t)
    elif kernel == "lorentz":
        if xi == 0 or not np.isfinite(xi):
            raise ValueError(f"Lorentz width must be finite and non-zero, got {xi}")
        g = np.sinh(xi * (1.0 - r)) / np.sinh(xi)
    elif kernel == "vekic":
        g = np.ones(K + 1)
        rr = r[1:]
        u = (rr - 0.5) / (rr * (1.0 - rr))
        # 1/2 - tanh(u)/2 == 1 / (1 + exp(2u)), which stays positive for large u
        g[1:] = np.exp(-np.logaddexp(0.0, 2.0 * u))
    elif kernel == "wang":
        if not (a > 0 and b > 0):
            raise ValueError(f"Wang parameters must be positive, got a={a}, b={b}")
        g = np.exp(-((a * r) ** b))
    else:
        raise ValueError(f"unknown kernel {kernel!r}; choose from {', '.join(KERNELS)}")
    return g


@dataclass
class ChebFilter:
    """Damped Chebyshev filter with coefficients ``w`` (length ``K + 1``)."""

    K: int
    w: object = None
    kernel: str = "dirichlet"
    M: int = 3
    xi: float = 4.0
    a: float = 1.0
    b: float = 1.0
    g: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.w is None:
            self.w = identity_coefficients(self.K)
        if value(self.w).shape != (self.K + 1,):
            raise ValueError(f"expected {self.K + 1} coefficients, got shape {value(self.w).shape}")
        self.g = gibbs_factors(self.kernel, self.K, self.M, self.xi, self.a, self.b)

    def with_weights(self, w) -> "ChebFilter":
        return ChebFilter(self.K, w, self.kernel, self.M, self.xi, self.a, self.b)


def identity_coefficients(K: int) -> np.ndarray:
    """``w_1 = 1`` and zeros elsewhere, so that the filter is ``p(x) = x``."""
    w = np.zeros(K + 1)
    if K >= 1:
        w[1] = 1.0
    return w


def kpm_eval(f: ChebFilter, lam):
    """``g_0 w_0 / 2 + sum_{k>=1} g_k w_k T_k(lam)`` via the running recurrence."""
    _check_domain(value(lam), "eigenphase")
    w, g = f.w, f.g
    t_prev = np.ones(np.shape(value(lam)))
    out = t_prev * (0.5 * g[0]) * w[0]
    if f.K == 0:
        return out
    t_cur = lam
    out = out + t_cur * (g[1] * w[1])
    for k in range(2, f.K + 1):
        t_prev, t_cur = t_cur, 2.0 * lam * t_cur - t_prev
        out = out + t_cur * (g[k] * w[k])
    return out


def kernel_polynomial_loss(f) -> object:
    """Penalty ``sum_{k>=1} pi k^2 |w_k|^2``; accepts a filter or a coefficient vector."""
    w = f.w if isinstance(f, ChebFilter) else f
    K = value(w).shape[0] - 1
    if K < 1:
        return np.asarray(0.0) if not isinstance(w, ad.Var) else ad.sum(ad.abs2(w)) * 0.0
    weights = np.pi * np.arange(1, K + 1, dtype=np.float64) ** 2
    return ad.sum(ad.abs2(w[1:]) * weights)


# ---------------------------------------------------------------------------
# step-function demo


def step_demo(K: int = 50, points: int = 2001) -> dict[str, np.ndarray]:
    """Approximate ``sign(x)`` with every kernel on a uniform grid over ``[-1, 1]``."""
    if K < 1:
        raise ValueError(f"order must be at least 1, got {K}")
    x = np.linspace(-1.0, 1.0, points)
    mu = cpi_coefficients(np.sign, K)
    cols = {"x": x, "f(x)": np.sign(x)}
    for name in KERNELS:
        cols[f"p_{name}"] = cheb_series(mu, x, gibbs_factors(name, K))
    return cols


def write_step_demo(path, K: int = 50, points: int = 2001) -> dict[str, np.ndarray]:
    cols = step_demo(K, points)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(cols))
    for row in zip(*cols.values()):
        writer.writerow([repr(float(v)) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return cols
