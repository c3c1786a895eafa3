"""Structured unitary transform built from two chains of Givens rotations.

The transform is ``Phi = D @ H_l @ H_u @ P`` where

* ``P`` is a stride permutation (identity when ``m == 1``),
* ``H_u = G_1 G_2 ... G_{N-1}`` is an upper unitary Hessenberg matrix,
* ``H_l = G_{N-1} ... G_2 G_1`` is a lower unitary Hessenberg matrix,
* ``D = diag(exp(2*pi*i*theta))``.

``G_j`` acts on coordinates ``(j, j+1)`` with the 2x2 block
``[[conj(c), -s], [conj(s), c]]``.  Applying either Hessenberg factor is a
first-order linear recurrence along the sequence, evaluated with a parallel
prefix scan, so one transform costs O(N log N) operations at most.

All functions accept plain arrays or :class:`~synvolution.autodiff.Var`
inputs; with the latter every step is recorded for reverse mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import value
from .numeric import DomainError, Rng, ShapeError

__all__ = [
    "GivensChain",
    "DhhpParams",
    "ScanCoeffs",
    "givens_coeffs",
    "conj_transpose_coeffs",
    "pscan_forward",
    "pscan",
    "apply_hessenberg_upper",
    "apply_hessenberg_lower",
    "stride_permute",
    "dhhp_forward",
    "dhhp_inverse",
    "dhhp_dense_matrix",
    "init_dhhp",
    "fit_unitary_target",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 1024


# ---------------------------------------------------------------------------
# parallel scan


@dataclass
class ScanCoeffs:
    """Inputs of the recurrence ``Y_t = A_t * Y_{t-1} + X_t``."""

    A: np.ndarray  # (batch, length)
    X: np.ndarray  # (batch, length, features)
    Y_init: np.ndarray  # (batch, features)

    def __post_init__(self):
        a, x, y0 = value(self.A), value(self.X), value(self.Y_init)
        if a.ndim != 2 or x.ndim != 3 or y0.ndim != 2:
            raise ShapeError(f"expected A (b,n), X (b,n,d), Y_init (b,d); got {a.shape}, {x.shape}, {y0.shape}")
        if a.shape != x.shape[:2] or y0.shape != (x.shape[0], x.shape[2]):
            raise ShapeError(f"scan extents disagree: A {a.shape}, X {x.shape}, Y_init {y0.shape}")


def _expand(A: np.ndarray, X: np.ndarray):
    """Inclusive scan by recursive pairing.

    Returns ``(A_star, X_star)`` with ``A_star[t] = A[t] * ... * A[0]`` and
    ``X_star`` the recurrence solution started from zero.
    """
    n = A.shape[1]
    if n == 1:
        return A.copy(), X.copy()
    T = 2 * (n // 2)
    a0, a1 = A[:, 0:T:2], A[:, 1:T:2]
    x0, x1 = X[:, 0:T:2], X[:, 1:T:2]
    a_pair, x_pair = _expand(a1 * a0, x1 + a1[..., None] * x0)
    A_star = np.empty(A.shape, dtype=np.result_type(A, a_pair))
    X_star = np.empty(X.shape, dtype=np.result_type(X, x_pair))
    A_star[:, 1:T:2] = a_pair
    X_star[:, 1:T:2] = x_pair
    A_star[:, 0] = A[:, 0]
    X_star[:, 0] = X[:, 0]
    A_star[:, 2:T:2] = a0[:, 1:] * a_pair[:, :-1]
    X_star[:, 2:T:2] = x0[:, 1:] + a0[:, 1:, None] * x_pair[:, :-1]
    if T < n:
        A_star[:, -1] = A[:, -1] * A_star[:, -2]
        X_star[:, -1] = X[:, -1] + A[:, -1, None] * X_star[:, -2]
    return A_star, X_star


_PSCAN = ad.primitive("pscan")


def pscan(A, X, Y_init):
    """Differentiable scan of ``Y_t = A_t * Y_{t-1} + X_t`` with ``Y_{-1} = Y_init``.

    Shapes: ``A`` (b, n), ``X`` (b, n, d), ``Y_init`` (b, d).
    """
    ScanCoeffs(A, X, Y_init)
    Av, Xv, Yv = value(A), value(X), value(Y_init)
    A_star, X_star = _expand(Av, Xv)
    out = A_star[..., None] * Yv[:, None, :] + X_star

    def vjp(G):
        n = Av.shape[1]
        g_init = np.sum(np.conj(A_star)[..., None] * G, axis=1)
        # reverse accumulation R_t = G_t + conj(A_{t+1}) R_{t+1}
        B = np.zeros_like(Av, dtype=np.result_type(Av, np.complex128))
        B[:, 1:] = np.conj(Av[:, :0:-1])
        _, Rf = _expand(B, G[:, ::-1])
        R = Rf[:, ::-1]
        prev = np.empty_like(out)
        prev[:, 0] = Yv
        if n > 1:
            prev[:, 1:] = out[:, :-1]
        g_A = np.sum(np.conj(prev) * R, axis=-1)
        return (ad.unbroadcast(g_A, Av), ad.unbroadcast(R, Xv), ad.unbroadcast(g_init, Yv))

    return ad._record(_PSCAN, out, (A, X, Y_init), vjp)


def pscan_forward(sc: ScanCoeffs):
    return pscan(sc.A, sc.X, sc.Y_init)


# ---------------------------------------------------------------------------
# Givens chains


@dataclass
class GivensChain:
    """Angles of ``N-1`` Givens rotations and their cached 2x2 block entries."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    ii: object = field(default=None, repr=False)
    ij: object = field(default=None, repr=False)
    ji: object = field(default=None, repr=False)
    jj: object = field(default=None, repr=False)

    def __len__(self):
        return value(self.alpha).shape[0]

    def blocks(self) -> np.ndarray:
        """Stacked 2x2 blocks, shape ``(N-1, 2, 2)``."""
        return np.stack([np.stack([value(self.ii), value(self.ij)], -1),
                         np.stack([value(self.ji), value(self.jj)], -1)], -2)


def givens_coeffs(alpha, beta, gamma) -> GivensChain:
    """Block entries ``conj(c), -s, conj(s), c`` from angle vectors.

    ``c = exp(i(alpha+beta)/2) cos(gamma/2)`` and
    ``s = exp(i(alpha-beta)/2) sin(gamma/2)``.
    """
    shapes = {value(alpha).shape, value(beta).shape, value(gamma).shape}
    if len(shapes) != 1 or value(alpha).ndim != 1:
        raise ShapeError(f"angle vectors must be 1-D and equal length, got {sorted(shapes)}")
    half_sum = (alpha + beta) * 0.5
    half_diff = (alpha - beta) * 0.5
    cos_g = ad.cos(gamma * 0.5)
    sin_g = ad.sin(gamma * 0.5)
    return GivensChain(
        alpha, beta, gamma,
        ii=ad.exp_i(half_sum, -1.0) * cos_g,
        ij=-(ad.exp_i(half_diff) * sin_g),
        ji=ad.exp_i(half_diff, -1.0) * sin_g,
        jj=ad.exp_i(half_sum) * cos_g,
    )


def conj_transpose_coeffs(g: GivensChain) -> GivensChain:
    """Coefficients of the conjugate-transposed blocks.

    For blocks of this family ``B^H`` is obtained by swapping the diagonal
    and negating the off-diagonal entries.
    """
    return GivensChain(g.alpha, g.beta, g.gamma, ii=g.jj, ij=-g.ij, ji=-g.ji, jj=g.ii)


# ---------------------------------------------------------------------------
# shape normalisation


def _to_bnd(x):
    """View ``x`` as complex (batch, length, features); returns a restore callable."""
    xv = value(x)
    if not np.iscomplexobj(xv):
        x = ad.to_complex(x)
    shape = xv.shape
    if xv.ndim == 1:
        x = ad.reshape(x, (1, shape[0], 1))
    elif xv.ndim == 2:
        x = ad.reshape(x, (1,) + shape)
    elif xv.ndim != 3:
        raise ShapeError(f"expected 1-3 axes, got shape {shape}")

    def restore(y):
        return ad.reshape(y, shape) if len(shape) != 3 else y

    return x, restore


def _col(v):
    """(n,) coefficient vector -> (1, n, 1) for broadcasting against (b, n, d)."""
    return ad.reshape(v, (1, value(v).shape[0], 1))


def _check_chain(g: GivensChain, n: int):
    if len(g) != n - 1:
        raise ShapeError(f"chain of {len(g)} rotations does not fit length {n}")


def _scan_coeff(rest, batch: int):
    """Prepend a zero to ``rest`` and broadcast to (batch, n)."""
    coeff = ad.concat([np.zeros(1, dtype=np.complex128), rest], axis=0)
    return ad.broadcast_to(ad.reshape(coeff, (1, value(coeff).shape[0])), (batch, value(coeff).shape[0]))


def _upper(g: GivensChain, x):
    b, n, d = value(x).shape
    if n == 1:
        return x
    head = x[:, :-1]
    # the last coordinate enters the backward recurrence untouched
    x_ = ad.concat([_col(g.ii) * head, x[:, -1:]], axis=1)
    coeff = _scan_coeff(ad.flip(g.ij, 0), b)
    h = ad.flip(pscan(coeff, ad.flip(x_, 1), np.zeros((b, d), dtype=np.complex128)), 1)
    tail = _col(g.ji) * head + _col(g.jj) * h[:, 1:]
    return ad.concat([h[:, :1], tail], axis=1)


def _lower(g: GivensChain, y):
    b, n, d = value(y).shape
    if n == 1:
        return y
    # the first coordinate enters the forward recurrence untouched
    y_ = ad.concat([y[:, :1], _col(g.jj) * y[:, 1:]], axis=1)
    coeff = _scan_coeff(g.ji, b)
    h = pscan(coeff, y_, np.zeros((b, d), dtype=np.complex128))
    head = _col(g.ii) * h[:, :-1] + _col(g.ij) * y[:, 1:]
    return ad.concat([head, h[:, -1:]], axis=1)


def apply_hessenberg_upper(g: GivensChain, x):
    """``H_u @ x`` with ``H_u = G_1 G_2 ... G_{N-1}`` (x along axis -2 if 2-D/3-D, else 1-D)."""
    xb, restore = _to_bnd(x)
    _check_chain(g, value(xb).shape[1])
    return restore(_upper(g, xb))


def apply_hessenberg_lower(g: GivensChain, x):
    """``H_l @ x`` with ``H_l = G_{N-1} ... G_2 G_1``."""
    xb, restore = _to_bnd(x)
    _check_chain(g, value(xb).shape[1])
    return restore(_lower(g, xb))


def _stride_index(n: int, m: int) -> np.ndarray:
    if m < 1 or n % m:
        raise DomainError(f"permutation factor m={m} must divide N={n}")
    return np.arange(n).reshape(n // m, m).T.ravel()


def stride_permute(x, m: int, inverse: bool = False):
    """Stride permutation sending index ``q*m + r`` to ``r*(N/m) + q``.

    Accepts (n,), (n, d) or (b, n, d) inputs; permutes the length axis.
    """
    xv = value(x)
    axis = 0 if xv.ndim == 1 else xv.ndim - 2
    perm = _stride_index(xv.shape[axis], m)
    if m == 1:
        return x
    if inverse:
        perm = np.argsort(perm)
    idx = (slice(None),) * axis + (perm,)
    return ad.getitem(x, idx)


# ---------------------------------------------------------------------------
# the full transform


@dataclass
class DhhpParams:
    """Parameters of one 1-DHHP unitary matrix of size ``N``."""

    lower: GivensChain
    upper: GivensChain
    theta: np.ndarray
    m: int = 1

    def __post_init__(self):
        n = value(self.theta).shape[0]
        _check_chain(self.lower, n)
        _check_chain(self.upper, n)
        _stride_index(n, self.m)

    @property
    def n(self) -> int:
        return value(self.theta).shape[0]

    @classmethod
    def from_angles(cls, lower, upper, theta, m: int = 1) -> "DhhpParams":
        """Build from ``(alpha, beta, gamma)`` triples for each chain."""
        return cls(givens_coeffs(*lower), givens_coeffs(*upper), theta, m)

    @classmethod
    def identity(cls, n: int, m: int = 1) -> "DhhpParams":
        z = np.zeros(max(n - 1, 0))
        return cls.from_angles((z, z, z), (z, z, z), np.zeros(n), m)

    def angle_arrays(self) -> dict[str, np.ndarray]:
        return {
            "alpha_l": value(self.lower.alpha), "beta_l": value(self.lower.beta),
            "gamma_l": value(self.lower.gamma), "alpha_u": value(self.upper.alpha),
            "beta_u": value(self.upper.beta), "gamma_u": value(self.upper.gamma),
            "theta": value(self.theta),
        }


def init_dhhp(n: int, rng: Rng, m: int = 1) -> DhhpParams:
    """Random parameters: all angles and ``2*pi*theta`` uniform on ``[0, 2*pi)``."""
    draw = lambda: rng.uniform(0.0, 2 * np.pi, n - 1)  # noqa: E731
    lower = (draw(), draw(), draw())
    upper = (draw(), draw(), draw())
    theta = rng.uniform(0.0, 1.0, n)
    return DhhpParams.from_angles(lower, upper, theta, m)


def _check_length(p: DhhpParams, xb):
    n = value(xb).shape[1]
    if n != p.n:
        raise ShapeError(f"signal length {n} does not match transform size {p.n}")


def dhhp_forward(p: DhhpParams, x):
    """``Phi @ x``: permute, upper chain, lower chain, diagonal phases."""
    xb, restore = _to_bnd(x)
    _check_length(p, xb)
    y = stride_permute(xb, p.m)
    y = _upper(p.upper, y)
    y = _lower(p.lower, y)
    y = _col(ad.exp_i(p.theta, 2 * np.pi)) * y
    return restore(y)


def dhhp_inverse(p: DhhpParams, x):
    """``Phi^H @ x``, reusing the forward recipe with conjugate-transposed blocks."""
    xb, restore = _to_bnd(x)
    _check_length(p, xb)
    y = _col(ad.exp_i(p.theta, -2 * np.pi)) * xb
    y = _upper(conj_transpose_coeffs(p.lower), y)
    y = _lower(conj_transpose_coeffs(p.upper), y)
    y = stride_permute(y, p.m, inverse=True)
    return restore(y)


def dhhp_dense_matrix(p: DhhpParams) -> np.ndarray:
    """Explicit ``N x N`` matrix, assembled factor by factor (test oracle)."""
    n = p.n
    if n > DENSE_LIMIT:
        raise DomainError(f"dense construction limited to N <= {DENSE_LIMIT}, got {n}")
    lower, upper = p.lower.blocks(), p.upper.blocks()

    H_u = np.eye(n, dtype=np.complex128)
    for j in range(n - 1):
        H_u[:, j:j + 2] = H_u[:, j:j + 2] @ upper[j]
    H_l = np.eye(n, dtype=np.complex128)
    for j in range(n - 2, -1, -1):
        H_l[:, j:j + 2] = H_l[:, j:j + 2] @ lower[j]

    P = np.zeros((n, n))
    for q in range(n // p.m):
        for r in range(p.m):
            P[r * (n // p.m) + q, q * p.m + r] = 1.0
    D = np.diag(np.exp(2j * np.pi * value(p.theta)))
    return D @ H_l @ H_u @ P


# ---------------------------------------------------------------------------
# fitting a target unitary


def _params_from_flat(flat, n: int, m: int = 1) -> DhhpParams:
    k = n - 1
    parts = [flat[i * k:(i + 1) * k] for i in range(6)]
    return DhhpParams.from_angles(parts[0:3], parts[3:6], flat[6 * k:], m)


def fit_unitary_target(target, iters: int = 5000, lr: float = 0.05, seed: int = 0,
                       restarts: int = 8, tol: float = 1e-9):
    """Fit 1-DHHP angles so that the dense transform matches ``target``.

    Minimises ``||Phi - target||_F^2`` with Adam steps on all angles and
    diagonal phases.  The first attempt starts from zero angles; if the
    residual stalls, further attempts start from random angles.  The total
    number of gradient steps across attempts never exceeds ``iters``.

    Returns
    -------
    params : DhhpParams
        Best parameters found.
    residual : float
        Frobenius norm ``||Phi - target||_F`` at ``params``.
    """
    target = np.asarray(target, dtype=np.complex128)
    n = target.shape[0]
    if target.shape != (n, n):
        raise ShapeError(f"target must be square, got {target.shape}")
    if np.linalg.norm(target @ target.conj().T - np.eye(n)) > 1e-8:
        raise DomainError("target matrix is not unitary")
    rng = Rng(seed)
    size = 6 * (n - 1) + n
    eye = np.eye(n, dtype=np.complex128)

    def loss_and_grad(flat):
        tape = ad.Tape()
        leaf = tape.leaf(flat)
        phi = dhhp_forward(_params_from_flat(leaf, n), eye)
        loss = ad.sum(ad.abs2(phi - target))
        grads = tape.backward(loss)
        return float(loss.value), grads.get(leaf.index, np.zeros(size))

    best_flat, best_res = np.zeros(size), np.inf
    budget = iters
    attempt = 0
    while budget > 0 and attempt < max(restarts, 1):
        flat = np.zeros(size) if attempt == 0 else rng.uniform(0.0, 2 * np.pi, size)
        m1, m2 = np.zeros(size), np.zeros(size)
        stall_ref, res = np.inf, np.inf
        for t in range(1, budget + 1):
            loss, g = loss_and_grad(flat)
            res = np.sqrt(loss)
            if res < best_res:
                best_res, best_flat = res, flat.copy()
            if res < tol:
                break
            m1 = 0.9 * m1 + 0.1 * g
            m2 = 0.999 * m2 + 0.001 * g * g
            flat = flat - lr * (m1 / (1 - 0.9 ** t)) / (np.sqrt(m2 / (1 - 0.999 ** t)) + 1e-12)
            if t % 500 == 0:
                # restart when the last 500 steps barely moved the residual
                if res > 0.5 * stall_ref and res > 1e-2:
                    break
                stall_ref = res
        budget -= t
        attempt += 1
        if best_res < tol:
            break
    if best_res < np.inf:
        loss, _ = loss_and_grad(best_flat)
        best_res = np.sqrt(loss)
    return _params_from_flat(best_flat, n), float(best_res)
