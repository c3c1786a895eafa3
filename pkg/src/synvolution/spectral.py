"""Data-dependent eigenphases from a two-layer sine network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import value
from .numeric import DomainError, Rng, ShapeError

__all__ = ["SirenParams", "init_siren", "siren_forward", "eigenphase", "unit_eigenvalues"]


@dataclass
class SirenParams:
    W1: object  # (D, D_hid)
    b1: object  # (D_hid,)
    W2: object  # (D_hid, D_hid)
    b2: object  # (D_hid,)
    omega0: float = 30.0
    omega1: float = 1.0

    def __post_init__(self):
        if not (self.omega0 > 0 and self.omega1 > 0):
            raise ValueError("sine frequency scales must be positive")


def init_siren(d_in: int, d_hid: int, rng: Rng, omega0: float = 30.0, omega1: float = 1.0) -> SirenParams:
    """Sinusoidal-network initialisation: first layer U(-1/d, 1/d), second U(+-sqrt(6/d)/omega)."""
    bound2 = np.sqrt(6.0 / d_hid) / omega1
    return SirenParams(
        W1=rng.uniform(-1.0 / d_in, 1.0 / d_in, (d_in, d_hid)),
        b1=rng.uniform(-1.0 / d_in, 1.0 / d_in, d_hid),
        W2=rng.uniform(-bound2, bound2, (d_hid, d_hid)),
        b2=rng.uniform(-bound2, bound2, d_hid),
        omega0=omega0,
        omega1=omega1,
    )


def siren_forward(p: SirenParams, X):
    """``sin(w1 * (sin(w0 * (X W1 + b1)) W2 + b2))`` for real ``X`` of shape (..., N, D)."""
    xv = value(X)
    if np.iscomplexobj(xv):
        raise DomainError("sine network expects a real input")
    if xv.shape[-1] != value(p.W1).shape[0]:
        raise ShapeError(f"input width {xv.shape[-1]} does not match W1 {value(p.W1).shape}")
    h = ad.sin((X @ p.W1 + p.b1) * p.omega0)
    return ad.sin((h @ p.W2 + p.b2) * p.omega1)


def eigenphase(p: SirenParams, X):
    """One phase per position: the sine network's output averaged over its hidden units."""
    return ad.mean(siren_forward(p, X), axis=-1)


def unit_eigenvalues(lam):
    """``exp(i * pi * lam)`` for ``lam`` in ``[-1, 1]``."""
    lv = value(lam)
    if lv.size and (np.iscomplexobj(lv) or np.max(np.abs(lv)) > 1.0):
        raise DomainError("eigenphases must be real and lie in [-1, 1]")
    return ad.exp_i(lam, np.pi)
