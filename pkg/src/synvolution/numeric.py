"""Complex tensor arithmetic and seeded randomness.

Every signal in the package is a ``numpy.ndarray`` of dtype ``complex128``
(or ``float64`` for quantities that are real by construction) with at most
three axes, ordered ``(batch, length, features)``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "DomainError",
    "as_complex",
    "matmul",
    "hadamard",
    "l2_norm",
    "Rng",
    "rng_uniform",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class DomainError(ValueError):
    """Raised when a value lies outside an operation's domain."""


def as_complex(x) -> np.ndarray:
    """Return ``x`` as a complex128 array of rank at most 3."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim > 3:
        raise ShapeError(f"tensors have at most 3 axes, got shape {arr.shape}")
    return arr


def _check_finite(out: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"{what} produced non-finite values")
    return out


def matmul(a, b) -> np.ndarray:
    """Complex matrix product of an ``M x K`` and a ``K x P`` matrix."""
    a = as_complex(a)
    b = as_complex(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return _check_finite(a @ b, "matmul")


def hadamard(a, b) -> np.ndarray:
    """Elementwise product.

    Shapes must match exactly, or ``a`` may be a vector over the rows of a
    matrix ``b`` (``a.shape == (b.shape[-2],)``), which scales each row.
    """
    a = as_complex(a)
    b = as_complex(b)
    if a.shape == b.shape:
        return _check_finite(a * b, "hadamard")
    if a.ndim == 1 and b.ndim >= 2 and a.shape[0] == b.shape[-2]:
        return _check_finite(a[:, None] * b, "hadamard")
    if b.ndim == 1 and a.ndim >= 2 and b.shape[0] == a.shape[-2]:
        return _check_finite(a * b[:, None], "hadamard")
    raise ShapeError(f"incompatible shapes for hadamard: {a.shape} and {b.shape}")


def l2_norm(x) -> float:
    """Euclidean norm over all entries: sqrt of the summed squared moduli."""
    x = as_complex(x).ravel()
    return float(np.sqrt(np.sum(x.real * x.real + x.imag * x.imag)))


class Rng:
    """Counter-based random stream (Philox) keyed by a 64-bit seed.

    Two instances built from the same seed and driven through the same
    sequence of calls yield bit-identical draws.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, lo: float, hi: float, shape) -> np.ndarray:
        return self._gen.uniform(lo, hi, size=shape)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def integers(self, lo: int, hi: int, shape=None) -> np.ndarray:
        return self._gen.integers(lo, hi, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, offset: int) -> "Rng":
        """Independent stream derived from this seed and an integer offset."""
        return Rng((self.seed * 1_000_003 + offset + 1) & 0xFFFFFFFFFFFFFFFF)


def rng_uniform(rng: Rng, shape, lo: float, hi: float) -> np.ndarray:
    """I.i.d. uniform draws on ``[lo, hi)``, returned as a real-valued complex tensor."""
    if not lo < hi:
        raise DomainError(f"invalid range: lo={lo} must be below hi={hi}")
    vals = rng.uniform(lo, hi, shape)
    # float rounding of lo + (hi - lo) * u can land on hi for tiny ranges
    vals = np.where(vals >= hi, np.nextafter(hi, lo), vals)
    return as_complex(vals)
