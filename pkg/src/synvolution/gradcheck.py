"""Finite-difference verification of the hand-written VJPs.

``check_gradient`` builds a fresh tape, runs a registered operation on leaf
copies of its inputs, contracts the output with a random real projection
and compares reverse-mode cotangents with central differences of the same
scalar.  Complex inputs are perturbed along their real and imaginary parts
separately.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .numeric import Rng

__all__ = [
    "GradReport",
    "finite_diff",
    "check_gradient",
    "register",
    "REGISTRY",
    "sweep",
    "broken_vjp",
    "DEFAULT_H",
]

DEFAULT_H = 1e-6


def finite_diff(f: Callable[[np.ndarray], float], theta, h: float = DEFAULT_H) -> np.ndarray:
    """Central-difference gradient of a real scalar function of a flat vector."""
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    theta = np.array(theta, dtype=np.float64, copy=True).ravel()
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta[i]
        theta[i] = orig + h
        f_plus = f(theta)
        theta[i] = orig - h
        f_minus = f(theta)
        theta[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(f"non-finite function value at coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2 * h)
    return grad


@dataclass
class GradReport:
    op: str
    tol: float
    max_rel_error: dict[str, float] = field(default_factory=dict)
    analytic_norm: dict[str, float] = field(default_factory=dict)
    numeric_norm: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.worst < self.tol


@dataclass
class _Entry:
    fn: Callable
    make_inputs: Callable[[Rng, int], dict]
    n_shapes: int = 3


REGISTRY: dict[str, _Entry] = {}


def register(name: str, make_inputs: Callable[[Rng, int], dict], n_shapes: int = 3):
    """Decorator adding ``fn(**inputs)`` to the sweep.

    ``make_inputs(rng, variant)`` returns keyword arguments; float arrays are
    differentiated, everything else is passed through unchanged.
    """

    def wrap(fn):
        REGISTRY[name] = _Entry(fn, make_inputs, n_shapes)
        return fn

    return wrap


def _is_param(v) -> bool:
    return isinstance(v, np.ndarray) and v.dtype.kind in "fc"


def _flatten(inputs: dict):
    """Real parameter vector and the slices that rebuild each float input."""
    layout, chunks = [], []
    for key, v in inputs.items():
        if not _is_param(v):
            continue
        if v.dtype.kind == "c":
            chunks += [v.real.ravel(), v.imag.ravel()]
        else:
            chunks.append(v.ravel())
        layout.append((key, v.shape, v.dtype.kind == "c"))
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    return flat, layout


def _unflatten(flat, layout, base: dict) -> dict:
    out = dict(base)
    pos = 0
    for key, shape, is_complex in layout:
        size = int(np.prod(shape))
        if is_complex:
            re = flat[pos:pos + size]
            im = flat[pos + size:pos + 2 * size]
            out[key] = (re + 1j * im).reshape(shape)
            pos += 2 * size
        else:
            out[key] = flat[pos:pos + size].reshape(shape)
            pos += size
    return out


def _scalarize(out, proj_re, proj_im):
    if np.iscomplexobj(ad.value(out)):
        return ad.sum(ad.real(out) * proj_re) + ad.sum(ad.imag(out) * proj_im)
    return ad.sum(out * proj_re)


def check_gradient(op_name: str, inputs: dict, tol: float = 1e-5, seed: int = 0,
                   h: float = DEFAULT_H) -> GradReport:
    """Compare reverse-mode gradients of a registered op with central differences.

    The relative error per coordinate is ``|a - n| / max(1, |a| + |n|)``.
    """
    if op_name not in REGISTRY:
        raise KeyError(f"operation {op_name!r} is not registered")
    fn = REGISTRY[op_name].fn
    probe = fn(**inputs)
    rng = Rng(seed).generator
    proj_re = rng.standard_normal(np.shape(probe))
    proj_im = rng.standard_normal(np.shape(probe))

    tape = ad.Tape()
    leaves = {k: tape.leaf(v, name=k) if _is_param(v) else v for k, v in inputs.items()}
    loss = _scalarize(fn(**leaves), proj_re, proj_im)
    grads = tape.backward(loss)

    flat, layout = _flatten(inputs)

    def scalar(theta):
        return float(ad.value(_scalarize(fn(**_unflatten(theta, layout, inputs)), proj_re, proj_im)))

    numeric = finite_diff(scalar, flat, h)
    report = GradReport(op_name, tol)
    pos = 0
    for key, shape, is_complex in layout:
        size = int(np.prod(shape))
        g = grads.get(leaves[key].index)
        if g is None:
            g = np.zeros(shape, dtype=np.complex128 if is_complex else np.float64)
        if is_complex:
            analytic = np.concatenate([np.real(g).ravel(), np.imag(g).ravel()])
            width = 2 * size
        else:
            analytic = np.real(g).ravel()
            width = size
        num = numeric[pos:pos + width]
        pos += width
        rel = np.abs(analytic - num) / np.maximum(1.0, np.abs(analytic) + np.abs(num))
        report.max_rel_error[key] = float(rel.max()) if rel.size else 0.0
        report.analytic_norm[key] = float(np.linalg.norm(analytic))
        report.numeric_norm[key] = float(np.linalg.norm(num))
    return report


def sweep(tol: float = 1e-5, seed: int = 0, names=None) -> dict[str, list[GradReport]]:
    """Run ``check_gradient`` over every registered op and each of its shape variants."""
    from . import registry  # noqa: F401  (populates REGISTRY)

    results = {}
    for name in names or sorted(REGISTRY):
        entry = REGISTRY[name]
        reports = []
        for variant in range(entry.n_shapes):
            inputs = entry.make_inputs(Rng(seed).spawn(variant), variant)
            reports.append(check_gradient(name, inputs, tol, seed=seed + variant))
        results[name] = reports
    return results


@contextlib.contextmanager
def broken_vjp(primitive: str = "mul", factor: float = 1.5):
    """Temporarily scale the VJP of one primitive (negative control)."""
    original = ad.Tape.record

    def record(self, op, value, parents, vjp):
        if op == primitive:
            inner = vjp
            vjp = lambda g: tuple(None if x is None else factor * x for x in inner(g))  # noqa: E731
        return original(self, op, value, parents, vjp)

    ad.Tape.record = record
    try:
        yield
    finally:
        ad.Tape.record = original
