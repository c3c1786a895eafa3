"""Operations covered by the gradient sweep, each with a random-input factory.

``make_inputs(rng, variant)`` returns keyword arguments for the op; the
variant index selects one of several shapes.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .gradcheck import register
from .kpm import ChebFilter, kernel_polynomial_loss, kpm_eval
from .model import (ModelConfig, baseline_self_attention, converter_forward, gffn, gru_layer,
                    init_params, kernelution, post_scale_norm, synvolution)
from .spectral import SirenParams, eigenphase, siren_forward
from .unitary import DhhpParams, dhhp_forward, dhhp_inverse, pscan

_SHAPES = [(1, 5, 2), (2, 8, 3), (3, 7, 1)]


def _cplx(rng, shape, scale=1.0):
    return scale * (rng.normal(shape) + 1j * rng.normal(shape))


def _angles(rng, n):
    return {f"{a}_{c}": rng.uniform(0.0, 2 * np.pi, n - 1)
            for c in ("l", "u") for a in ("alpha", "beta", "gamma")} | {"theta": rng.uniform(0.0, 1.0, n)}


def _dhhp(kw, m=1):
    return DhhpParams.from_angles((kw["alpha_l"], kw["beta_l"], kw["gamma_l"]),
                                  (kw["alpha_u"], kw["beta_u"], kw["gamma_u"]), kw["theta"], m)


@register("matmul", lambda rng, v: {"a": _cplx(rng, [(3, 3), (2, 4), (4, 1)][v]),
                                    "b": _cplx(rng, [(3, 3), (4, 3), (1, 2)][v])})
def _matmul(a, b):
    return ad.matmul(a, b)


@register("hadamard", lambda rng, v: {"a": _cplx(rng, [(4,), (3, 2), (2, 3, 2)][v]),
                                      "b": _cplx(rng, [(4,), (3, 2), (2, 3, 2)][v])})
def _hadamard(a, b):
    return ad.mul(a, b)


def _scan_inputs(rng, v):
    b, n, d = [(1, 8, 2), (2, 5, 3), (3, 16, 1)][v]
    return {"A": _cplx(rng, (b, n), 0.6), "X": _cplx(rng, (b, n, d)), "Y_init": _cplx(rng, (b, d))}


@register("pscan", _scan_inputs)
def _pscan(A, X, Y_init):
    return pscan(A, X, Y_init)


def _dhhp_inputs(rng, v):
    n, d = [(16, 2), (5, 3), (8, 1)][v]
    return _angles(rng, n) | {"x": _cplx(rng, (n, d))}


@register("dhhp_forward", _dhhp_inputs)
def _dhhp_forward(x, **angles):
    return dhhp_forward(_dhhp(angles), x)


@register("dhhp_inverse", _dhhp_inputs)
def _dhhp_inverse(x, **angles):
    return dhhp_inverse(_dhhp(angles), x)


def _siren_inputs(rng, v):
    n, d, h = [(4, 3, 5), (6, 2, 4), (3, 4, 6)][v]
    return {"X": rng.normal((n, d)), "W1": rng.uniform(-1 / d, 1 / d, (d, h)),
            "b1": rng.uniform(-1 / d, 1 / d, h), "W2": rng.uniform(-1, 1, (h, h)) * np.sqrt(6 / h),
            "b2": rng.uniform(-0.5, 0.5, h)}


@register("siren", _siren_inputs)
def _siren(X, W1, b1, W2, b2):
    return siren_forward(SirenParams(W1, b1, W2, b2), X)


@register("eigenphase", _siren_inputs)
def _eigenphase(X, W1, b1, W2, b2):
    return eigenphase(SirenParams(W1, b1, W2, b2), X)


def _kpm_inputs(rng, v):
    K, n = [(2, 6), (5, 4), (0, 3)][v]
    return {"w": rng.normal(K + 1), "lam": rng.uniform(-0.99, 0.99, n),
            "kernel": ["dirichlet", "jackson", "lorentz"][v]}


@register("kpm_eval", _kpm_inputs)
def _kpm_eval(w, lam, kernel):
    return kpm_eval(ChebFilter(value_len(w) - 1, w, kernel), lam)


def value_len(w):
    return ad.value(w).shape[0]


@register("kpl", lambda rng, v: {"w": rng.normal([3, 6, 2][v])})
def _kpl(w):
    return kernel_polynomial_loss(w)


def _spectral_inputs(rng, v):
    n, d, K = [(8, 2, 2), (5, 3, 3), (16, 1, 1)][v]
    return _angles(rng, n) | {"lam": rng.uniform(-0.99, 0.99, n), "V": _cplx(rng, (n, d)),
                              "w": rng.normal(K + 1) * 0.5}


@register("synvolution", _spectral_inputs)
def _synvolution(lam, V, w, **angles):
    return synvolution(_dhhp(angles), lam, V)


@register("kernelution", _spectral_inputs)
def _kernelution(lam, V, w, **angles):
    return kernelution(_dhhp(angles), ChebFilter(value_len(w) - 1, w, "jackson"), lam, V)


def _gffn_inputs(rng, v):
    n, d, h = [(4, 3, 5), (2, 2, 3), (5, 4, 2)][v]
    Z = _cplx(rng, (n, d)) if v != 1 else np.zeros((n, d), dtype=np.complex128)
    return {"Z": Z, "W_re": rng.normal((d, h)), "W_im": rng.normal((d, h)), "W_o": rng.normal((h, d))}


@register("gffn", _gffn_inputs)
def _gffn(Z, W_re, W_im, W_o):
    return gffn({"W_re": W_re, "W_im": W_im, "W_o": W_o}, Z)


def _norm_inputs(rng, v):
    n, d = [(4, 3), (2, 5), (3, 1)][v]
    return {"Z": _cplx(rng, (n, d)), "residual": rng.normal((n, d)),
            "gain": np.array([1.5]), "zeta": np.array([0.3])}


@register("post_scale_norm", _norm_inputs)
def _post_scale_norm(Z, residual, gain, zeta):
    return post_scale_norm(gain, Z, zeta, residual)


def _gru_inputs(rng, v):
    b, t, f, h = [(2, 5, 3, 4), (1, 3, 2, 2), (3, 4, 1, 3)][v]
    return {"x": rng.normal((b, t, f)), "W_ih": rng.normal((f, 3 * h)) * 0.5,
            "W_hh": rng.normal((h, 3 * h)) * 0.5, "b_ih": rng.normal(3 * h) * 0.1,
            "b_hh": rng.normal(3 * h) * 0.1}


@register("gru", _gru_inputs)
def _gru(x, W_ih, W_hh, b_ih, b_hh):
    return gru_layer(x, W_ih, W_hh, b_ih, b_hh)


@register("cross_entropy", lambda rng, v: {"logits": rng.normal([(4, 3), (2, 2), (5, 4)][v]),
                                           "labels": np.array([[0, 2, 1, 1], [1, 0], [3, 0, 2, 1, 1]][v])})
def _cross_entropy(logits, labels):
    return ad.cross_entropy(logits, labels)


def _attention_inputs(rng, v):
    n, d, h = [(3, 4, 2), (1, 3, 3), (5, 2, 4)][v]
    return {"X": rng.normal((n, d)), "Wq": rng.normal((d, h)), "Wk": rng.normal((d, h)),
            "Wv": rng.normal((d, h))}


@register("self_attention", _attention_inputs)
def _attention(X, Wq, Wk, Wv):
    return baseline_self_attention(Wq, Wk, Wv, X)


_CONVERTER_CFGS = [
    dict(N=8, D=4, D_hid=4, blocks=1, pe="rpe", mechanism="kernelution", vocab=6, num_classes=2),
    dict(N=6, D=3, D_hid=5, blocks=2, pe="ape", mechanism="synvolution", vocab=5, num_classes=3, m=2),
    dict(N=5, D=2, D_hid=3, blocks=1, pe="spe", mechanism="kernelution", vocab=4, num_classes=2,
         kernel="jackson", K=3),
]


def _converter_inputs(rng, v):
    cfg = ModelConfig(**_CONVERTER_CFGS[v], omega0=3.0)
    params = init_params(cfg, rng)
    params = {k: val + 0.1 * rng.normal(val.shape) if k.endswith("w") else val for k, val in params.items()}
    tokens = rng.integers(1, cfg.vocab, (2, cfg.N))
    lengths = np.array([cfg.N, cfg.N - 2])
    tokens[1, -2:] = 0
    return params | {"tokens": tokens, "lengths": lengths, "cfg": cfg}


@register("converter_forward", _converter_inputs)
def _converter(tokens, lengths, cfg, **params):
    return converter_forward(params, cfg, tokens, lengths)
