"""Converter classifier: spectral token mixing blocks on top of a position encoder.

Parameters live in a flat, ordered ``dict[str, ndarray]`` so that the
optimizer, the checkpoint format and the gradient checker can treat them
uniformly.  Every forward function also accepts a dict of
:class:`~synvolution.autodiff.Var` leaves, which is how gradients are taken.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import value
from .kpm import ChebFilter, identity_coefficients, kpm_eval
from .numeric import Rng, ShapeError
from .spectral import SirenParams, eigenphase, init_siren, unit_eigenvalues
from .unitary import DhhpParams, dhhp_forward, dhhp_inverse

__all__ = [
    "ModelConfig",
    "PE_VARIANTS",
    "MECHANISMS",
    "gru_layer",
    "synvolution",
    "kernelution",
    "gffn",
    "post_scale_norm",
    "sinusoid_table",
    "positional_encode",
    "init_params",
    "count_params",
    "prepare_tokens",
    "converter_forward",
    "baseline_self_attention",
    "block_dhhp",
    "block_filter",
]

PE_VARIANTS = ("nope", "spe", "ape", "rpe")
MECHANISMS = ("synvolution", "kernelution")
NORM_EPS = 1e-8


@dataclass
class ModelConfig:
    vocab: int = 16
    num_classes: int = 2
    N: int = 128
    D: int = 32
    D_hid: int = 128
    K: int = 2
    blocks: int = 2
    m: int = 1
    pe: str = "rpe"
    mechanism: str = "kernelution"
    kernel: str = "dirichlet"
    omega0: float = 30.0
    omega1: float = 1.0
    dropout_pe: float = 0.1
    dropout_value: float = 0.1
    dropout_gffn: float = 0.1
    dropout_eigenvalue: float = 0.1
    dropout_eigenvector: float = 0.1

    def __post_init__(self):
        if self.pe not in PE_VARIANTS:
            raise ValueError(f"unknown position encoder {self.pe!r}; choose from {PE_VARIANTS}")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; choose from {MECHANISMS}")
        if self.N % self.m:
            raise ValueError(f"permutation factor m={self.m} must divide N={self.N}")


# ---------------------------------------------------------------------------
# recurrent position encoder

_GRU = ad.primitive("gru")


def gru_layer(x, W_ih, W_hh, b_ih, b_hh):
    """Single-layer GRU over axis 1 of ``x`` (batch, length, features), zero initial state.

    Gate layout along the last axis of the weights is ``[reset, update, new]``.
    """
    xv, Wi, Wh, bi, bh = (value(a) for a in (x, W_ih, W_hh, b_ih, b_hh))
    B, T, _ = xv.shape
    H = Wh.shape[0]
    if Wi.shape != (xv.shape[2], 3 * H) or Wh.shape != (H, 3 * H):
        raise ShapeError(f"GRU weights {Wi.shape}, {Wh.shape} do not fit input {xv.shape}")
    gi = xv @ Wi + bi  # input-side pre-activations for every step
    hs = np.zeros((B, T + 1, H))
    r = np.empty((B, T, H))
    z = np.empty((B, T, H))
    n = np.empty((B, T, H))
    hn = np.empty((B, T, H))
    for t in range(T):
        gh = hs[:, t] @ Wh + bh
        r[:, t] = 0.5 * (1.0 + np.tanh(0.5 * (gi[:, t, :H] + gh[:, :H])))
        z[:, t] = 0.5 * (1.0 + np.tanh(0.5 * (gi[:, t, H:2 * H] + gh[:, H:2 * H])))
        hn[:, t] = gh[:, 2 * H:]
        n[:, t] = np.tanh(gi[:, t, 2 * H:] + r[:, t] * hn[:, t])
        hs[:, t + 1] = (1.0 - z[:, t]) * n[:, t] + z[:, t] * hs[:, t]
    out = hs[:, 1:].copy()

    def vjp(g):
        g = np.real(g)
        d_gi = np.empty((B, T, 3 * H))
        d_Wh = np.zeros_like(Wh)
        d_bh = np.zeros_like(bh)
        dh = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            dh = dh + g[:, t]
            h_prev = hs[:, t]
            dn = dh * (1.0 - z[:, t])
            dz = dh * (h_prev - n[:, t])
            da_n = dn * (1.0 - n[:, t] ** 2)
            da_r = da_n * hn[:, t] * r[:, t] * (1.0 - r[:, t])
            da_z = dz * z[:, t] * (1.0 - z[:, t])
            d_gh = np.concatenate([da_r, da_z, da_n * r[:, t]], axis=1)
            d_gi[:, t] = np.concatenate([da_r, da_z, da_n], axis=1)
            d_Wh += h_prev.T @ d_gh
            d_bh += d_gh.sum(axis=0)
            dh = dh * z[:, t] + d_gh @ Wh.T
        d_x = d_gi @ Wi.T
        d_Wi = np.einsum("btf,btg->fg", xv, d_gi)
        d_bi = d_gi.sum(axis=(0, 1))
        return d_x, d_Wi, d_Wh, d_bi, d_bh

    return ad._record(_GRU, out, (x, W_ih, W_hh, b_ih, b_hh), vjp)


def sinusoid_table(N: int, D: int) -> np.ndarray:
    """Fixed encodings: ``sin`` on even channels, ``cos`` on odd channels."""
    pos = np.arange(N)[:, None]
    i = np.arange(D)[None, :]
    rate = 1.0 / np.power(10000.0, (2 * (i // 2)) / D)
    return np.where(i % 2 == 0, np.sin(pos * rate), np.cos(pos * rate))


def positional_encode(variant: str, params: dict, E):
    """Apply a position encoder to embeddings ``E`` of shape (batch, N, D).

    ``nope`` returns ``E``; ``spe`` adds sinusoids; ``ape`` adds the learned
    table ``params['pe.table']``; ``rpe`` runs a two-layer GRU and returns its
    hidden sequence.
    """
    variant = variant.lower()
    N, D = value(E).shape[-2:]
    if variant == "nope":
        return E
    if variant == "spe":
        return E + sinusoid_table(N, D)
    if variant == "ape":
        return E + params["pe.table"][:N]
    if variant == "rpe":
        h = E
        for layer in range(2):
            pre = f"pe.gru{layer}."
            h = gru_layer(h, params[pre + "W_ih"], params[pre + "W_hh"],
                          params[pre + "b_ih"], params[pre + "b_hh"])
        return h
    raise ValueError(f"unknown position encoder {variant!r}; choose from {PE_VARIANTS}")


# ---------------------------------------------------------------------------
# spectral mixing


def _modulate(spectrum, S):
    """Scale every feature column of ``S`` (..., N, D) by ``spectrum`` (..., N)."""
    sv = value(spectrum)
    return ad.reshape(spectrum, sv.shape + (1,)) * S


def synvolution(dhhp: DhhpParams, lam, V):
    """``Phi^H [exp(i pi lam) * (Phi V)]`` for a value matrix ``V`` (N, D) or (B, N, D)."""
    return dhhp_inverse(dhhp, _modulate(unit_eigenvalues(lam), dhhp_forward(dhhp, V)))


def kernelution(dhhp: DhhpParams, filt: ChebFilter, lam, V):
    """Synvolution whose eigenphases first pass through the damped Chebyshev filter."""
    phase = kpm_eval(filt, lam)
    return dhhp_inverse(dhhp, _modulate(ad.exp_i(phase, np.pi), dhhp_forward(dhhp, V)))


def gffn(p: dict, Z):
    """``[softplus(Re(Z) W_re) * tanh(Im(Z) W_im)] W_o``; the result is real."""
    zv = value(Z)
    if zv.shape[-1] != value(p["W_re"]).shape[0]:
        raise ShapeError(f"input width {zv.shape[-1]} does not match W_re {value(p['W_re']).shape}")
    if np.iscomplexobj(zv):
        re, im = ad.real(Z), ad.imag(Z)
    else:
        re, im = Z, np.zeros_like(zv)
    gate = ad.softplus(re @ p["W_re"]) * ad.tanh(im @ p["W_im"])
    return gate @ p["W_o"]


def post_scale_norm(gain, Z, zeta=0.5, residual=None):
    """ScaleNorm of ``residual + zeta Re(Z) + (1 - zeta) Im(Z)`` (or ``residual + Z`` for real ``Z``).

    Each position (last axis) is rescaled to norm ``gain``; rows with norm
    below ``1e-8`` are divided by ``1e-8`` instead.
    """
    if np.iscomplexobj(value(Z)):
        mixed = ad.real(Z) * zeta + ad.imag(Z) * (1.0 - zeta)
    else:
        mixed = Z
    R = mixed if residual is None else residual + mixed
    sumsq = ad.sum(R * R, axis=-1, keepdims=True)
    norm = ad.sqrt(ad.maximum(sumsq, NORM_EPS ** 2))
    return R * (gain / norm)


# ---------------------------------------------------------------------------
# parameters


def init_params(cfg: ModelConfig, rng: Rng) -> dict[str, np.ndarray]:
    """Fresh parameters in declaration order."""
    D, H, N = cfg.D, cfg.D_hid, cfg.N
    p: dict[str, np.ndarray] = {"embed": rng.normal((cfg.vocab, D))}
    if cfg.pe == "ape":
        p["pe.table"] = rng.normal((N, D), 0.02)
    elif cfg.pe == "rpe":
        bound = 1.0 / np.sqrt(D)
        for layer in range(2):
            pre = f"pe.gru{layer}."
            p[pre + "W_ih"] = rng.uniform(-bound, bound, (D, 3 * D))
            p[pre + "W_hh"] = rng.uniform(-bound, bound, (D, 3 * D))
            p[pre + "b_ih"] = rng.uniform(-bound, bound, 3 * D)
            p[pre + "b_hh"] = rng.uniform(-bound, bound, 3 * D)
    xavier = lambda a, b: rng.uniform(-np.sqrt(6.0 / (a + b)), np.sqrt(6.0 / (a + b)), (a, b))  # noqa: E731
    for i in range(cfg.blocks):
        pre = f"blocks.{i}."
        p[pre + "Wv"] = xavier(D, D)
        for chain in ("l", "u"):
            for angle in ("alpha", "beta", "gamma"):
                p[f"{pre}{angle}_{chain}"] = rng.uniform(0.0, 2 * np.pi, N - 1)
        p[pre + "theta"] = rng.uniform(0.0, 1.0, N)
        s = init_siren(D, H, rng, cfg.omega0, cfg.omega1)
        p[pre + "siren.W1"], p[pre + "siren.b1"] = s.W1, s.b1
        p[pre + "siren.W2"], p[pre + "siren.b2"] = s.W2, s.b2
        p[pre + "w"] = identity_coefficients(cfg.K)
        p[pre + "gffn.W_re"] = xavier(D, H)
        p[pre + "gffn.W_im"] = xavier(D, H)
        p[pre + "gffn.W_o"] = xavier(H, D)
        p[pre + "norm1.g"] = np.full(1, np.sqrt(D))
        p[pre + "norm2.g"] = np.full(1, np.sqrt(D))
        p[pre + "zeta"] = np.full(1, 0.5)
    p["head.W"] = xavier(D, cfg.num_classes)
    p["head.b"] = np.zeros(cfg.num_classes)
    return p


def count_params(params: dict) -> int:
    return int(sum(value(v).size for v in params.values()))


def block_dhhp(params: dict, i: int, cfg: ModelConfig) -> DhhpParams:
    pre = f"blocks.{i}."
    return DhhpParams.from_angles(
        (params[pre + "alpha_l"], params[pre + "beta_l"], params[pre + "gamma_l"]),
        (params[pre + "alpha_u"], params[pre + "beta_u"], params[pre + "gamma_u"]),
        params[pre + "theta"], cfg.m)


def block_filter(params: dict, i: int, cfg: ModelConfig) -> ChebFilter:
    return ChebFilter(cfg.K, params[f"blocks.{i}.w"], cfg.kernel)


def _block_siren(params: dict, i: int, cfg: ModelConfig) -> SirenParams:
    pre = f"blocks.{i}.siren."
    return SirenParams(params[pre + "W1"], params[pre + "b1"], params[pre + "W2"],
                       params[pre + "b2"], cfg.omega0, cfg.omega1)


# ---------------------------------------------------------------------------
# forward pass


def prepare_tokens(seqs, N: int, truncate: bool = False):
    """Pad id sequences with 0 to length ``N``; returns ``(tokens, lengths)``."""
    tokens = np.zeros((len(seqs), N), dtype=np.int64)
    lengths = np.zeros(len(seqs), dtype=np.int64)
    for row, s in enumerate(seqs):
        s = np.asarray(s, dtype=np.int64)
        if len(s) > N:
            if not truncate:
                raise ValueError(f"sequence {row} has length {len(s)} > N={N}; pass truncate=True")
            s = s[:N]
        tokens[row, :len(s)] = s
        lengths[row] = len(s)
    return tokens, lengths


def _dropout(x, rate: float, rng: Rng | None, rescale: bool = True):
    if rng is None or rate <= 0.0:
        return x
    keep = rng.uniform(0.0, 1.0, np.shape(value(x))) >= rate
    mask = keep / (1.0 - rate) if rescale else keep.astype(np.float64)
    return x * mask


def converter_forward(params: dict, cfg: ModelConfig, tokens, lengths=None, rng: Rng | None = None):
    """Class logits for a batch of token ids.

    Parameters
    ----------
    params : dict
        Arrays (or tape leaves) as produced by :func:`init_params`.
    cfg : ModelConfig
    tokens : int array (batch, N)
        Padded ids; 0 is the padding id.
    lengths : int array (batch,), optional
        Valid prefix length of each row; defaults to the full width.
    rng : Rng, optional
        Enables dropout when given (training mode).
    """
    tokens = np.asarray(tokens)
    if tokens.ndim != 2 or tokens.shape[1] != cfg.N:
        raise ShapeError(f"tokens must have shape (batch, {cfg.N}), got {tokens.shape}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab):
        raise ValueError(f"token id out of range for vocabulary of {cfg.vocab}")
    B = tokens.shape[0]
    lengths = np.full(B, cfg.N) if lengths is None else np.asarray(lengths)
    mask = (np.arange(cfg.N)[None, :] < lengths[:, None]).astype(np.float64)[..., None]

    X = ad.getitem(params["embed"], tokens)
    X = positional_encode(cfg.pe, params, X)
    X = _dropout(X, cfg.dropout_pe, rng)
    for i in range(cfg.blocks):
        pre = f"blocks.{i}."
        dhhp = block_dhhp(params, i, cfg)
        V = ad.to_complex(_dropout(X @ params[pre + "Wv"], cfg.dropout_value, rng))
        lam = eigenphase(_block_siren(params, i, cfg), X)
        # unscaled mask keeps phases inside the Chebyshev domain
        lam = _dropout(lam, cfg.dropout_eigenvalue, rng, rescale=False)
        if cfg.mechanism == "kernelution":
            phase = kpm_eval(block_filter(params, i, cfg), lam)
        else:
            phase = lam
        S = _dropout(dhhp_forward(dhhp, V), cfg.dropout_eigenvector, rng)
        Z = dhhp_inverse(dhhp, _modulate(ad.exp_i(phase, np.pi), S))
        zeta = params[pre + "zeta"]
        X1 = post_scale_norm(params[pre + "norm1.g"], Z, zeta, residual=X)
        gffn_p = {k: params[pre + "gffn." + k] for k in ("W_re", "W_im", "W_o")}
        F = _dropout(gffn(gffn_p, Z), cfg.dropout_gffn, rng)
        X = post_scale_norm(params[pre + "norm2.g"], F, zeta, residual=X1)
    pooled = ad.sum(X * mask, axis=1) / np.maximum(lengths, 1)[:, None]
    return pooled @ params["head.W"] + params["head.b"]


def baseline_self_attention(Wq, Wk, Wv, X):
    """Single-head ``softmax(X Wq (X Wk)^T / sqrt(d)) X Wv`` with row-wise softmax."""
    d = value(Wk).shape[-1]
    scores = (X @ Wq) @ ad.transpose(X @ Wk, (1, 0)) * (1.0 / np.sqrt(d))
    return ad.softmax(scores, axis=-1) @ (X @ Wv)


def config_dict(cfg) -> dict:
    return asdict(cfg)
