"""Desk-scale training: synthetic tasks, combined loss, AdamW, metrics and checkpoints."""

from __future__ import annotations

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .kpm import ChebFilter, kernel_polynomial_loss
from .model import ModelConfig, block_filter, converter_forward, init_params
from .numeric import Rng

__all__ = [
    "TASKS",
    "TrainConfig",
    "Batch",
    "TrainingAborted",
    "total_loss",
    "adamw_step",
    "AdamState",
    "gen_task",
    "eval_listops",
    "parse_listops",
    "split_dataset",
    "train",
    "evaluate",
    "load_model",
    "task_data",
    "METRICS_HEADER",
]

log = logging.getLogger(__name__)

TASKS = ("pattern", "mini_listops", "majority")
METRICS_HEADER = ["epoch", "split", "loss", "ce", "kpl", "accuracy", "seconds"]
NUM_CLASSES = {"pattern": 2, "mini_listops": 4, "majority": 2}

# mini_listops token ids
DIGIT0 = 1  # digits 0..3 -> ids 1..4
OPS = {"MAX": 5, "MIN": 6, "SM": 7}
CLOSE = 8
LISTOPS_VOCAB = 9


class TrainingAborted(RuntimeError):
    """Loss or gradient became non-finite; the best checkpoint so far is kept."""


@dataclass
class TrainConfig:
    task: str = "pattern"
    N: int = 128
    D: int = 32
    D_hid: int = 128
    K: int = 2
    blocks: int = 2
    vocab: int = 8
    eta: float = 0.01
    lr: float = 1e-3
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 1.0
    batch_size: int = 32
    epochs: int = 20
    seed: int = 0
    n_samples: int = 2000
    target_accuracy: float = 0.0  # stop once validation accuracy reaches this; 0 disables
    pe: str = "rpe"
    mechanism: str = "kernelution"
    kernel: str = "dirichlet"
    m: int = 1
    omega0: float = 30.0
    omega1: float = 1.0
    dropout_pe: float = 0.1
    dropout_value: float = 0.1
    dropout_gffn: float = 0.1
    dropout_eigenvalue: float = 0.1
    dropout_eigenvector: float = 0.1

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {TASKS}")
        if not 0.0 <= self.eta < 1.0:
            raise ValueError(f"eta must lie in [0, 1), got {self.eta}")
        for f in fields(self):
            if f.name.startswith("dropout_") and not 0.0 <= getattr(self, f.name) < 1.0:
                raise ValueError(f"{f.name} must lie in [0, 1), got {getattr(self, f.name)}")
        if self.epochs < 0 or self.batch_size < 1 or self.n_samples < 5:
            raise ValueError("epochs >= 0, batch_size >= 1 and n_samples >= 5 are required")
        if self.task == "mini_listops" and self.vocab < LISTOPS_VOCAB:
            self.vocab = LISTOPS_VOCAB

    def model_config(self) -> ModelConfig:
        shared = {f.name for f in fields(ModelConfig)} & {f.name for f in fields(self)}
        return ModelConfig(num_classes=NUM_CLASSES[self.task], **{k: getattr(self, k) for k in shared})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_strings(cls, raw: dict[str, str]) -> "TrainConfig":
        """Build from string values, coercing each to its declared field type."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, text in raw.items():
            if key not in types:
                raise KeyError(key)
            kwargs[key] = _coerce(types[key], text)
        return cls(**kwargs)


def _coerce(type_name, text: str):
    type_name = type_name if isinstance(type_name, str) else type_name.__name__
    if type_name == "int":
        return int(text)
    if type_name == "float":
        return float(text)
    return str(text)


@dataclass
class Batch:
    tokens: np.ndarray  # (batch, N) int
    labels: np.ndarray  # (batch,)
    lengths: np.ndarray  # (batch,)

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        if np.any(self.lengths > self.tokens.shape[1]):
            raise ValueError("a sequence length exceeds the padded width")

    def __len__(self):
        return len(self.labels)

    def take(self, idx) -> "Batch":
        return Batch(self.tokens[idx], self.labels[idx], self.lengths[idx])


# ---------------------------------------------------------------------------
# loss and optimizer


def total_loss(logits, labels, filters, eta: float):
    """``(1 - eta) * cross_entropy + eta * sum of kernel polynomial losses``.

    Returns ``(loss, ce, kpl)``; each is a tape node when the inputs are.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must lie in [0, 1), got {eta}")
    ce = ad.cross_entropy(logits, labels)
    kpl = 0.0
    for f in filters:
        kpl = kpl + kernel_polynomial_loss(f)
    return ce * (1.0 - eta) + kpl * eta, ce, kpl


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-3,
               betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.0):
    """One AdamW update with bias-corrected moments and decoupled weight decay.

    Returns new ``(params, state)``; the inputs are left untouched.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}; step aborted")
    b1, b2 = betas
    t = state.t + 1
    new_params, new_m, new_v = {}, {}, {}
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(theta)
        m = b1 * state.m.get(name, 0.0) + (1 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * weight_decay * theta
        new_params[name] = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(t, new_m, new_v)


def _apply_constraints(params: dict) -> None:
    for name in params:
        if name.endswith("zeta"):
            params[name] = np.clip(params[name], 0.0, 1.0)
        elif name.endswith(".g"):
            params[name] = np.maximum(params[name], 1e-3)


# ---------------------------------------------------------------------------
# synthetic tasks


def eval_listops(tokens) -> int:
    """Value of a serialized expression (ids as produced by :func:`gen_task`)."""
    stack: list[list] = []
    result = None
    for tok in tokens:
        tok = int(tok)
        if tok == 0:
            break
        if tok in OPS.values():
            stack.append([tok])
        elif tok == CLOSE:
            op, *args = stack.pop()
            if op == OPS["MAX"]:
                val = max(args)
            elif op == OPS["MIN"]:
                val = min(args)
            else:
                val = sum(args) % 4
            if stack:
                stack[-1].append(val)
            else:
                result = val
        else:
            digit = tok - DIGIT0
            if stack:
                stack[-1].append(digit)
            else:
                result = digit
    if stack or result is None:
        raise ValueError("malformed expression")
    return result


def parse_listops(text: str) -> list[int]:
    """Token ids for an expression such as ``"[MAX 1 [MIN 2 3] 0]"``."""
    ids = []
    for word in text.replace("]", " ] ").split():
        if word.startswith("["):
            ids.append(OPS[word[1:]])
        elif word == "]":
            ids.append(CLOSE)
        else:
            ids.append(DIGIT0 + int(word))
    return ids


def _listops_expr(gen: np.random.Generator, depth: int) -> list[int]:
    op = list(OPS.values())[gen.integers(3)]
    out = [op]
    for _ in range(gen.integers(2, 5)):
        if depth > 1 and gen.random() < 0.5:
            out += _listops_expr(gen, depth - 1)
        else:
            out.append(DIGIT0 + int(gen.integers(4)))
    return out + [CLOSE]


def _has_trigram(seq) -> bool:
    s = np.asarray(seq)
    return bool(np.any((s[:-2] == 1) & (s[1:-1] == 2) & (s[2:] == 3))) if len(s) >= 3 else False


def gen_task(task: str, rng: Rng, n_samples: int, N: int, vocab: int) -> Batch:
    """Balanced synthetic classification data.

    ``pattern``: does the trigram (1, 2, 3) occur?  ``majority``: is symbol 1
    or symbol 2 more frequent?  ``mini_listops``: value (0-3) of a nested
    MAX/MIN/SM (sum mod 4) expression of depth at most 2.
    """
    if vocab < 4 or n_samples < 1 or N < 3:
        raise ValueError(f"invalid sizes: vocab={vocab}, n_samples={n_samples}, N={N}")
    gen = rng.generator
    seqs, labels = [], []
    if task == "pattern":
        for i in range(n_samples):
            length = int(gen.integers(max(3, N // 2), N + 1))
            label = i % 2
            s = gen.integers(1, vocab, length)
            if label:
                pos = int(gen.integers(0, length - 2))
                s[pos:pos + 3] = (1, 2, 3)
            else:
                while _has_trigram(s):
                    hit = np.flatnonzero((s[:-2] == 1) & (s[1:-1] == 2) & (s[2:] == 3))
                    s[hit + 2] = gen.integers(4, vocab, len(hit)) if vocab > 4 else 1
            seqs.append(s)
            labels.append(label)
    elif task == "majority":
        for i in range(n_samples):
            length = int(gen.integers(max(3, N // 2), N + 1))
            label = i % 2
            s = gen.integers(1, vocab, length)
            ones, twos = int(np.sum(s == 1)), int(np.sum(s == 2))
            while ones == twos or (ones > twos) != (label == 0):
                pos = int(gen.integers(length))
                s[pos] = 1 if label == 0 else 2
                ones, twos = int(np.sum(s == 1)), int(np.sum(s == 2))
            seqs.append(s)
            labels.append(label)
    elif task == "mini_listops":
        if vocab < LISTOPS_VOCAB:
            raise ValueError(f"mini_listops needs vocab >= {LISTOPS_VOCAB}, got {vocab}")
        per_class = [0] * 4
        target = -(-n_samples // 4)
        while len(seqs) < n_samples:
            s = _listops_expr(gen, 2)
            if len(s) > N:
                continue
            y = eval_listops(s)
            if per_class[y] >= target:
                continue
            per_class[y] += 1
            seqs.append(np.asarray(s))
            labels.append(y)
    else:
        raise ValueError(f"unknown task {task!r}; choose from {TASKS}")
    order = gen.permutation(len(seqs))
    tokens = np.zeros((len(seqs), N), dtype=np.int64)
    lengths = np.zeros(len(seqs), dtype=np.int64)
    for row, j in enumerate(order):
        tokens[row, :len(seqs[j])] = seqs[j]
        lengths[row] = len(seqs[j])
    return Batch(tokens, np.asarray(labels)[order], lengths)


def split_dataset(data: Batch) -> tuple[Batch, Batch, Batch]:
    """Fixed 60/20/20 train/validation/test split."""
    n = len(data)
    a, b = int(round(0.6 * n)), int(round(0.8 * n))
    return data.take(slice(0, a)), data.take(slice(a, b)), data.take(slice(b, n))


def task_data(cfg: TrainConfig) -> tuple[Batch, Batch, Batch]:
    return split_dataset(gen_task(cfg.task, Rng(cfg.seed).spawn(1), cfg.n_samples, cfg.N, cfg.vocab))


# ---------------------------------------------------------------------------
# evaluation and training


def _filters(params: dict, mcfg: ModelConfig) -> list[ChebFilter]:
    if mcfg.mechanism != "kernelution":
        return []
    return [block_filter(params, i, mcfg) for i in range(mcfg.blocks)]


def _metrics(params, mcfg, data: Batch, eta: float, chunk: int = 256) -> dict:
    logits = np.concatenate([
        converter_forward(params, mcfg, data.tokens[i:i + chunk], data.lengths[i:i + chunk])
        for i in range(0, len(data), chunk)
    ]) if len(data) else np.zeros((0, mcfg.num_classes))
    loss, ce, kpl = total_loss(logits, data.labels, _filters(params, mcfg), eta)
    acc = float(np.mean(np.argmax(logits, axis=1) == data.labels)) if len(data) else 0.0
    return {"loss": float(loss), "ce": float(ce), "kpl": float(kpl), "accuracy": acc}


def _grad_step(params, mcfg, batch: Batch, eta: float, rng: Rng):
    tape = ad.Tape()
    leaves = {k: tape.leaf(v, name=k) for k, v in params.items()}
    logits = converter_forward(leaves, mcfg, batch.tokens, batch.lengths, rng=rng)
    loss, ce, kpl = total_loss(logits, batch.labels, _filters(leaves, mcfg), eta)
    grads = tape.backward(loss)
    out = {k: grads.get(v.index, np.zeros_like(v.value)) for k, v in leaves.items()}
    acc = float(np.mean(np.argmax(ad.value(logits), axis=1) == batch.labels))
    return out, float(ad.value(loss)), float(ad.value(ce)), float(ad.value(kpl)), acc


def _clip(grads: dict, max_norm: float) -> dict:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        return {k: g * scale for k, g in grads.items()}
    return grads


def _fmt(x: float) -> str:
    return repr(float(x))


def train(cfg: TrainConfig, out_dir, echo=None) -> tuple[dict, Path]:
    """Train on the configured synthetic task.

    Writes ``metrics.csv`` (one row per epoch and split, epoch 0 being the
    untrained model) and ``best.ckpt`` (parameters with the best validation
    accuracy) into ``out_dir``.  Returns the final metrics and the checkpoint
    path.  ``echo``, if given, receives every CSV row as it is written.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mcfg = cfg.model_config()
    train_set, val_set, test_set = task_data(cfg)
    base = Rng(cfg.seed)
    params = init_params(mcfg, base.spawn(2))
    shuffle_rng, dropout_rng = base.spawn(3), base.spawn(4)
    state = AdamState()
    ckpt = out_dir / "best.ckpt"
    metrics_path = out_dir / "metrics.csv"
    best_key = None

    with open(metrics_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)

        def emit(epoch, split, m, seconds):
            row = [epoch, split, _fmt(m["loss"]), _fmt(m["ce"]), _fmt(m["kpl"]), _fmt(m["accuracy"]),
                   f"{seconds:.3f}"]
            writer.writerow(row)
            fh.flush()
            if echo is not None:
                echo(",".join(str(x) for x in row))

        def checkpoint_if_best(val_metrics):
            nonlocal best_key
            key = (val_metrics["accuracy"], -val_metrics["loss"])
            if best_key is None or key > best_key:
                best_key = key
                save_checkpoint(ckpt, params, cfg.to_dict())

        t0 = time.perf_counter()
        emit(0, "train", _metrics(params, mcfg, train_set, cfg.eta), time.perf_counter() - t0)
        val_m = _metrics(params, mcfg, val_set, cfg.eta)
        emit(0, "val", val_m, time.perf_counter() - t0)
        checkpoint_if_best(val_m)

        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            order = shuffle_rng.permutation(len(train_set))
            sums = np.zeros(4)
            for start in range(0, len(order), cfg.batch_size):
                batch = train_set.take(order[start:start + cfg.batch_size])
                grads, loss, ce, kpl, acc = _grad_step(params, mcfg, batch, cfg.eta, dropout_rng)
                if not np.isfinite(loss):
                    raise TrainingAborted(f"non-finite loss at epoch {epoch}; best checkpoint kept at {ckpt}")
                try:
                    params, state = adamw_step(params, _clip(grads, cfg.clip), state, cfg.lr,
                                               (cfg.beta1, cfg.beta2), cfg.eps, cfg.weight_decay)
                except FloatingPointError as exc:
                    raise TrainingAborted(f"{exc} (epoch {epoch}); best checkpoint kept at {ckpt}") from exc
                _apply_constraints(params)
                sums += np.array([loss, ce, kpl, acc]) * len(batch)
            sums /= len(train_set)
            emit(epoch, "train", dict(zip(("loss", "ce", "kpl", "accuracy"), sums)), time.perf_counter() - t0)
            val_m = _metrics(params, mcfg, val_set, cfg.eta)
            emit(epoch, "val", val_m, time.perf_counter() - t0)
            checkpoint_if_best(val_m)
            log.info("epoch %d val accuracy %.4f", epoch, val_m["accuracy"])
            if 0 < cfg.target_accuracy <= val_m["accuracy"]:
                break

    final = {"val": val_m, "best_val_accuracy": best_key[0], "epochs_run": epoch if cfg.epochs else 0,
             "params": params}
    return final, ckpt


def load_model(checkpoint) -> tuple[dict, TrainConfig]:
    params, raw = load_checkpoint(checkpoint)
    return params, TrainConfig.from_strings(raw)


def evaluate(checkpoint, data: Batch) -> tuple[float, float]:
    """Accuracy and cross-entropy of a saved model on ``data`` (dropout off)."""
    if isinstance(checkpoint, tuple):
        params, cfg = checkpoint
    else:
        params, cfg = load_model(checkpoint)
    mcfg = cfg.model_config()
    if data.tokens.shape[1] != mcfg.N or (len(data) and data.tokens.max() >= mcfg.vocab):
        raise ValueError(f"data (width {data.tokens.shape[1]}) does not match the checkpoint "
                         f"configuration (N={mcfg.N}, vocab={mcfg.vocab})")
    m = _metrics(params, mcfg, data, 0.0)
    return m["accuracy"], m["ce"]
