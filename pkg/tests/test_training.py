import csv

import numpy as np
import pytest

from synvolution.checkpoint import load_checkpoint
from synvolution.kpm import ChebFilter
from synvolution.numeric import Rng
from synvolution.training import (METRICS_HEADER, AdamState, Batch, TrainConfig, adamw_step, eval_listops,
                                  evaluate, gen_task, parse_listops, split_dataset, task_data, total_loss, train)

TINY = dict(N=12, D=4, D_hid=4, blocks=1, n_samples=40, batch_size=8, omega0=3.0)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(eta=1.0)
    with pytest.raises(ValueError):
        TrainConfig(dropout_gffn=1.0)
    with pytest.raises(ValueError):
        TrainConfig(task="copy")
    assert TrainConfig(task="mini_listops").vocab >= 9
    mc = TrainConfig(task="mini_listops").model_config()
    assert mc.num_classes == 4


def test_total_loss_examples():
    logits = np.array([[2.0, -1.0], [0.5, 0.1]])
    labels = np.array([0, 1])
    filters = [ChebFilter(2, np.array([0.0, 1.0, 0.5]))]
    loss0, ce, _ = total_loss(logits, labels, filters, 0.0)
    assert float(loss0) == pytest.approx(float(ce))
    perfect = np.array([[50.0, -50.0], [-50.0, 50.0]])
    assert float(total_loss(perfect, labels, [], 0.0)[0]) < 1e-20
    half, ce, _ = total_loss(logits, labels, [ChebFilter(2, np.zeros(3))], 0.5)
    assert float(half) == pytest.approx(0.5 * float(ce))
    shares = [(1 - eta) * float(ce) / float(total_loss(logits, labels, filters, eta)[0]) for eta in (0.0, 0.1, 0.5)]
    assert shares[0] > shares[1] > shares[2]


def test_adamw_examples():
    p = {"w": np.array([1.0, -2.0])}
    out, _ = adamw_step(p, {"w": np.zeros(2)}, AdamState(), lr=0.1, weight_decay=0.0)
    np.testing.assert_array_equal(out["w"], p["w"])
    out, state = adamw_step({"t": np.array(1.0)}, {"t": np.array(1.0)}, AdamState(), lr=0.1)
    assert float(out["t"]) == pytest.approx(0.9, abs=1e-7)
    assert state.t == 1
    theta = {"w": np.array([2.0])}
    state = AdamState()
    for _ in range(3):
        theta, state = adamw_step(theta, {"w": np.zeros(1)}, state, lr=0.1, weight_decay=0.5)
    assert theta["w"][0] == pytest.approx(2.0 * 0.95 ** 3)
    with pytest.raises(FloatingPointError):
        adamw_step(p, {"w": np.array([np.nan, 0.0])}, AdamState())


def test_task_generators():
    rng = Rng(0)
    pat = gen_task("pattern", rng, 60, 20, 8)
    for tok, n, y in zip(pat.tokens, pat.lengths, pat.labels):
        s = tok[:n]
        has = any(tuple(s[i:i + 3]) == (1, 2, 3) for i in range(n - 2))
        assert has == bool(y)
        assert np.all(tok[n:] == 0)
    assert pat.labels.sum() == 30
    maj = gen_task("majority", rng, 40, 20, 6)
    for tok, y in zip(maj.tokens, maj.labels):
        ones, twos = np.sum(tok == 1), np.sum(tok == 2)
        assert ones != twos and (ones < twos) == bool(y)
    lo = gen_task("mini_listops", rng, 80, 32, 9)
    assert np.bincount(lo.labels).tolist() == [20, 20, 20, 20]
    for tok, y in zip(lo.tokens, lo.labels):
        assert eval_listops(tok) == y
    with pytest.raises(ValueError):
        gen_task("mini_listops", rng, 10, 32, 6)
    with pytest.raises(ValueError):
        gen_task("pattern", rng, 10, 2, 8)


def test_listops_evaluator():
    assert eval_listops(parse_listops("[MAX 1 3 2]")) == 3
    assert eval_listops(parse_listops("[MIN 3 [MAX 0 2] 1]")) == 1
    assert eval_listops(parse_listops("[SM 3 [SM 2 2] 3]")) == 2
    with pytest.raises(ValueError):
        eval_listops(parse_listops("[MAX 1 2"))


def test_split_proportions():
    data = gen_task("pattern", Rng(1), 50, 10, 8)
    tr, va, te = split_dataset(data)
    assert (len(tr), len(va), len(te)) == (30, 10, 10)


def test_batch_length_check():
    with pytest.raises(ValueError):
        Batch(np.zeros((1, 4)), [0], [5])


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_zero_epochs_writes_baseline(tmp_path):
    final, ckpt = train(TrainConfig(epochs=0, **TINY), tmp_path)
    rows = _read(tmp_path / "metrics.csv")
    assert rows[0] == METRICS_HEADER
    assert [r[:2] for r in rows[1:]] == [["0", "train"], ["0", "val"]]
    assert 0.0 <= float(rows[2][5]) <= 1.0
    assert ckpt.exists()
    assert b"\r\n" not in (tmp_path / "metrics.csv").read_bytes()


def test_training_is_deterministic_and_respects_constraints(tmp_path):
    cfg = TrainConfig(epochs=3, lr=3e-3, **TINY)
    train(cfg, tmp_path / "a")
    train(cfg, tmp_path / "b")
    strip = lambda rows: [r[:-1] for r in rows]  # noqa: E731  (wall time differs)
    assert strip(_read(tmp_path / "a/metrics.csv")) == strip(_read(tmp_path / "b/metrics.csv"))
    pa, _ = load_checkpoint(tmp_path / "a/best.ckpt")
    pb, _ = load_checkpoint(tmp_path / "b/best.ckpt")
    assert all(pa[k].tobytes() == pb[k].tobytes() for k in pa)
    for name, val in pa.items():
        if name.endswith("zeta"):
            assert 0.0 <= val[0] <= 1.0
        if name.endswith(".g"):
            assert val[0] > 0


def test_evaluate_checkpoint(tmp_path):
    cfg = TrainConfig(epochs=2, lr=3e-3, **TINY)
    _, ckpt = train(cfg, tmp_path)
    tr, va, te = task_data(cfg)
    acc, loss = evaluate(ckpt, tr)
    assert 0.0 <= acc <= 1.0 and np.isfinite(loss)
    _, init_ckpt = train(TrainConfig(epochs=0, **TINY), tmp_path / "init")
    assert acc >= evaluate(init_ckpt, tr)[0]
    wrong = Batch(np.ones((2, 10)), [0, 1], [10, 10])
    with pytest.raises(ValueError):
        evaluate(ckpt, wrong)


def test_constant_prediction_on_balanced_set(tmp_path):
    _, ckpt = train(TrainConfig(epochs=0, **TINY), tmp_path)
    params, _ = load_checkpoint(ckpt)
    from synvolution.training import load_model
    params, cfg = load_model(ckpt)
    params["head.W"][:] = 0.0
    params["head.b"][:] = [1.0, 0.0]
    data = gen_task("pattern", Rng(2), 20, cfg.N, cfg.vocab)
    acc, _ = evaluate((params, cfg), data)
    assert acc == 0.5


@pytest.mark.parametrize("task", ["pattern", "mini_listops", "majority"])
def test_losses_finite_on_all_tasks(task, tmp_path):
    for seed in range(3):
        cfg = TrainConfig(task=task, epochs=1, seed=seed, **(TINY | {"N": 26}))
        train(cfg, tmp_path / f"{task}{seed}")
        rows = _read(tmp_path / f"{task}{seed}/metrics.csv")[1:]
        assert all(np.isfinite(float(r[2])) for r in rows)
