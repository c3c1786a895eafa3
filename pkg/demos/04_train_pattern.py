"""Train the classifier to spot the trigram (1, 2, 3) in a sequence.

A small run (a few minutes on one core) that writes a metrics CSV and a
checkpoint, then reloads the checkpoint and scores the held-out split.

Run:  python3 demos/04_train_pattern.py [out_dir]
"""

import sys

from synvolution.training import TrainConfig, evaluate, task_data, train

out = sys.argv[1] if len(sys.argv) > 1 else "pattern_run"
cfg = TrainConfig(task="pattern", N=128, D=32, blocks=2, lr=3e-3, epochs=20, n_samples=2000,
                  target_accuracy=0.95)
print("epoch,split,loss,ce,kpl,accuracy,seconds")
final, ckpt = train(cfg, out, echo=print)
_, _, test = task_data(cfg)
acc, loss = evaluate(ckpt, test)
print(f"\nbest validation accuracy {final['best_val_accuracy']:.3f} after {final['epochs_run']} epochs")
print(f"test accuracy {acc:.3f} (chance 0.5), cross-entropy {loss:.3f}")
