"""Command-line interface: ``synvolution <command> [--flags]``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

__all__ = ["main", "build_parser", "bench"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _median_time(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


# ---------------------------------------------------------------------------
# unitary-check


def cmd_unitary_check(args) -> int:
    from .numeric import Rng
    from .unitary import dhhp_dense_matrix, dhhp_forward, dhhp_inverse, init_dhhp

    n, m = args.N, args.m
    if not 1 <= n <= 4096:
        raise UsageError(f"--N must lie in [1, 4096], got {n}")
    if n % m:
        raise UsageError(f"--m {m} does not divide --N {n}")
    failures = 0

    def report(name, ok, detail):
        nonlocal failures
        failures += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name:<14} {detail}")

    for s in range(args.seeds):
        rng = Rng(args.seed + s)
        p = init_dhhp(n, rng, m)
        x = rng.normal((n, 4)) + 1j * rng.normal((n, 4))
        y = dhhp_forward(p, x)
        ratio = np.linalg.norm(y) / np.linalg.norm(x)
        report("norm", abs(ratio - 1) <= 1e-10, f"seed={args.seed + s} |Phi x|/|x| - 1 = {ratio - 1:.2e}")
        err = np.max(np.abs(dhhp_inverse(p, y) - x))
        report("round-trip", err <= 1e-10, f"seed={args.seed + s} max error {err:.2e}")
        if n <= 64:
            phi = dhhp_dense_matrix(p)
            err_u = np.linalg.norm(phi @ phi.conj().T - np.eye(n))
            report("unitarity", err_u < 1e-10, f"seed={args.seed + s} |Phi Phi^H - I|_F = {err_u:.2e}")
            err_d = np.max(np.abs(phi @ x - y))
            report("dense-oracle", err_d <= 1e-10, f"seed={args.seed + s} max error {err_d:.2e}")

    # doubling the length should cost well under 2.6x
    rng = Rng(args.seed)
    base = max(n, 1024)
    t = []
    for size in (base, 2 * base):
        p = init_dhhp(size, rng)
        x = rng.normal((size, 1)) + 0j
        dhhp_forward(p, x)  # warm-up
        t.append(_median_time(lambda: dhhp_forward(p, x), 9))
    report("timing-ratio", t[1] / t[0] < 2.6, f"N={base}->{2 * base}: {t[1] / t[0]:.2f}")
    print(f"{failures} failure(s)")
    return EXIT_FAIL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck


def cmd_gradcheck(args) -> int:
    import contextlib

    from .gradcheck import broken_vjp, sweep

    ctx = broken_vjp(args.inject_broken_vjp) if args.inject_broken_vjp else contextlib.nullcontext()
    t0 = time.perf_counter()
    with ctx:
        results = sweep(tol=args.tol, seed=args.seed)
    failed = []
    for name, reports in results.items():
        worst = max(r.worst for r in reports)
        ok = all(r.passed for r in reports)
        if not ok:
            failed.append(name)
        print(f"{'PASS' if ok else 'FAIL'}  {name:<20} worst rel error {worst:.3e}")
    print(f"{len(results)} ops, {len(failed)} failed, {time.perf_counter() - t0:.1f} s")
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# kpm-demo


def cmd_kpm_demo(args) -> int:
    from .kpm import KERNELS, write_step_demo

    if args.K < 1:
        raise UsageError(f"--K must be >= 1, got {args.K}")
    try:
        cols = write_step_demo(args.out, args.K, args.points)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_USAGE
    for k in KERNELS:
        print(f"{k:<10} max |p| = {np.max(np.abs(cols['p_' + k])):.6f}")
    print(f"wrote {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def bench(sizes, reps: int = 5, seed: int = 0, dense_limit: int = 1024) -> list[dict]:
    """Median wall time of the fast transform and, for small N, of the dense path.

    The dense path assembles the ``N x N`` matrix from the same parameters
    and multiplies; that is the cost of applying the transform without the
    scan.  Each row carries the ratio to the previous size.
    """
    from .numeric import Rng
    from .unitary import dhhp_dense_matrix, dhhp_forward, init_dhhp

    rows = []
    rng = Rng(seed)
    for n in sizes:
        p = init_dhhp(n, rng)
        x = rng.normal((n, 1)) + 1j * rng.normal((n, 1))
        dhhp_forward(p, x)  # warm-up
        fast = _median_time(lambda: dhhp_forward(p, x), reps)
        dense = _median_time(lambda: dhhp_dense_matrix(p) @ x, reps) if n <= dense_limit else None
        ratio = fast / rows[-1]["fast"] if rows else None
        rows.append({"N": n, "fast": fast, "dense": dense, "ratio": ratio})
    return rows


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise UsageError(f"--reps must be >= 1, got {args.reps}")
    bad = [n for n in args.N if n < 2 or n & (n - 1)]
    if bad:
        raise UsageError(f"--N values must be powers of two, got {bad}")
    rows = bench(sorted(args.N), args.reps, args.seed)
    print("N,fast_seconds,dense_seconds,doubling_ratio")
    for r in rows:
        dense = "" if r["dense"] is None else f"{r['dense']:.6f}"
        ratio = "" if r["ratio"] is None else f"{r['ratio']:.3f}"
        print(f"{r['N']},{r['fast']:.6f},{dense},{ratio}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval


def _train_overrides(args) -> dict:
    from .training import TrainConfig

    out = {f.name: getattr(args, "cfg_" + f.name) for f in fields(TrainConfig)
           if getattr(args, "cfg_" + f.name, None) is not None}
    if args.seed is not None:
        out["seed"] = args.seed
    return out


def cmd_train(args) -> int:
    from .config import ConfigError, echo_config, resolve_train_config
    from .training import TrainingAborted, train

    try:
        cfg = resolve_train_config(args.config, _train_overrides(args))
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    print(echo_config(cfg))
    print()
    try:
        final, ckpt = train(cfg, args.out, echo=print)
    except TrainingAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"final val accuracy {final['val']['accuracy']:.4f}")
    print(f"best val accuracy {final['best_val_accuracy']:.4f}")
    print(f"checkpoint {ckpt}")
    print(f"metrics {Path(args.out) / 'metrics.csv'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .checkpoint import CheckpointError
    from .training import evaluate, load_model, task_data

    if not Path(args.checkpoint).is_file():
        raise UsageError(f"checkpoint not found: {args.checkpoint}")
    try:
        params, cfg = load_model(args.checkpoint)
    except (CheckpointError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load {args.checkpoint}: {exc}") from exc
    if args.seed is not None:
        cfg.seed = args.seed
    data = dict(zip(("train", "val", "test"), task_data(cfg)))[args.split]
    acc, loss = evaluate((params, cfg), data)
    print(f"split={args.split} samples={len(data)} accuracy={acc:.4f} loss={loss:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .training import TrainConfig

    parser = argparse.ArgumentParser(prog="synvolution", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("unitary-check", help="unitarity, round-trip, dense-oracle and timing checks")
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--m", type=_positive_int, default=1, help="stride of the permutation")
    p.add_argument("--seeds", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_unitary_check)

    p = sub.add_parser("gradcheck", help="finite-difference sweep over every registered op")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-broken-vjp", metavar="PRIMITIVE", default=None,
                   help="test mode: scale the named primitive's VJP by 1.5")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("kpm-demo", help="write the damped step-function approximations as CSV")
    p.add_argument("--K", type=int, default=50)
    p.add_argument("--points", type=_positive_int, default=2001)
    p.add_argument("--out", default="kpm_demo.csv")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; the demo is deterministic")
    p.set_defaults(func=cmd_kpm_demo)

    p = sub.add_parser("bench", help="median timing of the fast and dense transforms")
    p.add_argument("--N", type=int, nargs="+", default=[2 ** 14, 2 ** 15, 2 ** 16, 2 ** 17])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("train", help="train on a synthetic task")
    p.add_argument("--config", default=None, help="key = value file")
    p.add_argument("--out", default="run")
    p.add_argument("--seed", type=int, default=None)
    for f in fields(TrainConfig):
        if f.name == "seed":
            continue
        kind = {"int": int, "float": float}.get(f.type if isinstance(f.type, str) else f.type.__name__, str)
        p.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, type=kind, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split of its task")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--seed", type=int, default=None, help="data seed (defaults to the training seed)")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
