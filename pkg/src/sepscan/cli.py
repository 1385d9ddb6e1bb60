"""Command-line front end.

Subcommands:

    separate    apply a checkpoint to a mixture WAV, write s1.wav / s2.wav
    train-toy   overfit a small model on mixtures built from a WAV corpus
    gradcheck   run the finite-difference suites
    params      print the parameter count for a config
    bench-scan  benchmark scan implementations, CSV to stdout
    eval        score a checkpoint against mixtures from a corpus manifest

Exit codes: 0 success, 2 usage error (argparse), 3 malformed input data,
4 numeric/training failure (failed gradcheck, count mismatch, divergence).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import audio, bench, gradcheck, model as model_mod, training
from .errors import DataFormatError, TrainingDiverged
from .numerics import NumericsError

EXIT_OK = 0
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _load_wav_checked(path, expect_rate: int) -> np.ndarray:
    x, rate = audio.wav_read(path)
    if rate != expect_rate:
        raise DataFormatError(
            f"{path}: sample rate {rate} does not match the model's {expect_rate}")
    if x.size == 0:
        raise DataFormatError(f"{path}: empty WAV")
    return x


def _corpus_pairs(manifest, count: int, rng: np.random.Generator,
                  sample_rate: int) -> list[training.MixExample]:
    """Build fixed mixtures by pairing distinct corpus files."""
    paths = audio.read_manifest(manifest)
    if len(paths) < 2:
        raise DataFormatError(f"{manifest}: need at least 2 corpus files")
    waves = [_load_wav_checked(p, sample_rate) for p in paths]
    shortest = min(w.size for w in waves)
    examples = []
    for _ in range(count):
        i, j = rng.choice(len(waves), size=2, replace=False)
        snr = training.sample_snr(rng)
        examples.append(training.mix_sources(waves[i][:shortest],
                                             waves[j][:shortest], snr))
    return examples


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_separate(args) -> int:
    model = model_mod.SeparationModel.from_checkpoint(args.ckpt)
    rate = model.config.sample_rate
    inputs = getattr(args, "in")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(path) -> list[Path]:
        # weights are read-only here, so workers can share the model
        mix = _load_wav_checked(path, rate)
        prefix = "" if len(inputs) == 1 else f"{Path(path).stem}_"
        written = []
        for i, est in enumerate(model.separate(mix), start=1):
            dest = out_dir / f"{prefix}s{i}.wav"
            audio.wav_write(dest, est.data, rate)
            written.append(dest)
        return written

    if len(inputs) == 1:
        written = one(inputs[0])
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=len(inputs)) as pool:
            written = [p for chunk in pool.map(one, inputs) for p in chunk]
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_train_toy(args) -> int:
    cfg = model_mod.load_config(args.config)
    rng = np.random.default_rng(args.seed)
    examples = _corpus_pairs(args.corpus, args.pairs, rng, cfg.sample_rate)
    net = model_mod.SeparationModel(cfg, rng=rng)
    sched = training.TrainSchedule(peak_lr=args.peak_lr,
                                   warmup_steps=args.warmup,
                                   total_steps=args.steps)
    res = training.train_toy(net, examples, sched, log_path=args.log,
                             val_every=args.val_every,
                             stop_at_si_snri=args.stop_at, verbose=True)
    model_mod.save_model(args.out, net)
    print(f"saved {args.out} after {res.steps_run} steps, "
          f"si_snri {res.final_si_snri:.2f} dB")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite(args.module, seed=args.seed)
    failed = 0
    for r in results:
        flag = "PASS" if r.ok else "FAIL"
        print(f"{flag} {r.name}: max_rel_err {r.max_rel_err:.3e} (tol {r.tol:g})")
        failed += 0 if r.ok else 1
    if failed:
        print(f"{failed} of {len(results)} gradchecks failed")
        return EXIT_NUMERIC
    print(f"all {len(results)} gradchecks passed")
    return EXIT_OK


def _cmd_params(args) -> int:
    cfg = model_mod.load_config(args.config)
    n = model_mod.count_parameters(cfg)
    print(n)
    if args.expect is not None:
        rel = abs(n - args.expect) / args.expect
        if rel > args.tol:
            print(f"expected {args.expect:.6g} +/- {args.tol:.0%}, "
                  f"got {n} (off by {rel:.2%})")
            return EXIT_NUMERIC
    return EXIT_OK


def _cmd_bench_scan(args) -> int:
    rows = bench.run_table(args.impl, args.L, args.E, args.H, seed=args.seed)
    print(",".join(bench.CSV_COLUMNS))
    for row in rows:
        print(",".join(str(row[c]) for c in bench.CSV_COLUMNS))
    return EXIT_OK


def _cmd_eval(args) -> int:
    model = model_mod.SeparationModel.from_checkpoint(args.ckpt)
    rng = np.random.default_rng(args.seed)
    examples = _corpus_pairs(args.manifest, args.pairs, rng,
                             model.config.sample_rate)
    si_vals, sd_vals = [], []
    for ex in examples:
        est = tuple(e.data for e in model.separate(ex.mix))
        si_vals.append(training.si_snri(est, ex.sources, ex.mix))
        sd_vals.append(training.sdri(est, ex.sources, ex.mix))
    print(f"si_snri {np.mean(si_vals):.2f} dB")
    print(f"sdri {np.mean(sd_vals):.2f} dB")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sepscan",
                                description="dual-path scan speech separation")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("separate", help="separate mixture WAVs")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", required=True, nargs="+",
                   help="mixture WAV path(s); several fan out to threads")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(fn=_cmd_separate)

    s = sub.add_parser("train-toy", help="overfit a small model on corpus pairs")
    s.add_argument("--config", required=True, help="config file or preset name")
    s.add_argument("--corpus", required=True, help="manifest of WAV files")
    s.add_argument("--out", required=True, help="checkpoint output path")
    s.add_argument("--steps", type=int, default=2000)
    s.add_argument("--warmup", type=int, default=200)
    s.add_argument("--peak-lr", type=float, default=1.5e-4)
    s.add_argument("--pairs", type=int, default=2)
    s.add_argument("--val-every", type=int, default=25)
    s.add_argument("--stop-at", type=float, default=None,
                   help="stop once si_snri reaches this many dB")
    s.add_argument("--log", default=None, help="CSV training log path")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_train_toy)

    s = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    s.add_argument("--module", default="all",
                   choices=sorted(gradcheck.SUITES) + ["all"])
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_gradcheck)

    s = sub.add_parser("params", help="parameter count for a config")
    s.add_argument("--config", required=True, help="config file or preset name")
    s.add_argument("--expect", type=float, default=None)
    s.add_argument("--tol", type=float, default=0.02)
    s.set_defaults(fn=_cmd_params)

    s = sub.add_parser("bench-scan", help="scan benchmarks as CSV")
    s.add_argument("--impl", nargs="+", choices=list(bench.IMPLS),
                   default=list(bench.IMPLS))
    s.add_argument("--L", type=int, nargs="+", default=[1000, 8000])
    s.add_argument("--E", type=int, default=4)
    s.add_argument("--H", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_bench_scan)

    s = sub.add_parser("eval", help="score a checkpoint on corpus mixtures")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--pairs", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=_cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (DataFormatError, FileNotFoundError, IsADirectoryError,
            PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericsError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
