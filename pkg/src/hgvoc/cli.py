"""Command line surface.

Subcommands: ``prepare`` (WAVs to features + manifest), ``train``,
``synth``, ``bench``, ``gradcheck``, ``inspect``.  Exit codes: 0 success,
1 data or runtime error, 2 usage error.

Heavy imports happen inside the handlers so ``--threads`` can pin the
BLAS/OpenMP thread count before NumPy loads; a fixed thread count keeps
kernel results bit-deterministic.
"""

import argparse
import os
import sys


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hgvoc",
        description="source-filter neural vocoder: prepare data, train, "
                    "synthesize, benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="extract features from a WAV directory")
    p.add_argument("--wav-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--f0-import", default=None,
                   help="directory of <stem>.f0 text files (one value per line) "
                        "substituting the built-in tracker")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="run the two-phase training schedule")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--checkpoint-every", type=int, default=1000)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize a WAV from a feature file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="measure inference throughput")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--seconds", type=float, default=30.0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--kernels", choices=["auto", "compiled", "numpy", "both"],
                   default="auto")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against "
                                         "finite differences")
    p.add_argument("--module", choices=["all", "excitation", "filter", "gan"],
                   default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-wrong-sign", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("inspect", help="summarize a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def cmd_prepare(args):
    from .config import parse_config
    from .features import (AcousticFeatures, ManifestEntry, derive_uv,
                           estimate_f0, load_wav, mel_spectrogram,
                           peak_normalize, read_f0_file, resample, save_wav,
                           write_features, write_manifest)

    cfg = parse_config(args.config)
    try:
        wavs = sorted(f for f in os.listdir(args.wav_dir)
                      if f.lower().endswith(".wav"))
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if not wavs:
        print(f"error: no WAV files in {args.wav_dir}", file=sys.stderr)
        return 1

    wav_out = os.path.join(args.out_dir, "wav")
    feat_out = os.path.join(args.out_dir, "features")
    os.makedirs(wav_out, exist_ok=True)
    os.makedirs(feat_out, exist_ok=True)

    entries = []
    failures = []
    for name in wavs:
        stem = os.path.splitext(name)[0]
        src = os.path.join(args.wav_dir, name)
        try:
            buf = load_wav(src)
            buf = resample(buf, cfg.sample_rate)
            buf = peak_normalize(buf, 0.95)
            mel = mel_spectrogram(buf, cfg.n_mels, cfg.fft, cfg.win, cfg.hop)
            if args.f0_import:
                f0 = read_f0_file(os.path.join(args.f0_import, stem + ".f0"),
                                  expected_frames=mel.shape[0])
            else:
                f0 = estimate_f0(buf, hop=cfg.hop)
            feats = AcousticFeatures(mel=mel, f0_hz=f0, uv=derive_uv(f0),
                                     hop_samples=cfg.hop,
                                     sample_rate=cfg.sample_rate)
            wav_path = os.path.join(wav_out, stem + ".wav")
            feat_path = os.path.join(feat_out, stem + ".hgf")
            save_wav(wav_path, buf)
            write_features(feat_path, feats)
            entries.append(ManifestEntry(stem, wav_path, feat_path,
                                         feats.num_frames))
            print(f"prepared {name}: {feats.num_frames} frames")
        except Exception as e:
            print(f"warning: skipping {src}: {e}", file=sys.stderr)
            failures.append(src)
    write_manifest(os.path.join(args.out_dir, "manifest.tsv"), entries)
    print(f"wrote manifest with {len(entries)} utterances")
    if failures:
        print(f"error: {len(failures)} file(s) failed: {', '.join(failures)}",
              file=sys.stderr)
        return 1
    return 0


def cmd_train(args):
    from .config import parse_config
    from .trainer import train

    cfg = parse_config(args.config)
    last = {"step": None}

    def on_row(row):
        if row["step"] % 50 == 0 or row["step"] <= 3:
            parts = [f"step {row['step']}"]
            for key in ("L_stft", "L_adv", "L_fm", "L_G", "L_D"):
                if key in row:
                    parts.append(f"{key}={row[key]:.4f}")
            print("  ".join(parts))
        last["step"] = row["step"]

    metrics_path, final = train(args.manifest, cfg, args.out,
                                checkpoint_every=args.checkpoint_every,
                                resume=args.resume, on_row=on_row)
    print(f"metrics: {metrics_path}")
    print(f"final checkpoint: {final}")
    return 0


def cmd_synth(args):
    from .features import AudioBuffer, read_features, save_wav
    from .trainer.loop import load_generator
    from .wavenet import synthesize_audio

    model, run_cfg, meta = load_generator(args.ckpt)
    feats = read_features(args.features)
    audio = synthesize_audio(model, feats, seed=args.seed)
    save_wav(args.out, AudioBuffer(audio, run_cfg.sample_rate))
    print(f"wrote {args.out}: {audio.shape[0]} samples at "
          f"{run_cfg.sample_rate} Hz (seed {args.seed})")
    return 0


def cmd_bench(args):
    from .bench import format_report, run_bench

    results, info = run_bench(args.ckpt, seconds=args.seconds, runs=args.runs,
                              kernels=args.kernels)
    print(format_report(results, info))
    return 0


def cmd_gradcheck(args):
    from .trainer import gradcheck

    report = gradcheck(args.module, seed=args.seed,
                       flip_sign_of=args.inject_wrong_sign)
    print(report.format())
    return 0 if report.passed else 1


def cmd_inspect(args):
    from .trainer import load_checkpoint

    tensors, meta = load_checkpoint(args.ckpt)
    print(f"checkpoint: {args.ckpt}")
    for key in sorted(k for k in meta if not k.startswith("cfg.")):
        print(f"  {key}: {meta[key]}")
    for key in sorted(k for k in meta if k.startswith("cfg.")):
        print(f"  {key[4:]}: {meta[key]}")
    groups = {}
    print("  tensors:")
    for name, arr in tensors.items():
        prefix = name.split(".", 1)[0]
        groups[prefix] = groups.get(prefix, 0) + arr.size
        print(f"    {name}  {list(arr.shape)}  {arr.nbytes} bytes")
    for prefix in ("gen", "disc"):
        if prefix in groups:
            print(f"  {prefix} parameters: {groups[prefix]}")
    print(f"  total values: {sum(groups.values())}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.func(args)
    except Exception as e:  # data and runtime failures exit 1 with a message
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
