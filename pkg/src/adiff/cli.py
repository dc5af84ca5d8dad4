"""Command-line entry points for every pipeline stage.

    adiff make-dataset   caption CSV -> difference records (JSONL)
    adiff pretrain       stage 1: tagger on tags, decoder on explanation text
    adiff train          stage 2 or 3 on a record file
    adiff generate       explain two WAV files with a trained system
    adiff evaluate       score predictions against references (CSV report)
    adiff ablate         run the ablation grid on a synthetic world
    adiff analyze        corpus statistics, entropy, optional density scores
    adiff serve          the human-annotation HTTP service

Every subcommand honors --seed; reruns with the same seed and inputs
reproduce the same outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

__all__ = ["run_command", "main"]

ENV_STORE = "ADIFF_STORE"


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiff", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-dataset", help="generate difference records from caption CSVs")
    p.add_argument("--captions", required=True, help="CSV with file_name and caption column(s)")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--pairs", type=int, default=0, help="pair count (default: one per caption row)")
    p.add_argument("--tiers", default="1,2,3", help="comma-separated tiers to generate")
    p.add_argument("--llm", default="stub", choices=["stub", "http", "auto"])
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("pretrain", help="stage-1 unimodal pretraining; writes a system directory")
    p.add_argument("--records", required=True, help="difference records JSONL (text corpus)")
    p.add_argument("--out", required=True, help="system directory to create")
    p.add_argument("--toy", action="store_true", help="use the small synthetic-world configuration")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--tagger-clips", type=int, default=60, help="synthetic clips for tagger pretraining")
    p.add_argument("--vocab-size", type=int, default=0, help="BPE vocab size (default by config)")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="stage-2 grounding or stage-3 finetuning")
    p.add_argument("--system", required=True, help="system directory from pretrain (updated in place)")
    p.add_argument("--records", required=True)
    p.add_argument("--audio-root", default=".", help="directory audio references resolve against")
    p.add_argument("--stage", type=int, required=True, choices=[2, 3])
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=2)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--position-ratio", type=float, default=0.0)
    p.add_argument("--captions", default="", help="caption CSV for position captioning")
    p.add_argument("--clip-seconds", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", help="explain the difference between two WAV files")
    p.add_argument("--system", required=True)
    p.add_argument("--audio1", required=True)
    p.add_argument("--audio2", required=True)
    p.add_argument("--tier", type=int, default=1, choices=[1, 2, 3])
    p.add_argument("--prompt", default=None, help="explicit prompt (overrides --tier sampling)")
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--p", type=float, default=0.8)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--max-tokens", type=int, default=120)
    p.add_argument("--clip-seconds", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="caption metrics over prediction/reference JSONL files")
    p.add_argument("--pred", required=True, help='JSONL with an "explanation" field per line')
    p.add_argument("--ref", required=True, help='JSONL with "references" (list) or "explanation"')
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate", help="train and score ablation variants on a synthetic world")
    p.add_argument("--variants", default="language-only,no-cross-projection,with-cross-projection")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--out", default="", help="optional CSV output path")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("analyze", help="corpus statistics and entropy for a record file")
    p.add_argument("--records", required=True)
    p.add_argument("--density", action="store_true", help="add stub-judged density scores per tier")
    p.add_argument("--llm", default="stub", choices=["stub", "http", "auto"])
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--records", default="", help="records JSONL (or set " + ENV_STORE + ")")
    p.add_argument("--audio-root", default=".")
    p.add_argument("--ratings", default="", help="rating log path (JSONL, appended)")
    p.add_argument("--static", default="", help="static directory for the console build")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--seed", type=int, default=0)
    return parser


def run_command(argv) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _dispatch(args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


def _dispatch(args) -> int:
    return {
        "make-dataset": _cmd_make_dataset,
        "pretrain": _cmd_pretrain,
        "train": _cmd_train,
        "generate": _cmd_generate,
        "evaluate": _cmd_evaluate,
        "ablate": _cmd_ablate,
        "analyze": _cmd_analyze,
        "serve": _cmd_serve,
    }[args.command](args)


# ---------------------------------------------------------------------------


def _cmd_make_dataset(args) -> int:
    from .dataforge import generate_explanations, load_caption_csv, sample_pair, save_records
    from .llm import client_from_env
    from .prompts import default_prompt_db

    rows, rejected = load_caption_csv(args.captions)
    if rejected:
        print(f"warning: dropped {rejected} empty caption cell(s)", file=sys.stderr)
    n = len(rows)
    tiers = [int(t) for t in args.tiers.split(",") if t]
    rng = np.random.default_rng(args.seed)
    client = client_from_env(args.llm)
    prompt_db = default_prompt_db()
    pairs = args.pairs or n
    records = []
    for idx in range(pairs):
        i = idx % n
        j = sample_pair(i, n, rng)
        tier = tiers[idx % len(tiers)]
        records.append(
            generate_explanations(rows[i], rows[j], tier, client, prompt=prompt_db.sample(tier, rng))
        )
    save_records(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _toy_dims(toy: bool) -> dict:
    if toy:
        return dict(vocab=256 + 2 + 96, enc_hidden=32, mels=None)
    return dict(vocab=2000, enc_hidden=64, mels=None)


def _cmd_pretrain(args) -> int:
    from .dataforge import load_records
    from .pipeline import System, save_system
    from .prompts import default_prompt_db
    from .audio import MelConfig
    from .model import DiffExplainer, ModelConfig
    from .synth import TOY_MEL, make_tagged_clips
    from .tagger import AudioEncoder, EncoderConfig, train_tagger
    from .tokenizer import train_bpe
    from .training import build_stage_plan, text_stream, train_stage, toy_model_config

    records = load_records(args.records)
    if not records:
        raise ValueError(f"{args.records} holds no records")
    texts = sorted({r.explanation for r in records})
    prompts_db = default_prompt_db()
    dims = _toy_dims(args.toy)
    vocab_size = args.vocab_size or dims["vocab"]
    corpus = texts + sorted({r.prompt for r in records if r.prompt})
    vocab = train_bpe(corpus, vocab_size)

    mel_cfg = TOY_MEL if args.toy else MelConfig()
    rng = np.random.default_rng(args.seed)
    from .tagger import DEFAULT_CLASSES

    enc_cfg = EncoderConfig(mels=mel_cfg.mels, hidden=dims["enc_hidden"], classes=DEFAULT_CLASSES)
    encoder = AudioEncoder(enc_cfg, rng=rng)
    if args.tagger_clips > 0:
        mels, tags, _ = make_tagged_clips(args.tagger_clips, enc_cfg.classes, rng, mel_cfg)
        train_tagger(encoder, mels, tags, rng=np.random.default_rng(args.seed + 1))
        print(f"tagger pretrained on {args.tagger_clips} synthetic clips")

    if args.toy:
        config = toy_model_config(vocab.size, enc_cfg.hidden)
    else:
        config = ModelConfig(vocab_size=vocab.size, encoder_dim=enc_cfg.hidden)
    model = DiffExplainer(config, encoder, seed=args.seed)

    steps = max(1, (len(texts) + 1) // 2)
    plan = build_stage_plan(1, steps_per_epoch=steps, epochs=args.epochs, seed=args.seed)
    result = train_stage(model, plan, text_stream(texts), vocab)
    print(f"stage 1: {len(result.curve)} steps, loss {result.initial_loss:.3f} -> {result.final_loss:.3f}")

    system = System(config, mel_cfg, vocab, prompts_db, model)
    save_system(system, args.out)
    from .training import save_loss_curve, write_run_manifest

    save_loss_curve(result.curve, Path(args.out) / "stage1_curve.csv")
    write_run_manifest(Path(args.out) / "manifest.txt", [plan], seed=args.seed, records=args.records)
    print(f"system written to {args.out}")
    return 0


def _embeddings_for(system, records, audio_root, clip_seconds, seed):
    from .audio import load_wav

    refs = sorted({r.audio1 for r in records} | {r.audio2 for r in records})
    rng = np.random.default_rng(seed)
    out = {}
    for ref in refs:
        path = Path(audio_root) / ref
        if not path.exists():
            raise FileNotFoundError(f"audio reference {ref!r} not found under {audio_root}")
        clip = load_wav(path, rate=system.mel_config.sample_rate)
        out[ref] = system.embed_clip(clip, clip_seconds, rng)
    return out


def _cmd_train(args) -> int:
    from .dataforge import load_caption_csv, load_records
    from .pipeline import load_system, save_system
    from .training import (
        build_stage_plan,
        difference_stream,
        mix_position_captioning,
        save_loss_curve,
        train_stage,
        write_run_manifest,
    )

    system = load_system(args.system)
    records = load_records(args.records)
    embeddings = _embeddings_for(system, records, args.audio_root, args.clip_seconds, args.seed)

    if args.position_ratio > 0:
        if not args.captions:
            raise ValueError("--position-ratio needs --captions for the captioning data")
        captions, _ = load_caption_csv(args.captions)
        stream = mix_position_captioning(
            records, captions, args.position_ratio, np.random.default_rng(args.seed),
            system.prompts,
        )
    else:
        stream = difference_stream(records)

    steps = max(1, (len(stream) + args.batch_size - 1) // args.batch_size)
    plan = build_stage_plan(
        args.stage,
        steps_per_epoch=steps,
        epochs=args.epochs,
        base_lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    result = train_stage(system.model, plan, stream, system.vocab, embeddings)
    print(f"stage {args.stage}: {len(result.curve)} steps, "
          f"loss {result.initial_loss:.3f} -> {result.final_loss:.3f}")
    save_system(system, args.system)
    save_loss_curve(result.curve, Path(args.system) / f"stage{args.stage}_curve.csv")
    write_run_manifest(
        Path(args.system) / "manifest.txt", [plan],
        seed=args.seed, records=args.records, position_ratio=args.position_ratio,
    )
    return 0


def _cmd_generate(args) -> int:
    from .audio import load_wav
    from .decoding import DecodeConfig
    from .pipeline import load_system

    system = load_system(args.system)
    clip1 = load_wav(args.audio1, rate=system.mel_config.sample_rate)
    clip2 = load_wav(args.audio2, rate=system.mel_config.sample_rate)
    config = DecodeConfig(
        mode="greedy" if args.greedy else "topk-topp",
        k=args.k,
        p=args.p,
        temperature=args.temperature,
        max_new_tokens=args.max_tokens,
        seed=args.seed,
    )
    text = system.explain(
        clip1, clip2, tier=args.tier, prompt=args.prompt,
        decode_config=config, seconds=args.clip_seconds, seed=args.seed,
    )
    print(text)
    return 0


def _read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                rows.append(json.loads(line))
    return rows


def _cmd_evaluate(args) -> int:
    from .metrics import evaluate_pairs, pairs_from_texts

    preds = _read_jsonl(args.pred)
    refs = _read_jsonl(args.ref)
    if len(preds) != len(refs):
        raise ValueError(f"{len(preds)} predictions vs {len(refs)} references")
    candidates = [row.get("explanation") or row.get("candidate") or "" for row in preds]
    references = []
    for row in refs:
        if "references" in row:
            references.append(list(row["references"]))
        else:
            references.append([row["explanation"]])
    report = evaluate_pairs(pairs_from_texts(candidates, references))
    sys.stdout.write(report.to_csv())
    return 0


def _cmd_ablate(args) -> int:
    from .synth import build_toy_world
    from .training import run_ablation

    variants = [v for v in args.variants.split(",") if v]
    seeds = [int(s) for s in args.seeds.split(",") if s]
    world = build_toy_world(seed=args.seed)
    lines = ["variant,seed,bleu1,average"]
    for variant in variants:
        result = run_ablation(variant, world, seeds)
        for seed, report in zip(seeds, result.per_seed):
            lines.append(f"{variant},{seed},{report.bleu1:.4f},{report.average:.4f}")
        lines.append(f"{variant},mean,{result.mean_bleu1:.4f},{result.mean_average:.4f}")
        print(f"{variant}: mean BLEU1 {result.mean_bleu1:.4f}, mean AVG {result.mean_average:.4f}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    from .dataforge import corpus_entropy, density_score, load_records
    from .llm import client_from_env
    from .metrics import corpus_stats

    records = load_records(args.records)
    if not records:
        raise ValueError(f"{args.records} holds no records")
    by_tier: dict[int, list[str]] = {}
    for r in records:
        by_tier.setdefault(r.tier, []).append(r.explanation)
    stats = corpus_stats(by_tier)
    print("tier,count,median_words,max_words,vocab,char_entropy_bits,word_entropy_bits")
    for tier in sorted(by_tier):
        texts = by_tier[tier]
        s = stats[tier]
        ce = corpus_entropy(texts, "char")
        we = corpus_entropy(texts, "word")
        print(f"{tier},{len(texts)},{s.median_len},{s.max_len},{s.vocab},{ce:.4f},{we:.4f}")
    if args.density:
        client = client_from_env(args.llm)
        print("tier,mean_density")
        for tier in sorted(by_tier):
            scores = [density_score(r, client) for r in records if r.tier == tier]
            print(f"{tier},{np.mean(scores):.3f}")
    return 0


def _cmd_serve(args) -> int:
    from .dataforge import load_records
    from .service import AnnotationService, AnnotationStore

    records_path = args.records or os.environ.get(ENV_STORE, "")
    if not records_path:
        raise ValueError(f"pass --records or set {ENV_STORE}")
    records = load_records(records_path)
    root = Path(args.audio_root)
    store = AnnotationStore(
        records,
        {},
        ratings_path=args.ratings or None,
        records_path=records_path,
    )
    # audio references resolve against the root directory
    store.audio_paths = {aid: str(root / path) for aid, path in store.audio_paths.items()}
    service = AnnotationService(store, static_dir=args.static or None)
    service.serve_forever(args.host, args.port)
    return 0


if __name__ == "__main__":
    main()
