"""Command-line front end.

Subcommands: gen (synthesize a corpus), train (episodic training to a
checkpoint), eval (episodic test accuracy report), sweep (CSV grids over
noise / ways / shots), attend (attention-weight probe for a focal class),
export (per-instance embedding TSV for external visualization).

Every command resolves its configuration as defaults < --config file <
command-line flags, writes the resolved config next to its outputs, and is
byte-for-byte reproducible under an identical config and seed. Errors exit
nonzero with a single `category: message` line on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .attention import ContextSet, ContextSource, attend_context, context_average
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_run_config
from .corpus import generate_corpus, load_corpus, save_corpus
from .encoders import encode_visual, project_context
from .errors import ContextProtoError, DimensionError, DomainError
from .evaluation import evaluate, noise_sweep, reports_to_csv
from .fusion import gated_fuse
from .model import ModelVariant, TrainedModel
from .training import TrainSettings, train
from .wordvec import save_word_table


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a run-config JSON file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory for this run")
    p.add_argument("--variant", help="model variant name")
    p.add_argument("--episodes", type=int, help="episode count (training or evaluation per command)")
    p.add_argument("--top-k", type=int, dest="top_k", help="top-k accuracy setting")
    p.add_argument("--context-source", dest="context_source", choices=["cs", "ct", "union"],
                   help="which class pools context labels may come from")
    p.add_argument("--p-noise", type=float, dest="p_noise", help="context label noise probability")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contextproto",
                                     description="context-aware few-shot classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    _add_common(p)

    p = sub.add_parser("train", help="train a variant on a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True, help="corpus JSONL path")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "test"], help="which class split to evaluate")

    p = sub.add_parser("sweep", help="evaluate over a grid and emit CSV")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", default="noise",
                   help="comma list of axes: noise, ways, shots (e.g. 'ways,shots')")

    p = sub.add_parser("attend", help="attention weights for a focal class")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--focal", required=True, help="focal class name")
    p.add_argument("--labels", help="comma-separated context labels (default: checkpoint vocabulary)")

    p = sub.add_parser("export", help="export per-instance embeddings as TSV")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--kind", default="visual", choices=["visual", "cavg", "ccam", "fused"])
    p.add_argument("--split", choices=["train", "test"], default="test")

    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, out_dir=args.out)
    if args.variant is not None:
        cfg = dataclasses.replace(cfg, variant=ModelVariant.parse(args.variant).value)
    episode = cfg.episode
    if args.context_source is not None:
        episode = dataclasses.replace(episode, context_source=ContextSource.parse(args.context_source))
    if args.p_noise is not None:
        episode = dataclasses.replace(episode, p_noise=args.p_noise)
    cfg = dataclasses.replace(cfg, episode=episode)
    if args.episodes is not None:
        if args.command == "train":
            cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, episodes=args.episodes))
        else:
            cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, episodes=args.episodes))
    if args.top_k is not None:
        cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, top_k=args.top_k))
    if getattr(args, "split", None):
        cfg = dataclasses.replace(cfg, eval=dataclasses.replace(cfg.eval, split=args.split))
    return cfg


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    return out


def _load_model(path, corpus=None) -> TrainedModel:
    model, _ = load_checkpoint(path)
    if corpus is not None:
        if corpus.word_table.d_w != model.params.config.d_w:
            raise DimensionError(
                f"corpus word dimension {corpus.word_table.d_w} != checkpoint d_w {model.params.config.d_w}"
            )
        if corpus.instances and corpus.instances[0].features.shape[0] != model.params.config.d_f:
            raise DimensionError(
                f"corpus feature dimension {corpus.instances[0].features.shape[0]} "
                f"!= checkpoint d_f {model.params.config.d_f}"
            )
    return model


def cmd_gen(args) -> int:
    cfg = _resolve_config(args)
    spec = dataclasses.replace(cfg.corpus, seed=cfg.seed if args.seed is not None else cfg.corpus.seed)
    cfg = dataclasses.replace(cfg, corpus=spec)
    out = _prepare_out(cfg)
    corpus = generate_corpus(spec)
    save_corpus(corpus, out / "corpus.jsonl")
    with (out / "words.tsv").open("w", encoding="utf-8") as fh:
        save_word_table(corpus.word_table, fh)
    print(f"wrote {out / 'corpus.jsonl'} ({len(corpus.instances)} instances, "
          f"{len(corpus.train_classes)} train / {len(corpus.test_classes)} test classes)")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    corpus = load_corpus(args.corpus)
    settings = TrainSettings(
        episodes=cfg.train.episodes, learning_rate=cfg.train.learning_rate,
        beta1=cfg.train.beta1, beta2=cfg.train.beta2, eps=cfg.train.eps, seed=cfg.seed,
    )
    model_cfg = dataclasses.replace(
        cfg.model,
        d_f=corpus.instances[0].features.shape[0] if corpus.instances else cfg.model.d_f,
        d_w=corpus.word_table.d_w,
    )
    result = train(cfg.variant, corpus, cfg.episode, settings, config=model_cfg)
    # out_dir is a property of the invocation, not of the model
    embedded = {k: v for k, v in cfg.to_dict().items() if k != "out_dir"}
    save_checkpoint(out / "checkpoint.ckpt", result.model, run_config=embedded)
    curve = "episode,loss\n" + "\n".join(f"{i},{l!r}" for i, l in enumerate(result.loss_curve))
    (out / "loss_curve.csv").write_text(curve + "\n", encoding="utf-8")
    print(f"trained {cfg.variant} for {settings.episodes} episodes; "
          f"final loss {result.loss_curve[-1] if result.loss_curve else float('nan'):.4f}; "
          f"checkpoint at {out / 'checkpoint.ckpt'}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    corpus = load_corpus(args.corpus)
    model = _load_model(args.checkpoint, corpus)
    report = evaluate(model, corpus, cfg.episode, cfg.eval.episodes,
                      top_k=cfg.eval.top_k, seed=cfg.seed, split=cfg.eval.split)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"{model.variant.value}: accuracy {report.mean:.4f} +/- {report.ci95:.4f} "
          f"(top-{report.top_k}, {report.n_episodes} episodes)")
    return 0


def _report_row(report, ways, shots, p_noise, source) -> dict:
    return {
        "variant": report.variant,
        "ways": ways,
        "shots": shots,
        "context_source": source,
        "p_noise": p_noise,
        "top_k": report.top_k,
        "n_episodes": report.n_episodes,
        "seed": report.seed,
        "mean": repr(report.mean),
        "ci95": repr(report.ci95),
    }


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    corpus = load_corpus(args.corpus)
    model = _load_model(args.checkpoint, corpus)
    axes = [a.strip() for a in args.grid.split(",") if a.strip()]
    unknown = [a for a in axes if a not in ("noise", "ways", "shots")]
    if unknown:
        raise DomainError(f"unknown sweep axis {unknown}; expected noise, ways, or shots")
    reports_dir = out / "reports"
    reports_dir.mkdir(exist_ok=True)

    rows = []
    base = cfg.episode
    if axes == ["noise"]:
        results = noise_sweep(model, corpus, base, cfg.sweep.noise_grid,
                              cfg.eval.episodes, top_k=cfg.eval.top_k, seed=cfg.seed, split=cfg.eval.split)
        for p, report in results:
            rows.append(_report_row(report, base.ways, base.shots, p, base.context_source.value))
            (reports_dir / f"noise_{p}.json").write_text(report.to_json() + "\n", encoding="utf-8")
    else:
        ways_values = cfg.sweep.ways_grid if "ways" in axes else (base.ways,)
        shots_values = cfg.sweep.shots_grid if "shots" in axes else (base.shots,)
        for ways in ways_values:
            for shots in shots_values:
                spec = dataclasses.replace(base, ways=int(ways), shots=int(shots))
                report = evaluate(model, corpus, spec, cfg.eval.episodes,
                                  top_k=cfg.eval.top_k, seed=cfg.seed, split=cfg.eval.split)
                rows.append(_report_row(report, spec.ways, spec.shots, spec.p_noise,
                                        spec.context_source.value))
                (reports_dir / f"ways{spec.ways}_shots{spec.shots}.json").write_text(
                    report.to_json() + "\n", encoding="utf-8")
    (out / "sweep.csv").write_text(reports_to_csv(rows), encoding="utf-8")
    print(f"wrote {out / 'sweep.csv'} ({len(rows)} cells)")
    return 0


def cmd_attend(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    model = _load_model(args.checkpoint)
    focal = args.focal
    if focal not in model.word_table:
        raise DomainError(f"focal class {focal!r} not in the checkpoint vocabulary")
    if args.labels:
        labels = [l.strip() for l in args.labels.split(",") if l.strip()]
    else:
        source = cfg.episode.context_source
        if source is ContextSource.CS:
            pool = model.train_classes
        elif source is ContextSource.CT:
            pool = model.test_classes
        else:
            pool = model.train_classes + model.test_classes
        labels = [l for l in pool if l != focal]
    ctx = ContextSet.from_labels(labels, model.word_table)
    result = attend_context(ctx, model.word_table.vector(focal), model.params.attention)
    payload = {
        "focal": focal,
        "context_source": cfg.episode.context_source.value,
        "weights": [{"label": l, "weight": w} for l, w in result.ranked()],
    }
    text = json.dumps(payload, indent=2)
    (out / "attend.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _instance_embedding(inst, kind: str, model: TrainedModel, table) -> np.ndarray | None:
    params = model.params
    if kind == "visual":
        return encode_visual(ad.constant(inst.features), params.encoder).data
    if not inst.context:
        return None
    ctx = ContextSet.from_labels(inst.context, table)
    use_attention = kind == "ccam" or (kind == "fused" and model.variant.flags.attention == "ccam")
    if use_attention:
        pooled = attend_context(ctx, table.vector(inst.label), params.attention).pooled
    else:
        pooled = context_average(ctx)
    projected = project_context(pooled, params.projector)
    if kind in ("cavg", "ccam"):
        return projected.data
    visual = encode_visual(ad.constant(inst.features), params.encoder)
    return gated_fuse(visual, projected, params.gate).fused.data


def cmd_export(args) -> int:
    cfg = _resolve_config(args)
    out = _prepare_out(cfg)
    corpus = load_corpus(args.corpus)
    model = _load_model(args.checkpoint, corpus)
    members = set(corpus.split_members(args.split))
    lines = []
    for inst in corpus.instances:
        if inst.label not in members:
            continue
        vec = _instance_embedding(inst, args.kind, model, corpus.word_table)
        if vec is None:
            continue
        lines.append(inst.label + "\t" + "\t".join(repr(float(v)) for v in vec))
    path = out / "embeddings.tsv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path} ({len(lines)} rows, kind={args.kind})")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "attend": cmd_attend,
    "export": cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ContextProtoError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"invalid-input: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
