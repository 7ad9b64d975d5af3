"""Command-line pipeline.

    supportrefine COMMAND [--config PATH] [--seed N] [--dry-run] [--force] [--set section.key=value ...]

Commands: train-base, sample, annotate, refine, evaluate, synthesize-coherence, report.
Artifacts live in ``[run] workdir``.  A command whose outputs already exist
for the same resolved config is skipped unless ``--force`` is given.

Exit codes: 0 ok, 2 usage, 3 config, 4 missing input, 5 runtime.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from typing import Optional, Sequence

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .corpus import CorpusError, build_instances, read_corpus, split_corpus, write_corpus
from .evaluation import dumps_report, evaluate_models, render_tables
from .feedback import FeedbackCache, annotate_candidates, make_judge, synthesize_coherence_data, \
    write_coherence_data, write_feedback
from .metrics import load_embeddings
from .model import ModelConfig, TinyTransformer
from .refine import CandidateSet, read_candidates, refine, sample_responses, write_candidates
from .synthetic import ToyCorpusConfig, synthesize_toy_corpus
from .tokenizer import Tokenizer, fit_tokenizer
from .training import encode_instances, train_mle

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME = 0, 2, 3, 4, 5
COMMANDS = ("train-base", "sample", "annotate", "refine", "evaluate", "synthesize-coherence", "report")

# inputs each command needs to find in the workdir, and outputs it writes
INPUTS = {
    "train-base": (),
    "sample": ("tokenizer", "base"),
    "annotate": ("candidates",),
    "refine": ("tokenizer", "base"),
    "evaluate": ("tokenizer", "base"),
    "synthesize-coherence": (),
    "report": ("eval_report",),
}
# inputs used when present; they still invalidate the up-to-date stamp
OPTIONAL_INPUTS = {"refine": ("candidates",), "evaluate": ("refined",)}
OUTPUTS = {
    "train-base": ("tokenizer", "base"),
    "sample": ("candidates",),
    "annotate": ("feedback",),
    "refine": ("refined", "refine_report", "loss_log"),
    "evaluate": ("eval_report", "eval_table"),
    "synthesize-coherence": ("coherence",),
    "report": (),
}

log = logging.getLogger("supportrefine")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", f"{message}\n{self.format_usage().strip()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="supportrefine", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, help="overrides [run] seed")
    p.add_argument("--dry-run", action="store_true", help="validate config and inputs, write nothing")
    p.add_argument("--force", action="store_true", help="recompute even if outputs are up to date")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_corpus(cfg: RunConfig):
    if cfg.corpus.source == "synthetic":
        return synthesize_toy_corpus(ToyCorpusConfig(n_conversations=cfg.corpus.n_conversations,
                                                     vocab_size=cfg.corpus.max_vocab), seed=cfg.seed)
    return read_corpus(cfg.corpus.path)


def _splits(cfg: RunConfig):
    train, valid, test = split_corpus(_load_corpus(cfg), cfg.split)
    mk = lambda part: build_instances(part, cfg.corpus.max_context_turns)
    return mk(train), mk(valid), mk(test), train


def _stamp_path(cfg: RunConfig, command: str) -> str:
    return os.path.join(cfg.workdir, f".{command}.stamp")


def _stamp_value(cfg: RunConfig, command: str) -> str:
    """Config digest plus the hashes of the command's workdir inputs."""
    h = hashlib.sha256(cfg.digest().encode())
    for name in INPUTS[command] + OPTIONAL_INPUTS.get(command, ()):
        h.update(name.encode())
        if os.path.exists(cfg.path(name)):
            with open(cfg.path(name), "rb") as f:
                h.update(hashlib.sha256(f.read()).digest())
    return h.hexdigest()


def _up_to_date(cfg: RunConfig, command: str) -> bool:
    stamp = _stamp_path(cfg, command)
    if not os.path.exists(stamp) or not all(os.path.exists(cfg.path(o)) for o in OUTPUTS[command]):
        return False
    with open(stamp) as f:
        return f.read().strip() == _stamp_value(cfg, command)


def _judge(cfg: RunConfig):
    return make_judge(cfg.judge)


def _cache(cfg: RunConfig) -> FeedbackCache:
    return FeedbackCache(cfg.judge.cache_path or cfg.path("cache"))


def cmd_train_base(cfg: RunConfig) -> dict:
    train, _, _, train_convs = _splits(cfg)
    if cfg.corpus.source == "synthetic":
        write_corpus(_load_corpus(cfg), cfg.path("corpus"))
    tok = fit_tokenizer(train_convs, cfg.corpus.max_vocab)
    m = cfg.model
    mcfg = ModelConfig(vocab_size=len(tok), embedding_dim=m.embedding_dim, layer_count=m.layer_count,
                       head_count=m.head_count, max_sequence_len=m.max_sequence_len,
                       feedforward_dim=m.feedforward_dim, seed=cfg.seed)
    enc = encode_instances(tok, train, mcfg.max_sequence_len, cfg.decode.max_len)
    ckpt = train_mle(TinyTransformer(mcfg), enc, lr=cfg.train.lr, epochs=cfg.train.epochs,
                     batch_size=cfg.train.batch_size, seed=cfg.seed, tokenizer_fingerprint=tok.fingerprint())
    tok.save(cfg.path("tokenizer"))
    save_checkpoint(ckpt, cfg.path("base"))
    return {"instances": len(enc), "epoch_loss": ckpt.metadata["epoch_loss"]}


def _load_model(cfg: RunConfig, which: str):
    tok = Tokenizer.load(cfg.path("tokenizer"))
    ckpt = load_checkpoint(cfg.path(which), expected_fingerprint=tok.fingerprint())
    return tok, ckpt


def cmd_sample(cfg: RunConfig) -> dict:
    tok, ckpt = _load_model(cfg, "base")
    train, _, _, _ = _splits(cfg)
    enc = encode_instances(tok, train, ckpt.config.max_sequence_len, cfg.decode.max_len)
    sets = sample_responses(ckpt.build_model(), enc, tok, cfg.decode)
    write_candidates(sets, cfg.path("candidates"))
    return {"instances": len(sets), "candidates": sum(len(s.candidates) for s in sets)}


def _annotate(cfg: RunConfig):
    train, _, _, _ = _splits(cfg)
    by_id = {i.instance_id: i for i in train}
    sets = read_candidates(cfg.path("candidates"))
    missing = [s.instance_id for s in sets if s.instance_id not in by_id]
    if missing:
        raise CliError(EXIT_MISSING, "input-missing", f"candidates for unknown instance {missing[0]}")
    judge = _judge(cfg)
    res = annotate_candidates(judge, [by_id[s.instance_id] for s in sets], sets, _cache(cfg),
                              max_parallelism=cfg.judge.max_parallelism)
    return res, judge


def cmd_annotate(cfg: RunConfig) -> dict:
    res, judge = _annotate(cfg)
    write_feedback(res.records, cfg.path("feedback"))
    return {"records": len(res.records), "unlabeled": res.unlabeled, "judge_tasks": res.judge_calls,
            "remote_calls": getattr(judge, "calls", 0)}


def cmd_refine(cfg: RunConfig) -> dict:
    tok, base = _load_model(cfg, "base")
    train, _, _, _ = _splits(cfg)
    sets = read_candidates(cfg.path("candidates")) if os.path.exists(cfg.path("candidates")) else None
    judge = _judge(cfg)
    refined, report = refine(base, train, tok, judge, cfg.hyperparams, cfg.decode,
                             batch_size=cfg.refine.batch_size, cache=_cache(cfg), candidate_sets=sets,
                             rounds=cfg.refine.rounds, loss_log_path=cfg.path("loss_log"),
                             feedback_path=cfg.path("feedback"), max_parallelism=cfg.judge.max_parallelism)
    save_checkpoint(refined, cfg.path("refined"))
    out = {"config": cfg.to_dict(), "report": report.to_dict()}
    with open(cfg.path("refine_report"), "w") as f:
        f.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return {k: v for k, v in report.to_dict().items() if k != "loss_curve"}


def cmd_evaluate(cfg: RunConfig) -> dict:
    tok, base = _load_model(cfg, "base")
    models = {"base": base.build_model()}
    if os.path.exists(cfg.path("refined")):
        models["refined"] = load_checkpoint(cfg.path("refined"), tok.fingerprint()).build_model()
    _, _, test, _ = _splits(cfg)
    emb = load_embeddings(cfg.eval.embeddings) if cfg.eval.embeddings else None
    report = evaluate_models(models, test, tok, _judge(cfg), decode_cfg=cfg.decode, cache=_cache(cfg),
                             embeddings=emb, ten_responses=cfg.eval.ten_responses,
                             resamples=cfg.eval.resamples, seed=cfg.seed)
    report["config"] = cfg.to_dict()
    if cfg.eval.embeddings and emb is None:
        report["notes"] = [f"embedding file {cfg.eval.embeddings} not found; Extrema absent"]
    with open(cfg.path("eval_report"), "w") as f:
        f.write(dumps_report(report))
    with open(cfg.path("eval_table"), "w") as f:
        f.write(render_tables(report))
    return {"metrics": report["metrics"]}


def cmd_synthesize_coherence(cfg: RunConfig) -> dict:
    _, _, _, train_convs = _splits(cfg)
    ex = synthesize_coherence_data(train_convs, cfg.coherence.n_base_pairs, cfg.seed,
                                   cfg.corpus.max_context_turns)
    write_coherence_data(ex, cfg.path("coherence"))
    return {"examples": len(ex)}


def cmd_report(cfg: RunConfig) -> dict:
    with open(cfg.path("eval_report")) as f:
        report = json.load(f)
    sys.stdout.write(render_tables(report))
    return {}


HANDLERS = {
    "train-base": cmd_train_base, "sample": cmd_sample, "annotate": cmd_annotate, "refine": cmd_refine,
    "evaluate": cmd_evaluate, "synthesize-coherence": cmd_synthesize_coherence, "report": cmd_report,
}


def _validate_inputs(cfg: RunConfig, command: str) -> None:
    if cfg.corpus.source == "file":
        if not cfg.corpus.path:
            raise CliError(EXIT_CONFIG, "config", "[corpus] source = file needs a path")
        if not os.path.exists(cfg.corpus.path):
            raise CliError(EXIT_MISSING, "input-missing", f"corpus file not found: {cfg.corpus.path}")
    elif cfg.corpus.source != "synthetic":
        raise CliError(EXIT_CONFIG, "config", f"unknown corpus source {cfg.corpus.source!r}")
    for name in INPUTS[command]:
        if not os.path.exists(cfg.path(name)):
            raise CliError(EXIT_MISSING, "input-missing", f"{cfg.path(name)} not found (run the earlier step)")


def _execute(argv: Sequence[str]) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set, args.seed)
    except FileNotFoundError as e:
        raise CliError(EXIT_MISSING, "input-missing", f"config file not found: {e}")
    except (ConfigError, ValueError) as e:
        raise CliError(EXIT_CONFIG, "config", str(e))
    _validate_inputs(cfg, args.command)
    if args.dry_run:
        print(json.dumps({"command": args.command, "dry_run": True, "config": cfg.to_dict()}, sort_keys=True))
        return EXIT_OK
    os.makedirs(cfg.workdir, exist_ok=True)
    if not args.force and args.command != "report" and _up_to_date(cfg, args.command):
        print(json.dumps({"command": args.command, "status": "up-to-date"}))
        return EXIT_OK
    lock = cfg.path("lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CliError(EXIT_RUNTIME, "locked", f"{lock} exists; another run is using {cfg.workdir}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        summary = HANDLERS[args.command](cfg)
        if OUTPUTS[args.command]:
            with open(_stamp_path(cfg, args.command), "w") as f:
                f.write(_stamp_value(cfg, args.command) + "\n")
    finally:
        os.remove(lock)
    if args.command != "report":
        print(json.dumps({"command": args.command, "status": "ok", "summary": summary}, sort_keys=True, default=str))
    return EXIT_OK


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _execute(argv)
    except CliError as e:
        code, kind, msg = e.code, e.kind, str(e)
    except (CorpusError, CheckpointError) as e:
        code, kind, msg = EXIT_RUNTIME, type(e).__name__, str(e)
    except Exception as e:  # noqa: BLE001 - reported as a machine-readable runtime error
        code, kind, msg = EXIT_RUNTIME, type(e).__name__, str(e)
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": msg}) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
