"""Command-line harness: training, consecutive and simultaneous translation,
the delay sweep, trace rendering, and standalone BLEU.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable inputs, bad
config, bad checkpoint), 3 training divergence. Every command is
deterministic given its arguments, the seed, and the input bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .decoding import (CRITERION_NAMES, InputPipe, OutputPipe, SimulConfig,
                       beam_search, greedy_decode, simul_greedy_decode)
from .metrics import alignment_chunks, corpus_bleu, delay_tau
from .model import ModelConfig
from .plots import frontier_svg, trace_svg
from .sweep import (DEFAULT_CRITERIA, DEFAULT_DELTAS, DEFAULT_S0S,
                    best_by_q2d, run_sweep)
from .training import (DivergenceError, SentencePair, TaskSpec, generate_task,
                       train)
from .vocab import EOS, EOS_ID, Vocabulary

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class UsageError(Exception):
    """Bad command line; exit code 1."""


class DataError(Exception):
    """Unusable input data, config, or checkpoint; exit code 2."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad args by default; route through UsageError
    # so usage problems get exit code 1 and data problems keep 2.
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Config file
# ---------------------------------------------------------------------------

_TOP_KEYS = {"seed", "task", "corpus", "model", "training", "sweep"}
_TASK_KEYS = {"kind", "vocab_size", "min_len", "max_len", "sample_count", "seed"}
_CORPUS_KEYS = {"train_source", "train_target", "valid_source", "valid_target"}
_MODEL_KEYS = {"embedding_dim", "hidden_dim", "attention_dim"}
_TRAINING_KEYS = {"max_epochs", "patience", "batch_size", "rho", "eps",
                  "max_grad_norm"}
_SWEEP_KEYS = {"deltas", "s0s", "criteria"}

DEFAULT_CONFIG = {
    "seed": 1,
    "task": {"kind": "cipher", "vocab_size": 20, "min_len": 2, "max_len": 12,
             "sample_count": 5000, "seed": 1},
    "corpus": None,
    "model": {},
    "training": {"max_epochs": 30, "patience": 3},
    "sweep": {"deltas": list(DEFAULT_DELTAS), "s0s": list(DEFAULT_S0S),
              "criteria": list(DEFAULT_CRITERIA)},
}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise DataError(f"unknown config key(s) in {where}: {', '.join(unknown)}")


def load_config(path: str | None) -> dict:
    """Parse the JSON run config, filling defaults; unknown keys are errors."""
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is None:
        return config
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"config is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise DataError("config must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "config")
    for section, allowed in (("task", _TASK_KEYS), ("corpus", _CORPUS_KEYS),
                             ("model", _MODEL_KEYS),
                             ("training", _TRAINING_KEYS),
                             ("sweep", _SWEEP_KEYS)):
        if section in raw and raw[section] is not None:
            if not isinstance(raw[section], dict):
                raise DataError(f"config section {section!r} must be an object")
            _check_keys(raw[section], allowed, section)
            if section == "corpus":
                missing = sorted(allowed - set(raw[section]))
                if missing:
                    raise DataError(
                        f"corpus config is missing: {', '.join(missing)}")
                config["corpus"] = dict(raw[section])
                config["task"] = None
            else:
                config[section].update(raw[section])
    if "seed" in raw:
        config["seed"] = raw["seed"]
    if raw.get("task") is not None and raw.get("corpus") is not None:
        raise DataError("config needs exactly one of task or corpus, not both")
    return config


# ---------------------------------------------------------------------------
# Corpus helpers
# ---------------------------------------------------------------------------

def _read_token_lines(path: str) -> list[list[str]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()  # trailing newline, not an empty sentence
    return [line.split() for line in lines]


def _vocab_from_lines(lines: list[list[str]]) -> Vocabulary:
    seen: dict[str, None] = {}
    for tokens in lines:
        for t in tokens:
            if t not in seen:
                seen[t] = None
    return Vocabulary.from_symbols(seen.keys())


def _encode_corpus(source_lines, target_lines, source_vocab, target_vocab):
    pairs = []
    for src, tgt in zip(source_lines, target_lines):
        pairs.append(SentencePair(source_vocab.encode(src),
                                  target_vocab.encode(tgt)))
    return pairs


def _write_lines(path: Path, lines: list[str]) -> None:
    data = "".join(line + "\n" for line in lines)
    path.write_text(data, encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config["seed"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if config["corpus"] is not None:
        paths = config["corpus"]
        train_src = _read_token_lines(paths["train_source"])
        train_tgt = _read_token_lines(paths["train_target"])
        valid_src = _read_token_lines(paths["valid_source"])
        valid_tgt = _read_token_lines(paths["valid_target"])
        if len(train_src) != len(train_tgt) or len(valid_src) != len(valid_tgt):
            raise DataError("source and target corpora have different sizes")
        source_vocab = _vocab_from_lines(train_src)
        target_vocab = _vocab_from_lines(train_tgt)
        train_pairs = _encode_corpus(train_src, train_tgt,
                                     source_vocab, target_vocab)
        valid_pairs = _encode_corpus(valid_src, valid_tgt,
                                     source_vocab, target_vocab)
        test_pairs = []
    else:
        data = generate_task(TaskSpec(**config["task"]))
        source_vocab, target_vocab = data.source_vocab, data.target_vocab
        train_pairs, valid_pairs, test_pairs = data.train, data.valid, data.test

    model_config = ModelConfig(source_vocab_size=len(source_vocab),
                               target_vocab_size=len(target_vocab),
                               **config["model"])
    result = train(train_pairs, valid_pairs, model_config, seed=seed,
                   **config["training"])

    checkpoint_path = out / "checkpoint.smdc"
    save_checkpoint(result.params, model_config, source_vocab, target_vocab,
                    checkpoint_path)
    log_lines = ["epoch,train_nll,valid_logprob,best_so_far"]
    for row in result.log:
        log_lines.append(f"{row.epoch},{row.train_nll!r},"
                         f"{row.valid_logprob!r},{int(row.best_so_far)}")
    _write_lines(out / "training_log.csv", log_lines)
    if test_pairs:
        _write_lines(out / "test.src",
                     [" ".join(source_vocab.decode(p.source)) for p in test_pairs])
        _write_lines(out / "test.ref",
                     [" ".join(target_vocab.decode(p.target)) for p in test_pairs])
    best = result.log[result.best_epoch - 1]
    print(f"trained {len(result.log)} epoch(s); "
          f"best epoch {result.best_epoch} "
          f"(validation log-prob {best.valid_logprob:.4f})")
    print(f"checkpoint: {checkpoint_path}")
    return 0


def _strip_eos_ids(tokens) -> list[int]:
    out = list(tokens)
    if out and out[-1] == EOS_ID:
        out.pop()
    return out


def cmd_translate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    lines = _read_token_lines(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for tokens in lines:
        source = list(model.source_vocab.encode(tokens))
        if args.mode == "greedy":
            decoded = greedy_decode(model.params, model.config, source,
                                    max_target_len=args.max_len).tokens
        else:
            decoded = beam_search(model.params, model.config, source,
                                  beam_width=args.beam_width,
                                  max_target_len=args.max_len).tokens
        outputs.append(" ".join(model.target_vocab.token(i)
                                for i in _strip_eos_ids(decoded)))
    path = out / "translations.txt"
    _write_lines(path, outputs)
    print(f"translated {len(outputs)} sentence(s): {path}")
    return 0


class _TokenReader:
    """Whitespace tokens from a line stream, with one-token pushback."""

    def __init__(self, stream):
        self._stream = stream
        self._queue: list[str] = []

    def next_token(self) -> str | None:
        while not self._queue:
            line = self._stream.readline()
            if line == "":
                return None
            self._queue.extend(line.split())
        return self._queue.pop(0)

    def push(self, token: str) -> None:
        self._queue.insert(0, token)


class _Segment:
    """One sentence worth of token ids pulled lazily off a reader.

    Iteration ends after the eos token (or at end of stream, which is a
    protocol violation the caller checks via saw_eos). count includes eos.
    """

    def __init__(self, reader: _TokenReader, vocab: Vocabulary):
        self._reader = reader
        self._vocab = vocab
        self.count = 0
        self.saw_eos = False

    def __iter__(self):
        return self

    def __next__(self) -> int:
        if self.saw_eos:
            raise StopIteration
        token = self._reader.next_token()
        if token is None:
            raise StopIteration
        self.count += 1
        if token == EOS:
            self.saw_eos = True
        return self._vocab.id_or_unk(token)


def cmd_simul(args) -> int:
    model = load_checkpoint(args.checkpoint)
    sim = SimulConfig(delta=args.delta, s0=args.s0, criterion=args.criterion,
                      max_target_len=args.max_len)
    reader = _TokenReader(sys.stdin)
    while True:
        first = reader.next_token()
        if first is None:
            break  # clean end of session
        reader.push(first)
        segment = _Segment(reader, model.source_vocab)

        def on_commit(step):
            print(f"{model.target_vocab.token(step.token)}\t{step.source_seen}"
                  f"\t{step.source_committed}\t{step.logprob:.6f}", flush=True)

        trace = simul_greedy_decode(model.params, model.config,
                                    InputPipe(segment), sim,
                                    OutputPipe(on_commit))
        for _ in segment:
            pass  # drain the sentence the decoder did not need
        if not segment.saw_eos:
            raise DataError(f"missing {EOS} at stream end")
        tau = delay_tau([s.source_seen for s in trace.steps], segment.count)
        print(f"#trace tau={tau:.6f} truncated={int(trace.truncated)}",
              flush=True)
    return 0


def _bracketed(tokens: list[str], spans: list[tuple[int, int]]) -> str:
    parts = []
    pos = 0
    for start, end in spans:
        parts.extend(tokens[pos:start])
        parts.append("[" + " ".join(tokens[start:end]) + "]")
        pos = end
    parts.extend(tokens[pos:])
    return " ".join(parts)


def cmd_trace(args) -> int:
    model = load_checkpoint(args.checkpoint)
    tokens = args.sentence.split()
    if not tokens:
        raise DataError("empty sentence")
    sim = SimulConfig(delta=args.delta, s0=args.s0, criterion=args.criterion,
                      max_target_len=args.max_len)
    source = list(model.source_vocab.encode(tokens))
    trace = simul_greedy_decode(model.params, model.config, source, sim)

    source_tokens = tokens + [EOS]
    target_tokens = [model.target_vocab.token(i) for i in trace.tokens]
    chunks = alignment_chunks(trace)
    print("source: " + _bracketed(source_tokens,
                                  [(c.source_start, c.source_end)
                                   for c in chunks]))
    print("target: " + _bracketed(target_tokens,
                                  [(c.target_start, c.target_end)
                                   for c in chunks]))
    committed = [s.source_committed for s in trace.steps]
    print("s'(t):  " + " ".join(str(s) for s in committed))
    tau = delay_tau([s.source_seen for s in trace.steps], len(source_tokens))
    print(f"tau = {tau:.6f} truncated = {int(trace.truncated)}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    svg_path = out / "trace.svg"
    svg_path.write_text(trace_svg(source_tokens, target_tokens, committed),
                        encoding="utf-8")
    print(f"svg: {svg_path}")
    return 0


def cmd_sweep(args) -> int:
    model = load_checkpoint(args.checkpoint)
    src_lines = _read_token_lines(args.source)
    ref_lines = _read_token_lines(args.reference)
    if len(src_lines) != len(ref_lines):
        raise DataError("source and reference corpora have different sizes")
    if not src_lines:
        raise DataError("empty corpus")
    config = load_config(args.config)
    grid = config["sweep"]
    criteria = list(grid["criteria"])
    if args.include_entropy and "entropy" not in criteria:
        criteria.append("entropy")
    sources = [list(model.source_vocab.encode(tokens)) for tokens in src_lines]

    rows = run_sweep(model.params, model.config, model.target_vocab,
                     sources, ref_lines,
                     deltas=grid["deltas"], s0s=grid["s0s"], criteria=criteria,
                     beam_width=args.beam_width, max_target_len=args.max_len)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_lines = ["criterion,delta,s0,bleu,mean_tau,q2d"]
    for r in rows:
        delta = "" if r.delta is None else r.delta
        s0 = "" if r.s0 is None else r.s0
        csv_lines.append(f"{r.criterion},{delta},{s0},"
                         f"{r.bleu!r},{r.mean_tau!r},{r.q2d!r}")
    csv_path = out / "sweep.csv"
    _write_lines(csv_path, csv_lines)
    svg_path = out / "frontier.svg"
    svg_path.write_text(frontier_svg(rows), encoding="utf-8")

    for criterion, row in sorted(best_by_q2d(rows).items()):
        print(f"best q2d[{criterion}]: delta={row.delta} s0={row.s0} "
              f"bleu={row.bleu:.4f} mean_tau={row.mean_tau:.4f} "
              f"q2d={row.q2d:.4f}")
    print(f"{len(rows)} rows: {csv_path}")
    print(f"frontier: {svg_path}")
    return 0


def cmd_bleu(args) -> int:
    hyps = _read_token_lines(args.hypotheses)
    refs = _read_token_lines(args.references)
    if len(hyps) != len(refs):
        raise DataError("hypothesis and reference counts differ")
    if not hyps:
        raise DataError("empty corpus")
    report = corpus_bleu(hyps, refs)
    print(f"BLEU = {report.bleu:.4f}")
    print("precisions: " + " ".join(f"p{i + 1}={p:.4f}"
                                    for i, p in enumerate(report.precisions)))
    print(f"brevity_penalty = {report.brevity_penalty:.4f} "
          f"hyp_len = {report.hyp_len} ref_len = {report.ref_len}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="simulmt",
                     description="Train and evaluate a desk-scale attention "
                                 "translator with simultaneous greedy decoding.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON run config")
    p.add_argument("--config", help="JSON run config (defaults: cipher task)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", default="run", help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="translate a file of sentences")
    p.add_argument("checkpoint")
    p.add_argument("input", help="one whitespace-tokenized sentence per line")
    p.add_argument("mode", choices=["greedy", "beam"])
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("simul",
                       help="simultaneous decoding over stdin/stdout: one "
                            f"source token per line, sentences end with {EOS}")
    p.add_argument("checkpoint")
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--s0", type=int, default=1)
    p.add_argument("--criterion", choices=list(CRITERION_NAMES),
                   default="worse")
    p.add_argument("--max-len", type=int, default=None)
    p.set_defaults(func=cmd_simul)

    p = sub.add_parser("sweep", help="grid-evaluate quality vs. delay")
    p.add_argument("checkpoint")
    p.add_argument("source", help="test sources, one sentence per line")
    p.add_argument("reference", help="test references, one sentence per line")
    p.add_argument("--config", help="JSON run config with a sweep section")
    p.add_argument("--include-entropy", action="store_true",
                   help="add the entropy criterion to the grid")
    p.add_argument("--beam-width", type=int, default=5)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("trace", help="render one simultaneous decode")
    p.add_argument("checkpoint")
    p.add_argument("sentence", help="whitespace-tokenized source sentence")
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--s0", type=int, default=1)
    p.add_argument("--criterion", choices=list(CRITERION_NAMES),
                   default="worse")
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("bleu", help="corpus BLEU of one file against another")
    p.add_argument("hypotheses")
    p.add_argument("references")
    p.set_defaults(func=cmd_bleu)
    return parser


def entry(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, CheckpointError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(entry())


if __name__ == "__main__":
    main()
