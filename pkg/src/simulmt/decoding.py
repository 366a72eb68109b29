"""Decoding: full-source greedy and beam search, and the simultaneous
greedy decoder that starts emitting target tokens before the source has
fully arrived.

The simultaneous decoder keeps a committed context set C and a pending
chunk C' of freshly read tokens. Each turn it either commits its best next
token under C, or (when a waiting criterion judges the pending tokens to
matter) folds C' into C and reads on. Commits are irrevocable and are
handed to the output pipe before the next read, so a streaming consumer
sees every token the moment it is decided.

Distributions under C and under C+C' are cached, so the work stays within
twice that of plain greedy decoding; see forward_pass_bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .model import (ContextSet, DecoderState, ModelConfig, ModelParams,
                    decoder_step, empty_context, encode, extend_context,
                    init_decoder, next_token_logprobs)
from .numerics import entropy
from .vocab import EOS_ID

TARGET_CAP_SLACK = 10  # default target length cap is 2*|source| + this


def default_target_cap(source_len: int) -> int:
    return 2 * source_len + TARGET_CAP_SLACK


# ---------------------------------------------------------------------------
# Waiting criteria
# ---------------------------------------------------------------------------

def wait_if_worse(logp_small: float, logp_large: float) -> bool:
    """Wait when the chosen token looks strictly better under less context.

    logp_small is the log-probability of the small-context argmax token;
    logp_large is the same token's log-probability once the pending chunk is
    visible. A strict drop means the token was chosen on thin evidence.
    """
    return logp_small > logp_large


def wait_if_diff(argmax_small: int, argmax_large: int) -> bool:
    """Wait when extra context changes the most likely token."""
    return argmax_small != argmax_large


def wait_if_entropy(dist_small, dist_large) -> bool:
    """Wait when the small-context distribution is strictly less certain.

    Takes probability vectors, not log-probabilities.
    """
    return entropy(np.asarray(dist_small)) > entropy(np.asarray(dist_large))


# "always" defers every commit until the source is exhausted; "never"
# commits eagerly. Both are degenerate stubs used as baselines and in tests.
CRITERION_NAMES = ("worse", "diff", "entropy", "always", "never")


@dataclass(frozen=True)
class WaitDecision:
    """Outcome of one criterion evaluation, with the quantities it saw.

    logp_small/logp_large are the log-probabilities of the small-context
    argmax token under the small and the enlarged context respectively.
    """

    wait: bool
    logp_small: float
    logp_large: float
    argmax_small: int
    argmax_large: int


def evaluate_criterion(criterion: str | Callable, small: np.ndarray,
                       large: np.ndarray) -> WaitDecision:
    """Apply a waiting criterion to the two next-token log-distributions.

    criterion is a registry name or a callable over the raw distributions
    (small, large) -> bool. Argmax ties break to the lowest token id.
    """
    argmax_small = int(np.argmax(small))
    argmax_large = int(np.argmax(large))
    logp_small = float(small[argmax_small])
    logp_large = float(large[argmax_small])
    if callable(criterion):
        wait = bool(criterion(small, large))
    elif criterion == "worse":
        wait = wait_if_worse(logp_small, logp_large)
    elif criterion == "diff":
        wait = wait_if_diff(argmax_small, argmax_large)
    elif criterion == "entropy":
        wait = wait_if_entropy(np.exp(small), np.exp(large))
    elif criterion == "always":
        wait = True
    elif criterion == "never":
        wait = False
    else:
        names = ", ".join(CRITERION_NAMES)
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {names}")
    return WaitDecision(wait=wait, logp_small=logp_small, logp_large=logp_large,
                        argmax_small=argmax_small, argmax_large=argmax_large)


# ---------------------------------------------------------------------------
# Pipes
# ---------------------------------------------------------------------------

class InputPipe:
    """Pulls source token ids on demand and stops at the first eos.

    tokens_read counts everything delivered so far, eos included; exhausted
    becomes true once eos is consumed or the underlying stream ends. The
    laziness matters: with a live stream nothing past the requested tokens
    is touched, so reads interleave correctly with commits.
    """

    def __init__(self, tokens: Iterable[int]):
        self._it: Iterator[int] = iter(tokens)
        self.exhausted = False
        self.tokens_read = 0

    def read(self, count: int) -> list[int]:
        out: list[int] = []
        while len(out) < count and not self.exhausted:
            try:
                token = next(self._it)
            except StopIteration:
                self.exhausted = True
                break
            out.append(int(token))
            self.tokens_read += 1
            if token == EOS_ID:
                self.exhausted = True
        return out


def end_of_source_read(pipe: InputPipe, count: int) -> tuple[list[int], bool]:
    """Read up to count tokens; the flag reports end of source.

    Fewer than count tokens come back at the end of the stream, and an
    exhausted pipe returns an empty list forever after.
    """
    tokens = pipe.read(count)
    return tokens, pipe.exhausted


@dataclass(frozen=True)
class TraceStep:
    """One committed target token with its delay bookkeeping.

    source_seen is how many source tokens had been read when the commit was
    decided (committed context plus any pending chunk); source_committed is
    the committed context alone, the tokens the decoder actually attended to.
    """

    token: int
    logprob: float
    source_seen: int
    source_committed: int


class OutputPipe:
    """Append-only commit sink: tokens are never retracted or reordered.

    The decoder calls commit once per token, before it reads any further
    source, so a hook here can stream tokens out with no buffering.
    """

    def __init__(self, on_commit: Callable[[TraceStep], None] | None = None):
        self.steps: list[TraceStep] = []
        self._on_commit = on_commit

    def commit(self, step: TraceStep) -> None:
        self.steps.append(step)
        if self._on_commit is not None:
            self._on_commit(step)

    @property
    def tokens(self) -> tuple[int, ...]:
        return tuple(s.token for s in self.steps)


@dataclass
class DecodingTrace:
    steps: list[TraceStep]
    truncated: bool
    forward_passes: int      # next-token distribution evaluations
    source_tokens_read: int  # equals |source| whenever the pipe was drained

    @property
    def tokens(self) -> tuple[int, ...]:
        return tuple(s.token for s in self.steps)

    @property
    def logprobs(self) -> tuple[float, ...]:
        return tuple(s.logprob for s in self.steps)

    @property
    def score(self) -> float:
        return float(sum(s.logprob for s in self.steps))


# ---------------------------------------------------------------------------
# Full-source decoding
# ---------------------------------------------------------------------------

def greedy_decode(params: ModelParams, config: ModelConfig,
                  source_ids: Sequence[int],
                  max_target_len: int | None = None) -> DecodingTrace:
    """Argmax decoding over the whole source; ties go to the lowest id.

    The trace records s(t) = s'(t) = |source| for every step: everything
    was read before the first decision.
    """
    source_ids = list(source_ids)
    ctx = encode(params, config, source_ids)
    state = init_decoder(params, ctx)
    cap = default_target_cap(len(source_ids)) if max_target_len is None \
        else max_target_len
    n = len(source_ids)
    steps: list[TraceStep] = []
    truncated = False
    while True:
        logp, att = next_token_logprobs(params, state, ctx)
        y = int(np.argmax(logp))
        steps.append(TraceStep(token=y, logprob=float(logp[y]),
                               source_seen=n, source_committed=n))
        if y == EOS_ID:
            break
        if len(steps) >= cap:
            truncated = True
            break
        state = DecoderState(decoder_step(params, state, att).hidden, y)
    return DecodingTrace(steps=steps, truncated=truncated,
                         forward_passes=len(steps), source_tokens_read=n)


@dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[int, ...]      # ends with eos unless truncated
    logprobs: tuple[float, ...]  # log-probability of each token when chosen
    truncated: bool

    @property
    def score(self) -> float:
        return float(sum(self.logprobs))


def beam_search(params: ModelParams, config: ModelConfig,
                source_ids: Sequence[int], beam_width: int = 5,
                max_target_len: int | None = None) -> DecodeResult:
    """Beam search scored by summed log-probability, no length penalty.

    Hypotheses ending in eos are frozen. Candidate ties order by
    (score, parent index, token id), so width 1 reproduces greedy_decode
    exactly. The search stops once the best finished hypothesis cannot be
    beaten: extending never increases a score.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    source_ids = list(source_ids)
    ctx = encode(params, config, source_ids)
    start = init_decoder(params, ctx)
    cap = default_target_cap(len(source_ids)) if max_target_len is None \
        else max_target_len

    # live hypothesis: (score, tokens, per-token logprobs, state)
    live = [(0.0, (), (), start)]
    best_done: tuple[float, tuple, tuple] | None = None
    for _ in range(cap):
        candidates = []
        for parent, (score, _, _, state) in enumerate(live):
            logp, att = next_token_logprobs(params, state, ctx)
            advanced = decoder_step(params, state, att)
            for v in range(config.target_vocab_size):
                candidates.append((score + float(logp[v]), parent, v,
                                   float(logp[v]), advanced))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        next_live = []
        for score, parent, v, lp, advanced in candidates[:beam_width]:
            tokens = live[parent][1] + (v,)
            logprobs = live[parent][2] + (lp,)
            if v == EOS_ID:
                if best_done is None or score > best_done[0]:
                    best_done = (score, tokens, logprobs)
            else:
                next_live.append((score, tokens, logprobs,
                                  DecoderState(advanced.hidden, v)))
        live = next_live
        if not live:
            break
        if best_done is not None and best_done[0] >= live[0][0]:
            break
    if best_done is not None and (not live or best_done[0] >= live[0][0]):
        return DecodeResult(best_done[1], best_done[2], False)
    score, tokens, logprobs, _ = live[0]
    return DecodeResult(tokens, logprobs, True)


# ---------------------------------------------------------------------------
# Simultaneous greedy decoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulConfig:
    delta: int = 1                      # source tokens per incremental read
    s0: int = 1                         # tokens read before the first decision
    criterion: str | Callable = "worse"
    max_target_len: int | None = None   # None: 2*|source| + 10

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.s0 < 1:
            raise ValueError("s0 must be >= 1")
        if self.max_target_len is not None and self.max_target_len < 1:
            raise ValueError("max_target_len must be >= 1")
        if not callable(self.criterion) and self.criterion not in CRITERION_NAMES:
            names = ", ".join(CRITERION_NAMES)
            raise ValueError(
                f"unknown criterion {self.criterion!r}; expected one of {names}")


def forward_pass_bound(source_len: int, target_len: int,
                       s0: int, delta: int) -> int:
    """Distribution evaluations never exceed twice (commits + reads)."""
    reads = max(0, math.ceil((source_len - s0) / delta))
    return 2 * (target_len + reads)


def simul_greedy_decode(params: ModelParams, config: ModelConfig,
                        source: InputPipe | Iterable[int],
                        simul: SimulConfig,
                        output: OutputPipe | None = None) -> DecodingTrace:
    """Decode while the source is still arriving.

    Start by reading s0 tokens into the committed context C. Then loop:
    take the argmax token under C; if the source is exhausted and nothing
    is pending, commit it outright; otherwise make sure a pending chunk C'
    of up to delta tokens has been read (reads happen only when C' is
    empty) and ask the criterion whether the distribution shift from C to
    C+C' warrants waiting. Waiting folds C' into C, reusing the
    large-context distribution rather than recomputing it; otherwise the
    token is committed under C and C' stays pending for the next decision.
    A chunk left pending when the source ends is folded in unconditionally:
    with nothing more to read there is no commit-or-wait tradeoff left, and
    every read token should inform the translation.

    Per committed token the trace records s(t), the tokens read when the
    decision was made (|C| + |C'|), and s'(t) = |C|, the tokens actually
    conditioning it.

    Stops at eos, or with truncated=True at max_target_len (default
    2*|source| + 10; when the full source length is not yet known the
    decoder reads the rest before declaring truncation, so the default cap
    is always relative to the true length).
    """
    pipe = source if isinstance(source, InputPipe) else InputPipe(source)
    ctx = extend_context(params, config, empty_context(config),
                         pipe.read(simul.s0))
    if ctx.token_count == 0:
        raise ValueError("empty source")
    state = init_decoder(params, ctx)

    pending: list[int] = []
    pending_ctx: ContextSet | None = None  # always ctx extended by pending
    dist_small = att_small = None  # distribution under ctx, for this state
    dist_large = att_large = None  # under pending_ctx, for this state
    passes = 0
    steps: list[TraceStep] = []
    truncated = False

    while True:
        if pipe.exhausted and pending:
            # leftover chunk: nothing more will arrive, fold unconditionally
            ctx = pending_ctx
            pending, pending_ctx = [], None
            dist_small = att_small = dist_large = att_large = None
        if dist_small is None:
            dist_small, att_small = next_token_logprobs(params, state, ctx)
            passes += 1
        y = int(np.argmax(dist_small))

        if pipe.exhausted:
            seen = committed = ctx.token_count
        else:
            if not pending:
                chunk = pipe.read(simul.delta)
                if not chunk:
                    continue  # stream just ended; handled at the top
                pending = chunk
                pending_ctx = extend_context(params, config, ctx, chunk)
                dist_large = att_large = None
                if pipe.exhausted:
                    continue  # final chunk: folded unconditionally at the top
            if dist_large is None:
                dist_large, att_large = next_token_logprobs(params, state,
                                                            pending_ctx)
                passes += 1
            if evaluate_criterion(simul.criterion, dist_small, dist_large).wait:
                # accept: C grows to C+C'; the large-context distribution and
                # attention are reused as-is, nothing is recomputed
                ctx = pending_ctx
                pending, pending_ctx = [], None
                dist_small, att_small = dist_large, att_large
                dist_large = att_large = None
                continue
            seen = ctx.token_count + len(pending)
            committed = ctx.token_count

        step = TraceStep(token=y, logprob=float(dist_small[y]),
                         source_seen=seen, source_committed=committed)
        steps.append(step)
        if output is not None:
            output.commit(step)
        state = DecoderState(decoder_step(params, state, att_small).hidden, y)
        dist_small = att_small = dist_large = att_large = None
        if y == EOS_ID:
            break
        if simul.max_target_len is not None:
            if len(steps) >= simul.max_target_len:
                truncated = True
                break
            continue
        if len(steps) >= default_target_cap(pipe.tokens_read):
            # The default cap depends on the full source length; read the
            # rest (normal delta-sized reads) before judging truncation.
            while not pipe.exhausted:
                more = pipe.read(simul.delta)
                if more:
                    pending.extend(more)
                    pending_ctx = extend_context(
                        params, config,
                        pending_ctx if pending_ctx is not None else ctx, more)
            if len(steps) >= default_target_cap(pipe.tokens_read):
                truncated = True
                break
    return DecodingTrace(steps=steps, truncated=truncated,
                         forward_passes=passes,
                         source_tokens_read=pipe.tokens_read)
