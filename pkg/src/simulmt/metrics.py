"""Quality and delay measurement: corpus BLEU, the normalized delay tau,
their ratio, token accuracy, and the source/target alignment chunks implied
by a simultaneous decode.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

BLEU_MAX_ORDER = 4


@dataclass(frozen=True)
class BleuReport:
    bleu: float                      # 0..100
    precisions: tuple[float, ...]    # clipped n-gram precisions, n = 1..4
    brevity_penalty: float
    hyp_len: int
    ref_len: int


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence[Sequence],
                references: Sequence[Sequence],
                max_n: int = BLEU_MAX_ORDER) -> BleuReport:
    """Corpus-level BLEU, orders 1..max_n, no smoothing.

    Counts are pooled over the corpus before dividing, clipped per sentence
    against the reference. Any order with zero matches gives a BLEU of 0;
    the brevity penalty is min(1, exp(1 - ref_len/hyp_len)).
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    if not hypotheses:
        raise ValueError("empty corpus")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            counts = _ngrams(hyp, n)
            if not counts:
                continue
            limits = _ngrams(ref, n)
            totals[n - 1] += sum(counts.values())
            matches[n - 1] += sum(min(c, limits[g]) for g, c in counts.items())
    precisions = tuple(m / t if t else 0.0 for m, t in zip(matches, totals))
    if hyp_len == 0:
        return BleuReport(0.0, precisions, 0.0, hyp_len, ref_len)
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    if any(p == 0.0 for p in precisions):
        return BleuReport(0.0, precisions, bp, hyp_len, ref_len)
    log_mean = sum(math.log(p) for p in precisions) / max_n
    return BleuReport(100.0 * bp * math.exp(log_mean), precisions, bp,
                      hyp_len, ref_len)


def token_accuracy(hypotheses: Sequence[Sequence],
                   references: Sequence[Sequence]) -> float:
    """Fraction of positions where tokens match, pooled over the corpus.

    Each pair contributes matches at shared positions out of the longer
    length, so insertions and deletions both count against it.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis and reference counts differ")
    matched = 0
    total = 0
    for hyp, ref in zip(hypotheses, references):
        hyp = list(hyp)
        ref = list(ref)
        matched += sum(1 for a, b in zip(hyp, ref) if a == b)
        total += max(len(hyp), len(ref))
    if total == 0:
        raise ValueError("empty corpus")
    return matched / total


# ---------------------------------------------------------------------------
# Delay
# ---------------------------------------------------------------------------

def delay_tau(seen: Sequence[int], source_len: int) -> float:
    """Normalized delay: mean of s(t)/|X| over the emitted target tokens.

    seen[t] is how many source tokens had been read when target token t was
    decided. Full-source decoding gives exactly 1; word-by-word decoding of
    an equal-length pair gives (T+1)/(2T), which only approaches 1/2.
    """
    if not seen or source_len < 1:
        raise ValueError("undefined delay: need a non-empty target and source")
    for s in seen:
        if not 1 <= s <= source_len:
            raise ValueError(
                f"impossible read count {s} for a source of {source_len} tokens")
    return sum(seen) / (source_len * len(seen))


@dataclass(frozen=True)
class DelayReport:
    tau: float
    mean_s_prime_ratio: float   # mean s'(t) / |X|, the alignment-side delay
    source_len: int
    seen: tuple[int, ...]       # s(t), pending chunk included
    committed: tuple[int, ...]  # s'(t), committed context only


def trace_delay(trace, source_len: int) -> DelayReport:
    """Delay bookkeeping of one DecodingTrace against the true source length."""
    seen = tuple(step.source_seen for step in trace.steps)
    committed = tuple(step.source_committed for step in trace.steps)
    tau = delay_tau(seen, source_len)
    ratio = sum(committed) / (source_len * len(committed))
    return DelayReport(tau=tau, mean_s_prime_ratio=ratio,
                       source_len=source_len, seen=seen, committed=committed)


def q2d(bleu: float, mean_tau: float) -> float:
    """Quality-to-delay ratio: BLEU per unit of normalized delay."""
    if mean_tau <= 0.0:
        raise ValueError("undefined quality-to-delay ratio: mean tau must be > 0")
    return bleu / mean_tau


# ---------------------------------------------------------------------------
# Alignment chunks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlignmentChunk:
    """Consecutive target tokens decoded under the same committed context.

    Indices are 0-based and half-open: target tokens
    [target_start, target_end) align to source tokens
    [source_start, source_end), where source_end is the shared committed
    context size and source_start is the previous chunk's.
    """

    target_start: int
    target_end: int
    source_start: int
    source_end: int


def alignment_chunks(trace_or_committed) -> list[AlignmentChunk]:
    """Group consecutive equal s'(t) values into alignment chunks.

    Accepts a decoding trace or a bare nondecreasing sequence of committed
    context sizes. Chunks partition the target; source spans are disjoint
    and ordered but need not cover the source (trailing tokens may have
    been read without any commit under them alone).
    """
    steps = getattr(trace_or_committed, "steps", None)
    committed = [s.source_committed for s in steps] if steps is not None \
        else list(trace_or_committed)
    if not committed:
        return []
    prev = 0
    for s in committed:
        if s < 1:
            raise ValueError("committed context sizes must be >= 1")
        if s < prev:
            raise ValueError("committed context sizes must be nondecreasing")
        prev = s
    chunks = []
    start = 0
    source_start = 0
    for i in range(1, len(committed) + 1):
        if i == len(committed) or committed[i] != committed[start]:
            chunks.append(AlignmentChunk(target_start=start, target_end=i,
                                         source_start=source_start,
                                         source_end=committed[start]))
            source_start = committed[start]
            start = i
    return chunks
