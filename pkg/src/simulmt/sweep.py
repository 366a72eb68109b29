"""Grid evaluation: decode a test corpus under every (criterion, delta, s0)
cell plus the consecutive greedy and beam baselines, scoring each cell by
BLEU, mean delay and their ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .decoding import (SimulConfig, beam_search, forward_pass_bound,
                       greedy_decode, simul_greedy_decode)
from .metrics import corpus_bleu, delay_tau, q2d
from .model import ModelConfig, ModelParams
from .vocab import EOS_ID, Vocabulary

DEFAULT_DELTAS = (1, 2, 3)
DEFAULT_S0S = (2, 3, 4, 5, 6, 7)
DEFAULT_CRITERIA = ("worse", "diff")  # entropy is opt-in
BASELINE_BEAM_WIDTH = 5


@dataclass(frozen=True)
class SweepResult:
    criterion: str      # waiting criterion, or "greedy"/"beam" for baselines
    delta: int | None   # None on baseline rows
    s0: int | None
    bleu: float
    mean_tau: float
    q2d: float


def _strip_eos(tokens: Sequence[int]) -> list[int]:
    out = list(tokens)
    if out and out[-1] == EOS_ID:
        out.pop()
    return out


def _to_strings(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    return [vocab.token(i) for i in ids]


def run_sweep(params: ModelParams, config: ModelConfig,
              target_vocab: Vocabulary,
              sources: Sequence[Sequence[int]],
              references: Sequence[Sequence[str]],
              deltas: Sequence[int] = DEFAULT_DELTAS,
              s0s: Sequence[int] = DEFAULT_S0S,
              criteria: Sequence[str] = DEFAULT_CRITERIA,
              beam_width: int = BASELINE_BEAM_WIDTH,
              max_target_len: int | None = None) -> list[SweepResult]:
    """Evaluate the whole grid; returns |criteria|*|deltas|*|s0s| + 2 rows.

    Swept rows are ordered lexicographically by (criterion, delta, s0); the
    greedy and beam baseline rows (mean_tau exactly 1) come last. references
    are token strings without eos; BLEU compares them against the decoded
    tokens mapped through target_vocab. Every sentence decode is checked
    against the forward-pass complexity bound and a violation aborts the
    sweep: the bound is an implementation contract, not a statistic.
    """
    if not sources:
        raise ValueError("empty corpus")
    if len(sources) != len(references):
        raise ValueError("source and reference counts differ")
    if not deltas or not s0s or not criteria:
        raise ValueError("sweep grid must be non-empty")
    refs = [list(r) for r in references]

    rows = []
    for criterion in sorted(criteria):
        for delta in sorted(deltas):
            for s0 in sorted(s0s):
                sim = SimulConfig(delta=delta, s0=s0, criterion=criterion,
                                  max_target_len=max_target_len)
                taus = []
                hyps = []
                for source in sources:
                    trace = simul_greedy_decode(params, config, source, sim)
                    bound = forward_pass_bound(len(source), len(trace.steps),
                                               s0, delta)
                    if trace.forward_passes > bound:
                        raise AssertionError(
                            f"complexity bound violated: {trace.forward_passes} "
                            f"forward passes > {bound} "
                            f"(|X|={len(source)}, |Y|={len(trace.steps)}, "
                            f"s0={s0}, delta={delta})")
                    seen = [s.source_seen for s in trace.steps]
                    taus.append(delay_tau(seen, len(source)))
                    hyps.append(_to_strings(_strip_eos(trace.tokens),
                                            target_vocab))
                bleu = corpus_bleu(hyps, refs).bleu
                mean_tau = sum(taus) / len(taus)
                rows.append(SweepResult(criterion, delta, s0, bleu, mean_tau,
                                        q2d(bleu, mean_tau)))

    greedy_hyps = []
    for source in sources:
        trace = greedy_decode(params, config, source)
        greedy_hyps.append(_to_strings(_strip_eos(trace.tokens), target_vocab))
    bleu = corpus_bleu(greedy_hyps, refs).bleu
    rows.append(SweepResult("greedy", None, None, bleu, 1.0, q2d(bleu, 1.0)))

    beam_hyps = []
    for source in sources:
        result = beam_search(params, config, source, beam_width=beam_width)
        beam_hyps.append(_to_strings(_strip_eos(result.tokens), target_vocab))
    bleu = corpus_bleu(beam_hyps, refs).bleu
    rows.append(SweepResult("beam", None, None, bleu, 1.0, q2d(bleu, 1.0)))
    return rows


def best_by_q2d(rows: Sequence[SweepResult]) -> dict[str, SweepResult]:
    """Highest-q2d swept row per criterion; baselines are not configurations."""
    best: dict[str, SweepResult] = {}
    for row in rows:
        if row.delta is None:
            continue
        if row.criterion not in best or row.q2d > best[row.criterion].q2d:
            best[row.criterion] = row
    return best
