"""Desk-scale attention translation with simultaneous greedy decoding.

The package is organized bottom-up: numerics (softmax family, finite
differences, a portable RNG), the encoder-decoder model, training
(backpropagation through time plus adadelta), decoding (consecutive greedy,
beam, and the incremental-source engine), metrics (BLEU, delay, their
ratio), the quality/delay sweep, and a CLI tying it together.
"""

from .checkpoint import CheckpointError, Model, load_checkpoint, save_checkpoint
from .decoding import (DecodeResult, DecodingTrace, InputPipe, OutputPipe,
                       SimulConfig, TraceStep, WaitDecision, beam_search,
                       end_of_source_read, evaluate_criterion,
                       forward_pass_bound, greedy_decode, simul_greedy_decode,
                       wait_if_diff, wait_if_entropy, wait_if_worse)
from .metrics import (AlignmentChunk, BleuReport, DelayReport,
                      alignment_chunks, corpus_bleu, delay_tau, q2d,
                      token_accuracy, trace_delay)
from .model import (AttentionOutput, ContextSet, DecoderState, ModelConfig,
                    ModelParams, attend, decoder_step, empty_context, encode,
                    extend_context, init_decoder, next_token_logprobs,
                    output_logprobs)
from .numerics import Rng, entropy, fd_gradient, log_softmax, softmax
from .sweep import SweepResult, best_by_q2d, run_sweep
from .training import (DivergenceError, SentencePair, TaskData, TaskSpec,
                       TrainResult, generate_task, grad_nll,
                       mean_token_logprob, nll, train)
from .vocab import EOS, EOS_ID, PAD, PAD_ID, UNK, UNK_ID, Vocabulary

__all__ = [
    "AlignmentChunk", "AttentionOutput", "BleuReport", "CheckpointError",
    "ContextSet", "DecodeResult", "DecoderState", "DecodingTrace",
    "DelayReport", "DivergenceError", "EOS", "EOS_ID", "InputPipe", "Model",
    "ModelConfig", "ModelParams", "OutputPipe", "PAD", "PAD_ID", "Rng",
    "SentencePair", "SimulConfig", "SweepResult", "TaskData", "TaskSpec",
    "TraceStep", "TrainResult", "UNK", "UNK_ID", "Vocabulary", "WaitDecision",
    "alignment_chunks", "attend", "beam_search", "best_by_q2d", "corpus_bleu",
    "decoder_step", "delay_tau", "empty_context", "encode",
    "end_of_source_read", "entropy", "evaluate_criterion", "extend_context",
    "fd_gradient", "forward_pass_bound", "generate_task", "grad_nll",
    "greedy_decode", "init_decoder", "load_checkpoint", "log_softmax",
    "mean_token_logprob", "next_token_logprobs", "nll", "output_logprobs",
    "q2d", "run_sweep", "save_checkpoint", "simul_greedy_decode", "softmax",
    "token_accuracy", "trace_delay", "train", "wait_if_diff",
    "wait_if_entropy", "wait_if_worse",
]
