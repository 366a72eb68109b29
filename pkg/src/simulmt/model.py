"""Attention-based encoder-decoder with an incrementally extendable encoder.

The encoder is a unidirectional GRU producing one context vector per source
token. The decoder is a GRU conditioned on a content-based attention context;
its next-token distribution is a log-softmax over the target vocabulary.
Because the encoder is strictly left-to-right, feeding it more source tokens
later gives bit-identical context vectors to encoding the whole prefix at
once, which is what makes incremental (simultaneous) decoding exact.

GRU convention, pinned for reproducibility:

    r  = sigmoid(W_r x + U_r h + b_r)
    u  = sigmoid(W_u x + U_u h + b_u)
    g  = tanh(W_c x + U_c (r*h) + b_c)
    h' = (1 - u)*h + u*g

With all-zero weights this gives h' = 0.5*h exactly, which the tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng, log_softmax, softmax

INIT_SIGMA = 0.01  # stddev of weight init

# Desk-scale defaults: big models are pointless on synthetic tasks.
DEFAULT_EMBEDDING_DIM = 32
DEFAULT_HIDDEN_DIM = 64
DEFAULT_ATTENTION_DIM = 64


@dataclass(frozen=True)
class ModelConfig:
    source_vocab_size: int
    target_vocab_size: int
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    attention_dim: int = DEFAULT_ATTENTION_DIM

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class GruParams:
    """Weights of one GRU cell; x is the input, h the recurrent state."""

    w_r: np.ndarray  # (hidden, input)
    w_u: np.ndarray
    w_c: np.ndarray
    u_r: np.ndarray  # (hidden, hidden)
    u_u: np.ndarray
    u_c: np.ndarray
    b_r: np.ndarray  # (hidden,)
    b_u: np.ndarray
    b_c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int, inputs: int) -> "GruParams":
        return cls(
            *(np.zeros((hidden, inputs)) for _ in range(3)),
            *(np.zeros((hidden, hidden)) for _ in range(3)),
            *(np.zeros(hidden) for _ in range(3)),
        )

    @classmethod
    def init(cls, hidden: int, inputs: int, rng: Rng) -> "GruParams":
        return cls(
            *(rng.gauss_matrix(hidden, inputs, INIT_SIGMA) for _ in range(3)),
            *(rng.gauss_matrix(hidden, hidden, INIT_SIGMA) for _ in range(3)),
            *(np.zeros(hidden) for _ in range(3)),
        )

    def arrays(self) -> list[np.ndarray]:
        return [self.w_r, self.w_u, self.w_c, self.u_r, self.u_u, self.u_c,
                self.b_r, self.b_u, self.b_c]


@dataclass
class ModelParams:
    """All learned weights.

    Tensor order, used verbatim by the optimizer, the flat-vector view and
    the checkpoint format:

        src_emb, tgt_emb,
        encoder (w_r, w_u, w_c, u_r, u_u, u_c, b_r, b_u, b_c),
        decoder (same nine),
        att_w, att_u, att_e, att_b, att_v,
        out_w, out_b,
        init_w, init_b
    """

    src_emb: np.ndarray  # (src_vocab, emb)
    tgt_emb: np.ndarray  # (tgt_vocab, emb)
    encoder: GruParams   # input = source embedding
    decoder: GruParams   # input = concat(target embedding, attention context)
    att_w: np.ndarray    # (att, hidden)   applied to decoder state
    att_u: np.ndarray    # (att, hidden)   applied to each context vector
    att_e: np.ndarray    # (att, emb)      applied to prev target embedding
    att_b: np.ndarray    # (att,)
    att_v: np.ndarray    # (att,)          scoring vector
    out_w: np.ndarray    # (tgt_vocab, hidden)
    out_b: np.ndarray    # (tgt_vocab,)
    init_w: np.ndarray   # (hidden, hidden) decoder init from encoder carry
    init_b: np.ndarray   # (hidden,)

    @classmethod
    def zeros(cls, config: ModelConfig) -> "ModelParams":
        e, h, a = config.embedding_dim, config.hidden_dim, config.attention_dim
        return cls(
            src_emb=np.zeros((config.source_vocab_size, e)),
            tgt_emb=np.zeros((config.target_vocab_size, e)),
            encoder=GruParams.zeros(h, e),
            decoder=GruParams.zeros(h, e + h),
            att_w=np.zeros((a, h)),
            att_u=np.zeros((a, h)),
            att_e=np.zeros((a, e)),
            att_b=np.zeros(a),
            att_v=np.zeros(a),
            out_w=np.zeros((config.target_vocab_size, h)),
            out_b=np.zeros(config.target_vocab_size),
            init_w=np.zeros((h, h)),
            init_b=np.zeros(h),
        )

    @classmethod
    def init(cls, config: ModelConfig, rng: Rng) -> "ModelParams":
        """Gaussian(0, 0.01) matrices, zero biases, drawn in tensor order."""
        e, h, a = config.embedding_dim, config.hidden_dim, config.attention_dim
        return cls(
            src_emb=rng.gauss_matrix(config.source_vocab_size, e, INIT_SIGMA),
            tgt_emb=rng.gauss_matrix(config.target_vocab_size, e, INIT_SIGMA),
            encoder=GruParams.init(h, e, rng),
            decoder=GruParams.init(h, e + h, rng),
            att_w=rng.gauss_matrix(a, h, INIT_SIGMA),
            att_u=rng.gauss_matrix(a, h, INIT_SIGMA),
            att_e=rng.gauss_matrix(a, e, INIT_SIGMA),
            att_b=np.zeros(a),
            att_v=rng.gauss_matrix(1, a, INIT_SIGMA)[0],
            out_w=rng.gauss_matrix(config.target_vocab_size, h, INIT_SIGMA),
            out_b=np.zeros(config.target_vocab_size),
            init_w=rng.gauss_matrix(h, h, INIT_SIGMA),
            init_b=np.zeros(h),
        )

    def arrays(self) -> list[np.ndarray]:
        return [self.src_emb, self.tgt_emb,
                *self.encoder.arrays(), *self.decoder.arrays(),
                self.att_w, self.att_u, self.att_e, self.att_b, self.att_v,
                self.out_w, self.out_b, self.init_w, self.init_b]

    def copy(self) -> "ModelParams":
        flat = [a.copy() for a in self.arrays()]
        return _params_from_arrays(flat)


def _params_from_arrays(arrays: list[np.ndarray]) -> ModelParams:
    return ModelParams(
        src_emb=arrays[0], tgt_emb=arrays[1],
        encoder=GruParams(*arrays[2:11]),
        decoder=GruParams(*arrays[11:20]),
        att_w=arrays[20], att_u=arrays[21], att_e=arrays[22],
        att_b=arrays[23], att_v=arrays[24],
        out_w=arrays[25], out_b=arrays[26],
        init_w=arrays[27], init_b=arrays[28],
    )


def flatten_params(params: ModelParams) -> np.ndarray:
    """All tensors concatenated into one vector, in tensor order."""
    return np.concatenate([a.ravel() for a in params.arrays()])


def unflatten_params(config: ModelConfig, flat: np.ndarray) -> ModelParams:
    """Inverse of flatten_params for the given config's shapes."""
    template = ModelParams.zeros(config)
    arrays = []
    offset = 0
    for a in template.arrays():
        n = a.size
        arrays.append(np.asarray(flat[offset:offset + n], dtype=np.float64)
                      .reshape(a.shape).copy())
        offset += n
    if offset != flat.size:
        raise ValueError(f"flat vector has {flat.size} entries, expected {offset}")
    return _params_from_arrays(arrays)


@dataclass
class ContextSet:
    """Encoder outputs for the source prefix read so far.

    `vectors` is (s, hidden) with one row per source token; `carry` is the
    encoder hidden state after the last token, i.e. vectors[-1] when s > 0
    and the zero vector when s = 0.
    """

    vectors: np.ndarray
    carry: np.ndarray

    @property
    def token_count(self) -> int:
        return self.vectors.shape[0]


@dataclass
class DecoderState:
    hidden: np.ndarray  # (hidden,)
    prev_token: int     # id of the last committed target token (eos at start)


@dataclass
class AttentionOutput:
    weights: np.ndarray  # (s,), nonnegative, sums to 1
    context: np.ndarray  # (hidden,) = weights @ context vectors


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Branchless stable sigmoid: exp argument is always <= 0.
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0, e) / (1.0 + e)


def gru_step(p: GruParams, h: np.ndarray, x: np.ndarray) -> np.ndarray:
    """One GRU update; see the module docstring for the convention."""
    r = _sigmoid(p.w_r @ x + p.u_r @ h + p.b_r)
    u = _sigmoid(p.w_u @ x + p.u_u @ h + p.b_u)
    g = np.tanh(p.w_c @ x + p.u_c @ (r * h) + p.b_c)
    return (1.0 - u) * h + u * g


def empty_context(config: ModelConfig) -> ContextSet:
    h = config.hidden_dim
    return ContextSet(vectors=np.zeros((0, h)), carry=np.zeros(h))


def _check_ids(ids, vocab_size: int, side: str) -> None:
    for i in ids:
        if not 0 <= i < vocab_size:
            raise ValueError(f"{side} token id {i} out of range [0, {vocab_size})")


def extend_context(params: ModelParams, config: ModelConfig,
                   ctx: ContextSet, new_ids) -> ContextSet:
    """Continue the encoder recurrence from ctx.carry over new_ids.

    The original vectors are not modified; the result appends one vector per
    new token. extend_context(encode(prefix), suffix) is bit-identical to
    encode(prefix + suffix) because the per-step operations are the same.
    """
    _check_ids(new_ids, config.source_vocab_size, "source")
    if not new_ids:
        return ContextSet(ctx.vectors, ctx.carry)
    h = ctx.carry
    rows = []
    for token_id in new_ids:
        h = gru_step(params.encoder, h, params.src_emb[token_id])
        rows.append(h)
    return ContextSet(np.concatenate([ctx.vectors, np.stack(rows)]), h)


def encode(params: ModelParams, config: ModelConfig, source_ids) -> ContextSet:
    """Context vectors for a whole source sequence, from the zero state."""
    return extend_context(params, config, empty_context(config), source_ids)


def init_decoder(params: ModelParams, ctx: ContextSet) -> DecoderState:
    """z0 = tanh(W_i * carry + b_i); prev token starts as eos.

    The reduction over the context set is its last vector (the carry): the
    natural choice for a unidirectional encoder, and free under incremental
    extension.
    """
    if ctx.token_count == 0:
        raise ValueError("cannot init decoder from empty context")
    from .vocab import EOS_ID
    z0 = np.tanh(params.init_w @ ctx.carry + params.init_b)
    return DecoderState(hidden=z0, prev_token=EOS_ID)


def attend(params: ModelParams, state: DecoderState, ctx: ContextSet) -> AttentionOutput:
    """Content-based attention over the context set.

    score_t = v . tanh(W_a z + U_a h_t + E_a emb(prev) + b_a), weights are
    the softmax of the scores, context is their weighted sum of h_t.
    """
    if ctx.token_count == 0:
        raise ValueError("cannot attend over empty context")
    ey = params.tgt_emb[state.prev_token]
    base = params.att_w @ state.hidden + params.att_e @ ey + params.att_b
    scores = np.tanh(ctx.vectors @ params.att_u.T + base) @ params.att_v
    weights = softmax(scores)
    return AttentionOutput(weights=weights, context=weights @ ctx.vectors)


def decoder_step(params: ModelParams, state: DecoderState,
                 att: AttentionOutput) -> DecoderState:
    """Advance the decoder GRU with input concat(emb(prev), context).

    prev_token is carried through unchanged; it is replaced when a token is
    actually committed.
    """
    x = np.concatenate([params.tgt_emb[state.prev_token], att.context])
    return DecoderState(hidden=gru_step(params.decoder, state.hidden, x),
                        prev_token=state.prev_token)


def output_logprobs(params: ModelParams, state: DecoderState) -> np.ndarray:
    """Log-distribution over the target vocabulary from the decoder state."""
    return log_softmax(params.out_w @ state.hidden + params.out_b)


def next_token_logprobs(params: ModelParams, state: DecoderState,
                        ctx: ContextSet) -> tuple[np.ndarray, AttentionOutput]:
    """Distribution the decoder would use for its next token under ctx.

    Composition attend -> decoder_step -> output_logprobs. The attention is
    returned so a caller that decides to commit can advance the state with
    the attention that produced the distribution.
    """
    att = attend(params, state, ctx)
    advanced = decoder_step(params, state, att)
    return output_logprobs(params, advanced), att
