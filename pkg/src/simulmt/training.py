"""Maximum-likelihood training: teacher-forced loss, exact backpropagation
through decoder, attention and encoder, Adadelta updates with early stopping,
and the synthetic task generators used in place of real corpora.

Training is consecutive-translation training: the decoder always sees the
full set of context vectors, never a prefix. The simultaneous behaviour is
purely a decoding-time matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (ModelConfig, ModelParams, encode, init_decoder,
                    _sigmoid, _check_ids)
from .numerics import Rng, log_softmax
from .vocab import EOS_ID, Vocabulary

MAX_TRAIN_LEN = 50  # pairs with a longer side are dropped from training

DEFAULT_RHO = 0.95
DEFAULT_EPS = 1e-6
DEFAULT_BATCH_SIZE = 16


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass(frozen=True)
class SentencePair:
    source: tuple[int, ...]  # token ids, ending in eos
    target: tuple[int, ...]

    def __post_init__(self):
        if not self.source or not self.target:
            raise ValueError("source and target must be non-empty")


# ---------------------------------------------------------------------------
# Loss and gradients
# ---------------------------------------------------------------------------

def _encode_cached(params: ModelParams, config: ModelConfig, source):
    """encode(), but keeping the gate values the backward pass needs.

    Computes the same per-token operations in the same order as gru_step,
    so the states match encode() exactly.
    """
    p = params.encoder
    h = np.zeros(config.hidden_dim)
    rows = []
    gates = []
    for token_id in source:
        x = params.src_emb[token_id]
        r = _sigmoid(p.w_r @ x + p.u_r @ h + p.b_r)
        u = _sigmoid(p.w_u @ x + p.u_u @ h + p.b_u)
        g = np.tanh(p.w_c @ x + p.u_c @ (r * h) + p.b_c)
        gates.append((x, h, r, u, g))
        h = (1.0 - u) * h + u * g
        rows.append(h)
    return ContextSet(np.stack(rows), h), gates


def _teacher_forced_steps(params: ModelParams, config: ModelConfig,
                          pair: SentencePair, keep: bool):
    """Forward pass under teacher forcing over the full source context.

    Returns (loss, (context, encoder gate caches), step_caches); the gate and
    step caches are None unless keep is set. Caches hold exactly what the
    backward pass below consumes.
    """
    _check_ids(pair.source, config.source_vocab_size, "source")
    _check_ids(pair.target, config.target_vocab_size, "target")
    if keep:
        ctx, enc_gates = _encode_cached(params, config, pair.source)
    else:
        ctx, enc_gates = encode(params, config, pair.source), None
    state = init_decoder(params, ctx)
    H = ctx.vectors
    Hu = H @ params.att_u.T  # constant across steps: hoisted out of the loop
    z = state.hidden
    loss = 0.0
    caches = [] if keep else None
    prev_id = EOS_ID
    for target_id in pair.target:
        ey = params.tgt_emb[prev_id]
        base = params.att_w @ z + params.att_e @ ey + params.att_b
        q = np.tanh(Hu + base)
        scores = q @ params.att_v
        shifted = scores - scores.max()
        alpha = np.exp(shifted)
        alpha /= alpha.sum()
        c = alpha @ H
        x = np.concatenate([ey, c])

        p = params.decoder
        r = _sigmoid(p.w_r @ x + p.u_r @ z + p.b_r)
        u = _sigmoid(p.w_u @ x + p.u_u @ z + p.b_u)
        g = np.tanh(p.w_c @ x + p.u_c @ (r * z) + p.b_c)
        z_new = (1.0 - u) * z + u * g

        logp = log_softmax(params.out_w @ z_new + params.out_b)
        loss -= logp[target_id]
        if keep:
            caches.append((prev_id, target_id, ey, q, alpha, x,
                           r, u, g, z, z_new, np.exp(logp)))
        z = z_new
        prev_id = target_id
    return float(loss), ctx, enc_gates, caches


def nll(params: ModelParams, config: ModelConfig, pair: SentencePair) -> float:
    """Negative log-likelihood of the pair in nats, teacher forced."""
    loss, _, _, _ = _teacher_forced_steps(params, config, pair, keep=False)
    return loss


def _gru_backward(p, grads, dh_new, x, h_prev, r, u, g):
    """Reverse one gru_step. Returns (dx, dh_prev); accumulates into grads."""
    du = dh_new * (g - h_prev)
    da_u = du * u * (1.0 - u)
    dg = dh_new * u
    da_c = dg * (1.0 - g * g)
    dh = dh_new * (1.0 - u)
    drh = p.u_c.T @ da_c
    dr = drh * h_prev
    dh += drh * r
    da_r = dr * r * (1.0 - r)
    dh += p.u_r.T @ da_r + p.u_u.T @ da_u
    dx = p.w_r.T @ da_r + p.w_u.T @ da_u + p.w_c.T @ da_c
    grads.w_r += da_r[:, None] * x
    grads.w_u += da_u[:, None] * x
    grads.w_c += da_c[:, None] * x
    grads.u_r += da_r[:, None] * h_prev
    grads.u_u += da_u[:, None] * h_prev
    grads.u_c += da_c[:, None] * (r * h_prev)
    grads.b_r += da_r
    grads.b_u += da_u
    grads.b_c += da_c
    return dx, dh


def grad_nll(params: ModelParams, config: ModelConfig,
             pair: SentencePair) -> tuple[float, ModelParams]:
    """Loss and its exact gradient by reverse accumulation.

    The returned gradient mirrors ModelParams tensor for tensor. Correctness
    is pinned by the finite-difference oracle in the tests, never by
    construction alone.
    """
    loss, ctx, caches = _teacher_forced_steps(params, config, pair, keep=True)
    grads = ModelParams.zeros(config)
    H = ctx.vectors
    dH = np.zeros_like(H)
    emb_dim = config.embedding_dim

    dz_next = np.zeros(config.hidden_dim)
    for (prev_id, target_id, ey, q, alpha, x,
         r, u, g, z_prev, z_new, probs) in reversed(caches):
        dlogits = probs.copy()
        dlogits[target_id] -= 1.0
        grads.out_w += dlogits[:, None] * z_new
        grads.out_b += dlogits
        dz_new = params.out_w.T @ dlogits + dz_next

        dx, dz_prev = _gru_backward(params.decoder, grads.decoder,
                                    dz_new, x, z_prev, r, u, g)
        dey = dx[:emb_dim]
        dc = dx[emb_dim:]

        # attention: c = alpha @ H, alpha = softmax(q @ v), q = tanh(pre)
        dalpha = H @ dc
        dH += alpha[:, None] * dc
        dscores = alpha * (dalpha - alpha @ dalpha)
        grads.att_v += q.T @ dscores
        dpre = (dscores[:, None] * params.att_v) * (1.0 - q * q)
        dpre_sum = dpre.sum(axis=0)
        grads.att_w += dpre_sum[:, None] * z_prev
        grads.att_e += dpre_sum[:, None] * ey
        grads.att_b += dpre_sum
        grads.att_u += dpre.T @ H
        dH += dpre @ params.att_u
        dz_prev += params.att_w.T @ dpre_sum
        dey += params.att_e.T @ dpre_sum

        grads.tgt_emb[prev_id] += dey
        dz_next = dz_prev

    # decoder init: z0 = tanh(init_w @ carry + init_b)
    z0 = caches[0][9]
    da = dz_next * (1.0 - z0 * z0)
    grads.init_w += da[:, None] * ctx.carry
    grads.init_b += da
    dH[-1] += params.init_w.T @ da

    # encoder, right to left
    enc = params.encoder
    h_states = [np.zeros(config.hidden_dim)]
    h_states.extend(H)  # h_0, h_1 .. h_S; rows of H are the states themselves
    dh_carry = np.zeros(config.hidden_dim)
    for t in range(len(pair.source) - 1, -1, -1):
        x_e = params.src_emb[pair.source[t]]
        h_prev = h_states[t]
        # recompute the cheap gate values instead of caching them
        r = _sigmoid(enc.w_r @ x_e + enc.u_r @ h_prev + enc.b_r)
        u = _sigmoid(enc.w_u @ x_e + enc.u_u @ h_prev + enc.b_u)
        g = np.tanh(enc.w_c @ x_e + enc.u_c @ (r * h_prev) + enc.b_c)
        dxe, dh_carry = _gru_backward(enc, grads.encoder,
                                      dH[t] + dh_carry, x_e, h_prev, r, u, g)
        grads.src_emb[pair.source[t]] += dxe
    return loss, grads


# ---------------------------------------------------------------------------
# Adadelta
# ---------------------------------------------------------------------------

@dataclass
class AdadeltaState:
    """Running second moments of gradients and updates, one per tensor."""

    sq_grad: ModelParams
    sq_delta: ModelParams
    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS

    @classmethod
    def zeros(cls, config: ModelConfig, rho: float = DEFAULT_RHO,
              eps: float = DEFAULT_EPS) -> "AdadeltaState":
        return cls(ModelParams.zeros(config), ModelParams.zeros(config),
                   rho=rho, eps=eps)


def adadelta_step(params: ModelParams, grads: ModelParams,
                  state: AdadeltaState) -> None:
    """One in-place Adadelta update.

    E[g2] <- rho E[g2] + (1-rho) g2
    delta  = -sqrt(E[d2] + eps) / sqrt(E[g2] + eps) * g
    E[d2] <- rho E[d2] + (1-rho) delta2
    """
    rho, eps = state.rho, state.eps
    for p, g, eg2, ed2 in zip(params.arrays(), grads.arrays(),
                              state.sq_grad.arrays(), state.sq_delta.arrays()):
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        delta = -np.sqrt(ed2 + eps) / np.sqrt(eg2 + eps) * g
        ed2 *= rho
        ed2 += (1.0 - rho) * delta * delta
        p += delta


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_nll: float       # mean per-sentence nll over the epoch
    valid_logprob: float   # mean per-token log-probability on validation
    best_so_far: bool


@dataclass
class TrainResult:
    params: ModelParams    # weights of the best validation epoch
    log: list[EpochLog]
    best_epoch: int


def mean_token_logprob(params: ModelParams, config: ModelConfig,
                       pairs: list[SentencePair]) -> float:
    """Summed log-probability divided by total target tokens."""
    total = 0.0
    tokens = 0
    for pair in pairs:
        total -= nll(params, config, pair)
        tokens += len(pair.target)
    return total / tokens


def train(train_pairs: list[SentencePair], valid_pairs: list[SentencePair],
          config: ModelConfig, seed: int, max_epochs: int = 30,
          patience: int = 3, batch_size: int = DEFAULT_BATCH_SIZE,
          rho: float = DEFAULT_RHO, eps: float = DEFAULT_EPS,
          max_grad_norm: float | None = None) -> TrainResult:
    """Adadelta training with early stopping on validation log-probability.

    Deterministic: the same seed and data give a bitwise-identical result.
    Stops once validation fails to improve for more than `patience`
    consecutive epochs (patience 0 stops at the first non-improving epoch)
    and returns the parameters of the best epoch, not the last.
    """
    if not train_pairs or not valid_pairs:
        raise ValueError("need non-empty train and validation sets")
    usable = [p for p in train_pairs
              if len(p.source) <= MAX_TRAIN_LEN and len(p.target) <= MAX_TRAIN_LEN]
    if not usable:
        raise ValueError(f"no training pair has both sides <= {MAX_TRAIN_LEN} tokens")

    rng = Rng(seed)
    params = ModelParams.init(config, rng)
    opt = AdadeltaState.zeros(config, rho=rho, eps=eps)

    best_logprob = -np.inf
    best_params = params.copy()
    best_epoch = 0
    bad_epochs = 0
    log: list[EpochLog] = []

    order = list(range(len(usable)))
    for epoch in range(1, max_epochs + 1):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = [usable[i] for i in order[start:start + batch_size]]
            grads = ModelParams.zeros(config)
            batch_loss = 0.0
            for pair in batch:
                loss, g = grad_nll(params, config, pair)
                batch_loss += loss
                for acc, new in zip(grads.arrays(), g.arrays()):
                    acc += new
            if not np.isfinite(batch_loss):
                raise DivergenceError(f"diverged at epoch {epoch}")
            epoch_loss += batch_loss
            scale = 1.0 / len(batch)
            for arr in grads.arrays():
                arr *= scale
            if max_grad_norm is not None:
                norm = float(np.sqrt(sum(float((a * a).sum())
                                         for a in grads.arrays())))
                if norm > max_grad_norm:
                    shrink = max_grad_norm / norm
                    for arr in grads.arrays():
                        arr *= shrink
            adadelta_step(params, grads, opt)

        valid_logprob = mean_token_logprob(params, config, valid_pairs)
        improved = valid_logprob > best_logprob
        if improved:
            best_logprob = valid_logprob
            best_params = params.copy()
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
        log.append(EpochLog(epoch, epoch_loss / len(order), valid_logprob,
                            improved))
        if bad_epochs > patience:
            break
    return TrainResult(params=best_params, log=log, best_epoch=best_epoch)


# ---------------------------------------------------------------------------
# Synthetic tasks
# ---------------------------------------------------------------------------

TASK_KINDS = ("copy", "reverse", "cipher", "verb-final")
MARKER_TOKENS = ("A", "B")  # verb-final sentence-final markers


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    vocab_size: int = 20    # including the three reserved ids
    min_len: int = 2        # body length range, eos excluded
    max_len: int = 12
    sample_count: int = 5000
    seed: int = 1

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.vocab_size < 4:
            raise ValueError("vocab_size must be >= 4 (three ids are reserved)")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


@dataclass
class TaskData:
    spec: TaskSpec
    train: list[SentencePair]
    valid: list[SentencePair]
    test: list[SentencePair]
    source_vocab: Vocabulary
    target_vocab: Vocabulary


def _cycle_permutation(ids: list[int], rng: Rng) -> dict[int, int]:
    """Random single-cycle bijection: no fixed points once len >= 2."""
    order = list(ids)
    rng.shuffle(order)
    return {order[i]: order[(i + 1) % len(order)] for i in range(len(order))}


def generate_task(spec: TaskSpec) -> TaskData:
    """Deterministic per seed; validation/test/train splits are disjoint.

    Splits share no source sentence: validation and test are drawn first as
    unique sets, then training samples (which may repeat internally) avoid
    both. Held-out sizes are sample_count/10 each, capped at 500.
    """
    regular = list(range(3, spec.vocab_size))
    symbols = [f"w{i}" for i in range(len(regular))]
    if spec.kind == "verb-final":
        source_vocab = Vocabulary.from_symbols(symbols + list(MARKER_TOKENS))
        marker_ids = [source_vocab.id(m) for m in MARKER_TOKENS]
    else:
        source_vocab = Vocabulary.from_symbols(symbols)
        marker_ids = []
    target_vocab = Vocabulary.from_symbols(symbols)

    rng = Rng(spec.seed)
    cipher = _cycle_permutation(regular, rng) \
        if spec.kind in ("cipher", "verb-final") else {}

    def draw_pair() -> SentencePair:
        length = rng.randint(spec.min_len, spec.max_len)
        body = [regular[rng.below(len(regular))] for _ in range(length)]
        if spec.kind == "copy":
            source, target = body, body
        elif spec.kind == "reverse":
            source, target = body, body[::-1]
        elif spec.kind == "cipher":
            source, target = body, [cipher[w] for w in body]
        else:  # verb-final: the first target token depends on the last marker
            marker = marker_ids[rng.below(2)]
            source = body + [marker]
            target = body if marker == marker_ids[0] else [cipher[w] for w in body]
        return SentencePair(tuple(source) + (EOS_ID,), tuple(target) + (EOS_ID,))

    held_out = min(500, max(1, spec.sample_count // 10))
    reserved: set[tuple[int, ...]] = set()

    def draw_unique(count: int) -> list[SentencePair]:
        out = []
        attempts = 0
        while len(out) < count:
            pair = draw_pair()
            attempts += 1
            if attempts > 200 * count + 10000:
                raise ValueError("task space too small for disjoint splits")
            if pair.source in reserved:
                continue
            reserved.add(pair.source)
            out.append(pair)
        return out

    valid = draw_unique(held_out)
    test = draw_unique(held_out)
    train_set = []
    attempts = 0
    while len(train_set) < spec.sample_count:
        pair = draw_pair()
        attempts += 1
        if attempts > 200 * spec.sample_count + 10000:
            raise ValueError("task space too small for disjoint splits")
        if pair.source in reserved:
            continue
        train_set.append(pair)
    return TaskData(spec=spec, train=train_set, valid=valid, test=test,
                    source_vocab=source_vocab, target_vocab=target_vocab)
