"""The gated extraction layer.

Sits after the final decoder block. A cross-attention read of the encoder
states produces a context; a sigmoid gate decides, per target position, how
much probability mass to take from a generation softmax versus from copying
source tokens directly through the attention weights.

All functions accept either ``Tensor`` nodes (differentiable path used in
training) or plain numpy arrays (coerced to constants).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .autodiff import (
    Tensor,
    _as_tensor,
    add,
    concat_last,
    layer_norm,
    matmul,
    mul,
    relu,
    sigmoid,
    softmax,
    sub,
)


@dataclass
class GateParams:
    """Learnable parameters of the extraction layer.

    Shapes for model width d and vocabulary size v:
    w_q, w_kv, ff_w are (d, d); ff_b and the four layer-norm vectors are
    (d,); gate_w is (2d, 1) with gate_b (1,); out_w is (d, v) with out_b (v,).
    """

    w_q: Tensor
    w_kv: Tensor
    ff_w: Tensor
    ff_b: Tensor
    ln_dec_gain: Tensor
    ln_dec_bias: Tensor
    ln_ctx_gain: Tensor
    ln_ctx_bias: Tensor
    gate_w: Tensor
    gate_b: Tensor
    out_w: Tensor
    out_b: Tensor

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, Tensor):
                setattr(self, f.name, _as_tensor(np.asarray(value, dtype=np.float64)))
        d = self.w_q.shape[0]
        if self.w_q.shape != (d, d) or self.w_kv.shape != (d, d) or self.ff_w.shape != (d, d):
            raise ValueError("projection matrices must be square and agree on width")
        if self.gate_w.shape != (2 * d, 1) or self.gate_b.shape != (1,):
            raise ValueError("gate projection must map 2*d features to a scalar")
        if self.out_w.shape[0] != d or self.out_b.shape != (self.out_w.shape[1],):
            raise ValueError("output head shapes disagree")

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.out_w.shape[1]


def _check_states(h: Tensor, d: int, name: str):
    if h.data.ndim != 2 or h.shape[1] != d:
        raise ValueError(f"{name} must have shape (positions, {d}), got {h.shape}")


def cross_attention(h_enc, h_dec, params: GateParams) -> tuple[Tensor, Tensor, Tensor]:
    """Attend decoder states over encoder states.

    Queries come from the decoder, keys and values share one projection of
    the encoder. Scores are raw dot products (no scaling). The attention
    readout passes through a single ReLU feed-forward to form the context.
    Returns (score, attn, context) with shapes (T, S), (T, S), (T, d).
    """
    h_enc = _as_tensor(h_enc)
    h_dec = _as_tensor(h_dec)
    d = params.d_model
    _check_states(h_enc, d, "h_enc")
    _check_states(h_dec, d, "h_dec")
    q = matmul(h_dec, params.w_q)
    kv = matmul(h_enc, params.w_kv)
    score = matmul(q, _transpose(kv))
    attn = softmax(score)
    read = matmul(attn, kv)
    context = relu(add(matmul(read, params.ff_w), params.ff_b))
    return score, attn, context


def _transpose(a: Tensor) -> Tensor:
    out = Tensor(a.data.T, _parents=(a,))

    def backward(o: Tensor):
        if a.requires_grad:
            a._accumulate(o.grad.T)

    out._backward_fn = backward
    return out


def extraction_gate(h_dec, context, params: GateParams) -> Tensor:
    """Per-position copy probability in (0, 1), shape (T, 1).

    Decoder state and context are layer-normalized independently, then a
    linear map of their concatenation feeds a sigmoid.
    """
    h_dec = _as_tensor(h_dec)
    context = _as_tensor(context)
    d = params.d_model
    _check_states(h_dec, d, "h_dec")
    _check_states(context, d, "context")
    if h_dec.shape[0] != context.shape[0]:
        raise ValueError("h_dec and context must align by position")
    n_dec = layer_norm(h_dec, params.ln_dec_gain, params.ln_dec_bias)
    n_ctx = layer_norm(context, params.ln_ctx_gain, params.ln_ctx_bias)
    joined = concat_last(n_dec, n_ctx)
    return sigmoid(add(matmul(joined, params.gate_w), params.gate_b))


def generation_head(h_dec, params: GateParams) -> Tensor:
    """Vocabulary softmax over decoder states, shape (T, v)."""
    h_dec = _as_tensor(h_dec)
    _check_states(h_dec, params.d_model, "h_dec")
    return softmax(add(matmul(h_dec, params.out_w), params.out_b))


def copy_distribution(attn, src_ids, vocab_size: int) -> Tensor:
    """Scatter attention mass onto the vocabulary, shape (T, v).

    Position t assigns each source token's attention weight to that token's
    vocabulary id; repeated ids accumulate. Rows sum to 1 whenever the
    attention rows do.
    """
    attn = _as_tensor(attn)
    ids = np.asarray(src_ids, dtype=np.int64)
    if ids.ndim != 1:
        raise ValueError("src_ids must be a flat id sequence")
    if attn.data.ndim != 2 or attn.shape[1] != ids.shape[0]:
        raise ValueError(f"attn must have shape (positions, {ids.shape[0]}), got {attn.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ValueError("src_ids out of vocabulary range")
    onehot = np.zeros((ids.shape[0], vocab_size))
    onehot[np.arange(ids.shape[0]), ids] = 1.0
    return matmul(attn, Tensor(onehot))


def merge(o_gen, o_ext, p_ext) -> Tensor:
    """Blend generation and copy distributions with the gate.

    Computes (1 - p) * o_gen + p * o_ext row-wise; a convex combination, so
    rows stay valid distributions.
    """
    o_gen = _as_tensor(o_gen)
    o_ext = _as_tensor(o_ext)
    p_ext = _as_tensor(p_ext)
    if o_gen.shape != o_ext.shape:
        raise ValueError("o_gen and o_ext must share a shape")
    if p_ext.shape != (o_gen.shape[0], 1):
        raise ValueError(f"p_ext must have shape ({o_gen.shape[0]}, 1), got {p_ext.shape}")
    keep = sub(Tensor(1.0), p_ext)
    return add(mul(keep, o_gen), mul(p_ext, o_ext))


@dataclass(frozen=True)
class GateActivations:
    """Numpy snapshot of one pass through the extraction layer."""

    score: np.ndarray
    attn: np.ndarray
    context: np.ndarray
    p_ext: np.ndarray
    o_gen: np.ndarray
    o_ext: np.ndarray
    o_final: np.ndarray


def run_gate(h_enc, h_dec, src_ids, params: GateParams, p_ext_scale: float = 1.0) -> tuple[dict, GateActivations]:
    """Full extraction-layer pass.

    Returns the live tensors (for backprop) and a detached activation
    snapshot. ``p_ext_scale=0.0`` disables copying so the output reduces to
    the generation softmax; used by ablations.
    """
    score, attn, context = cross_attention(h_enc, h_dec, params)
    p_ext = extraction_gate(h_dec, context, params)
    if p_ext_scale != 1.0:
        p_ext = mul(p_ext, Tensor(float(p_ext_scale)))
    o_gen = generation_head(h_dec, params)
    o_ext = copy_distribution(attn, src_ids, params.vocab_size)
    o_final = merge(o_gen, o_ext, p_ext)
    tensors = {
        "score": score,
        "attn": attn,
        "context": context,
        "p_ext": p_ext,
        "o_gen": o_gen,
        "o_ext": o_ext,
        "o_final": o_final,
    }
    snapshot = GateActivations(**{k: v.data.copy() for k, v in tensors.items()})
    return tensors, snapshot
