"""Query-based transformer decoder and verb/noun classification heads."""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .numerics import functional as F
from .numerics.nn import LayerNorm, Linear, Module, parameter
from .numerics.tensor import DimensionError, Tensor, as_tensor, get_default_dtype

MASK_VALUE = -1e9


def _softmax_np(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    freq = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    out = np.zeros((length, dim))
    out[:, 0::2] = np.sin(pos * freq)
    out[:, 1::2] = np.cos(pos * freq[: dim // 2])
    return out


class MultiHeadAttention(Module):
    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator):
        if d_model % n_heads:
            raise DimensionError(f"d_model {d_model} not divisible by {n_heads} heads")
        self.n_heads = n_heads
        self.q = Linear(d_model, d_model, rng)
        self.k = Linear(d_model, d_model, rng)
        self.v = Linear(d_model, d_model, rng)
        self.o = Linear(d_model, d_model, rng)

    def _split(self, x: Tensor) -> Tensor:
        B, T, D = x.shape
        return x.reshape(B, T, self.n_heads, D // self.n_heads).transpose(0, 2, 1, 3)

    def __call__(self, query, key, value, key_mask: np.ndarray | None = None) -> Tensor:
        """``key_mask`` (batch, Tk) is True for keys that may be attended."""
        B, Tq, D = query.shape
        q, k, v = self._split(self.q(query)), self._split(self.k(key)), self._split(self.v(value))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(D // self.n_heads))
        if key_mask is not None:
            bias = np.where(np.asarray(key_mask, dtype=bool), 0.0, MASK_VALUE).astype(scores.dtype)[:, None, None, :]
            scores = scores + bias
        attn = F.softmax(scores, axis=-1)
        out = (attn @ v).transpose(0, 2, 1, 3).reshape(B, Tq, D)
        return self.o(out)


class DecoderLayer(Module):
    """Pre-norm layer: query self-attention, cross-attention to memory, feed-forward."""

    def __init__(self, d_model: int, n_heads: int, ffn_dim: int, rng: np.random.Generator, self_attention: bool = True):
        self.use_self_attention = self_attention
        if self_attention:
            self.norm_self = LayerNorm(d_model)
            self.self_attn = MultiHeadAttention(d_model, n_heads, rng)
        self.norm_cross = LayerNorm(d_model)
        self.cross_attn = MultiHeadAttention(d_model, n_heads, rng)
        self.norm_ffn = LayerNorm(d_model)
        self.ffn_in = Linear(d_model, ffn_dim, rng)
        self.ffn_out = Linear(ffn_dim, d_model, rng)

    def __call__(self, x: Tensor, query_pos: Tensor, memory: Tensor, memory_mask=None, memory_pos=None) -> Tensor:
        if self.use_self_attention:
            h = self.norm_self(x)
            qk = h + query_pos
            x = x + self.self_attn(qk, qk, h)
        h = self.norm_cross(x)
        keys = memory if memory_pos is None else memory + memory_pos
        x = x + self.cross_attn(h + query_pos, keys, memory, memory_mask)
        h = self.norm_ffn(x)
        return x + self.ffn_out(F.gelu(self.ffn_in(h)))


class QuerySet(Module):
    """``Z`` decoder slots: content embeddings (zeros unless learnable) and positions.

    Slot ``z`` stands for the ``z``-th future action.
    """

    def __init__(self, num_slots: int, d_model: int, rng: np.random.Generator, learnable_content: bool = False):
        if num_slots < 1:
            raise ValueError("need at least one query slot")
        content = np.zeros((num_slots, d_model), dtype=get_default_dtype())
        self.content = parameter(content) if learnable_content else Tensor(content)
        self.pos = parameter(rng.normal(0.0, 1.0, size=(num_slots, d_model)))

    @property
    def num_slots(self) -> int:
        return self.pos.shape[0]


class QueryDecoder(Module):
    def __init__(
        self,
        d_model: int,
        num_slots: int,
        n_layers: int,
        rng: np.random.Generator,
        n_heads: int = 8,
        ffn_mult: int = 4,
        self_attention: bool = True,
        learnable_content: bool = False,
        memory_pos_encoding: bool = False,
    ):
        self.queries = QuerySet(num_slots, d_model, rng, learnable_content)
        self.layers = [
            DecoderLayer(d_model, n_heads, ffn_mult * d_model, rng, self_attention) for _ in range(n_layers)
        ]
        self.norm = LayerNorm(d_model)
        self.memory_pos_encoding = memory_pos_encoding

    def __call__(self, E_S, memory_mask: np.ndarray | None = None) -> Tensor:
        """Future embeddings ``F`` (batch, Z, D) from short-term memory (batch, S, D)."""
        E_S = as_tensor(E_S)
        if E_S.ndim != 3 or E_S.shape[1] == 0:
            raise DimensionError(f"decoder needs non-empty (batch, S, D) memory, got {E_S.shape}")
        B, S, D = E_S.shape
        Z = self.queries.num_slots
        x = self.queries.content + np.zeros((B, Z, D), dtype=E_S.dtype)
        memory_pos = sinusoidal_positions(S, D).astype(E_S.dtype) if self.memory_pos_encoding else None
        for layer in self.layers:
            x = layer(x, self.queries.pos, E_S, memory_mask, memory_pos)
        return self.norm(x)


@dataclass
class FuturePredictions:
    """Per-slot logits; probabilities are computed on demand."""

    F: Tensor
    verb_logits: Tensor
    noun_logits: Tensor
    action_logits: Tensor | None = None

    @property
    def verb_probs(self) -> np.ndarray:
        return _softmax_np(self.verb_logits.data)

    @property
    def noun_probs(self) -> np.ndarray:
        return _softmax_np(self.noun_logits.data)

    @property
    def action_probs(self) -> np.ndarray | None:
        return None if self.action_logits is None else _softmax_np(self.action_logits.data)


class ClassificationHeads(Module):
    """Independent linear verb and noun heads, plus an optional direct action head."""

    def __init__(
        self,
        d_model: int,
        num_verbs: int,
        num_nouns: int,
        rng: np.random.Generator,
        num_actions: int = 0,
        action_rng: np.random.Generator | None = None,
    ):
        self.verb = Linear(d_model, num_verbs, rng)
        self.noun = Linear(d_model, num_nouns, rng)
        self.action = Linear(d_model, num_actions, action_rng or rng) if num_actions else None

    def __call__(self, F_emb: Tensor) -> FuturePredictions:
        action = self.action(F_emb) if self.action is not None else None
        return FuturePredictions(F=F_emb, verb_logits=self.verb(F_emb), noun_logits=self.noun(F_emb), action_logits=action)


def classify_heads(F_emb, heads: ClassificationHeads) -> tuple[np.ndarray, np.ndarray]:
    """Verb and noun probability rows for every slot."""
    preds = heads(as_tensor(F_emb))
    return preds.verb_probs, preds.noun_probs
