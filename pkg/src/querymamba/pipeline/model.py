"""The full encoder-decoder forecaster."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..decoder import ClassificationHeads, FuturePredictions, QueryDecoder
from ..encoder import EncodedMemory, MambaEncoder
from ..numerics.nn import Linear, Module
from ..numerics.rng import make_rng
from ..numerics.tensor import Tensor, as_tensor, default_dtype
from .config import TrainConfig


@dataclass
class ModelOutput:
    predictions: FuturePredictions
    encoded: EncodedMemory
    aux_verb_logits: Tensor | None = None
    aux_noun_logits: Tensor | None = None


class QueryMamba(Module):
    """Mamba encoder, query decoder and classification heads.

    Every component draws its initial weights from its own seeded stream, so
    adding the action or auxiliary heads leaves the other weights unchanged.
    """

    def __init__(self, config: TrainConfig, num_actions: int = 0):
        c = config
        self.config = config
        self.num_actions = num_actions
        self.encoder = MambaEncoder(
            c.d_input, c.d_model, c.layers_enc, make_rng(c.seed, "init", "encoder"),
            d_state=c.d_state, expand=c.expand, conv_width=c.conv_width, scan_method=c.scan_method,
        )
        self.decoder = QueryDecoder(
            c.d_model, c.num_future, c.layers_dec, make_rng(c.seed, "init", "decoder"),
            n_heads=c.n_heads, ffn_mult=c.ffn_mult, self_attention=c.query_self_attention,
            learnable_content=c.learnable_content_queries, memory_pos_encoding=c.memory_pos_encoding,
        )
        self.heads = ClassificationHeads(
            c.d_model, c.num_verbs, c.num_nouns, make_rng(c.seed, "init", "heads"),
            num_actions=num_actions, action_rng=make_rng(c.seed, "init", "action_head"),
        )
        self.aux_verb = self.aux_noun = None
        if c.loss_aux_short_term:
            aux_rng = make_rng(c.seed, "init", "aux_heads")
            self.aux_verb = Linear(c.d_model, c.num_verbs, aux_rng)
            self.aux_noun = Linear(c.d_model, c.num_nouns, aux_rng)

    def __call__(self, M, mask: np.ndarray | None = None) -> ModelOutput:
        """``M``: (batch, L+S, D'); ``mask``: (batch, L+S), True where observed."""
        with default_dtype(self.dtype):
            return self._forward(M, mask)

    def _forward(self, M, mask):
        M = as_tensor(np.asarray(M.data if isinstance(M, Tensor) else M, dtype=self.dtype))
        encoded = self.encoder(M, self.config.long_len)
        short_mask = None if mask is None else np.asarray(mask)[:, self.config.long_len :]
        if short_mask is not None and short_mask.all():
            short_mask = None
        F_emb = self.decoder(encoded.E_S, short_mask)
        out = ModelOutput(self.heads(F_emb), encoded)
        if self.aux_verb is not None:
            out.aux_verb_logits = self.aux_verb(encoded.E_S)
            out.aux_noun_logits = self.aux_noun(encoded.E_S)
        return out

    @property
    def dtype(self) -> np.dtype:
        return self.encoder.input_proj.weight.dtype
