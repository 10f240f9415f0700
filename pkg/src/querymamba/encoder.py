"""Mamba encoder over long- and short-term memory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics.nn import LayerNorm, Linear, Module
from .numerics.tensor import DimensionError, Tensor, as_tensor
from .ssm_core import MambaBlock


class ConfigurationError(ValueError):
    pass


@dataclass
class MemorySequence:
    """Observation of ``long_len + short_len`` embedding windows, oldest first.

    ``mask`` marks observed windows; missing ones are zero rows padded on the
    left.
    """

    M: np.ndarray
    long_len: int
    short_len: int
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.long_len < 0 or self.short_len < 1:
            raise ConfigurationError(f"need long_len >= 0 and short_len >= 1, got {self.long_len}, {self.short_len}")
        if self.M.shape[0] != self.long_len + self.short_len:
            raise DimensionError(f"memory has {self.M.shape[0]} rows, expected {self.long_len + self.short_len}")
        if self.mask is None:
            self.mask = np.ones(self.M.shape[0], dtype=bool)

    @property
    def M_long(self) -> np.ndarray:
        return self.M[: self.long_len]

    @property
    def M_short(self) -> np.ndarray:
        return self.M[self.long_len :]

    @property
    def short_mask(self) -> np.ndarray:
        return self.mask[self.long_len :]


@dataclass
class EncodedMemory:
    E_L: Tensor
    E_S: Tensor


def project_input(M, proj: Linear) -> Tensor:
    """Linear map from the feature width to the model width (no activation)."""
    M = as_tensor(M)
    if M.shape[-1] != proj.weight.shape[0]:
        raise DimensionError(f"input width {M.shape[-1]} != projection input {proj.weight.shape[0]}")
    return proj(M)


class MambaEncoder(Module):
    def __init__(
        self,
        d_input: int,
        d_model: int,
        n_layers: int,
        rng: np.random.Generator,
        d_state: int = 16,
        expand: int = 2,
        conv_width: int = 4,
        scan_method: str = "sequential",
    ):
        self.input_proj = Linear(d_input, d_model, rng)
        self.blocks = [
            MambaBlock(d_model, rng, d_state=d_state, expand=expand, conv_width=conv_width, scan_method=scan_method)
            for _ in range(n_layers)
        ]
        self.norm = LayerNorm(d_model)

    def __call__(self, M, long_len: int) -> EncodedMemory:
        """Encode ``M`` of shape (batch, L+S, D') as one causal sequence, then split.

        Running long and short memory jointly lets long-term context reach the
        short-term positions through the recurrence.
        """
        M = as_tensor(M)
        if M.ndim == 2:
            M = M.reshape((1,) + M.shape)
        if M.shape[1] - long_len < 1:
            raise ConfigurationError("short-term memory must hold at least one window")
        x = project_input(M, self.input_proj)
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return EncodedMemory(E_L=x[:, :long_len], E_S=x[:, long_len:])


def stack_memories(memories: list[MemorySequence]) -> tuple[np.ndarray, np.ndarray]:
    """Batch ``M`` arrays and masks; all memories must share their lengths."""
    shapes = {(m.long_len, m.short_len) for m in memories}
    if len(shapes) != 1:
        raise ConfigurationError(f"mixed memory lengths in batch: {sorted(shapes)}")
    return np.stack([m.M for m in memories]), np.stack([m.mask for m in memories])
