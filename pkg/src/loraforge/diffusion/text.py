"""Template-token text encoder.

The vocabulary is a fixed package constant covering every word the prompt
templates can emit; anything else maps to UNK. Prompts are lowercased,
punctuation-stripped, whitespace-split, then padded/truncated to
CONTEXT_LEN ids. The encoder is an embedding table plus one self-attention
layer and a small gated feed-forward, all trained jointly with the
denoiser and frozen afterwards.
"""

from __future__ import annotations

import re

import numpy as np

from .. import tensor as T
from ..nn import CrossAttention, Embedding, Linear, Module
from ..tensor import Tensor

PAD, UNK = 0, 1
CONTEXT_LEN = 16

VOCAB = [
    "<pad>", "<unk>",
    # glue
    "a", "an", "image", "of", "ship", "the", "with",
    # domain words
    "regular", "aerial", "sar", "view",
    # classes
    "cargo", "other", "fishing", "tanker", "dredger",
    # structural attributes (safe for every domain)
    "heading", "north", "south", "east", "west",
    "small", "medium", "large", "vessel",
    "open", "sea", "near", "harbor", "moving", "moored",
    "long", "wide", "narrow", "hull", "deck", "bow", "stern",
    "boom", "crane", "containers", "nets", "wake",
    # appearance words (filtered out of SAR prompts)
    "blue", "green", "grey", "red", "dark", "bright",
    "water", "sky", "sunny", "overcast", "foggy", "clear",
    "waves", "calm", "daylight", "shadows",
]

_TOKEN_IDS = {w: i for i, w in enumerate(VOCAB)}
_CLEAN = re.compile(r"[^a-z0-9 ]+")


def tokenize(prompt: str) -> np.ndarray:
    """Fixed-length id sequence; unknown words become UNK, tail is PAD."""
    words = _CLEAN.sub(" ", prompt.lower()).split()
    ids = [_TOKEN_IDS.get(w, UNK) for w in words][:CONTEXT_LEN]
    ids += [PAD] * (CONTEXT_LEN - len(ids))
    return np.asarray(ids, dtype=np.int64)


def known_token_count(prompt: str) -> int:
    ids = tokenize(prompt)
    return int(((ids != PAD) & (ids != UNK)).sum())


class TextEncoder(Module):
    def __init__(self, dim: int, rng: np.random.Generator, vocab_size: int | None = None):
        super().__init__()
        self.dim = dim
        self.vocab_size = vocab_size or len(VOCAB)
        self.tok = Embedding(self.vocab_size, dim, rng)
        self.pos = Embedding(CONTEXT_LEN, dim, rng)
        self.attn = CrossAttention(dim, dim, "text.attn", rng)
        self.ff1 = Linear(dim, 2 * dim, rng)
        self.ff2 = Linear(2 * dim, dim, rng)

    def forward(self, ids: np.ndarray) -> Tensor:
        """ids [B, L] -> context [B, L, dim]."""
        ids = np.atleast_2d(ids)
        h = self.tok(ids) + self.pos(np.arange(CONTEXT_LEN))
        h = h + self.attn(h, h)
        h = h + self.ff2(self.ff1(h).silu())
        return h

    __call__ = forward

    def encode(self, prompts) -> Tensor:
        if isinstance(prompts, str):
            prompts = [prompts]
        ids = np.stack([tokenize(p) for p in prompts])
        return self.forward(ids)


def encode_text(encoder: TextEncoder, prompt: str) -> Tensor:
    """Context for a single prompt, [CONTEXT_LEN, dim]."""
    with T.no_grad():
        return encoder.encode([prompt]).reshape(CONTEXT_LEN, encoder.dim)
