"""Deterministic toy denoising backend.

Images are 32x32 RGB floats in [0, 1]; latents are 4 channels over an 8x8
grid (64 cells). One denoise step is a linear contraction toward a
prompt-dependent fixed point:

    f' = a*f + (1-a) * (0.5 * selfmix + 0.5 * crossmix),   a = 0.9

where `selfmix` attends over the 64 cells with *fixed positional* queries
and keys (content-independent, so the plain step is affine in f and exactly
invertible) and `crossmix` attends from the same positional queries into
hash-derived text-token embeddings (constant per prompt). Sampling hooks
replace the self-attention stream (removal: cached source values with
excluded cells) or bias both attentions (insertion modulation), which is
exactly where a real denoiser would be hooked.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .attention import (
    CorrespondenceMatrix,
    insertion_bias,
    removal_attention,
    scaled_scores,
    softmax,
)

IMAGE_SIZE = 32
LATENT_SIZE = 8
CHANNELS = 4
CELLS = LATENT_SIZE * LATENT_SIZE
POS_DIM = 8
CONTRACTION = 0.9
_BLOCK = IMAGE_SIZE // LATENT_SIZE


class BackendFailure(RuntimeError):
    pass


@lru_cache(maxsize=1)
def _positional() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fixed positional Q/K, the plain mixing matrix, and its inverse."""
    rng = np.random.Generator(np.random.PCG64(116132))
    q = rng.standard_normal((CELLS, POS_DIM))
    k = rng.standard_normal((CELLS, POS_DIM))
    a_self = softmax(scaled_scores(q, k))
    mix = CONTRACTION * np.eye(CELLS) + 0.5 * (1.0 - CONTRACTION) * a_self
    # Strictly diagonally dominant (diag > 0.9, off-diagonal row mass < 0.05),
    # hence invertible; the inverse makes inversion steps exact.
    return q, k, mix, np.linalg.inv(mix)


def positional_qk() -> tuple[np.ndarray, np.ndarray]:
    q, k, _, _ = _positional()
    return q, k


def normalize_token(token: str) -> str:
    return token.strip(".,;:!?\"'").lower()


@dataclass(frozen=True)
class PromptEmbedding:
    tokens: tuple[str, ...]
    keys: np.ndarray  # (n_tokens, POS_DIM)
    values: np.ndarray  # (n_tokens, CHANNELS)


@lru_cache(maxsize=512)
def embed_prompt(text: str) -> PromptEmbedding:
    """Hash-derived token embeddings; the empty prompt embeds to zeros."""
    tokens = tuple(normalize_token(t) for t in text.split() if normalize_token(t))
    if not tokens:
        return PromptEmbedding(
            ("",), np.zeros((1, POS_DIM)), np.zeros((1, CHANNELS))
        )
    keys = np.empty((len(tokens), POS_DIM))
    values = np.empty((len(tokens), CHANNELS))
    for i, tok in enumerate(tokens):
        seed = int.from_bytes(hashlib.sha256(tok.encode("utf-8")).digest()[:8], "big")
        rng = np.random.Generator(np.random.PCG64(seed))
        keys[i] = rng.standard_normal(POS_DIM)
        values[i] = 0.3 * rng.standard_normal(CHANNELS)
    keys.flags.writeable = False
    values.flags.writeable = False
    return PromptEmbedding(tokens, keys, values)


def flatten_latent(z: np.ndarray) -> np.ndarray:
    """(CHANNELS, 8, 8) -> (64, CHANNELS) feature rows."""
    return z.reshape(CHANNELS, CELLS).T


def unflatten_latent(f: np.ndarray) -> np.ndarray:
    return f.T.reshape(CHANNELS, LATENT_SIZE, LATENT_SIZE)


def encode_image(image: np.ndarray) -> np.ndarray:
    """4x4 block means of R, G, B plus a luminance channel."""
    if image.shape != (IMAGE_SIZE, IMAGE_SIZE, 3):
        raise BackendFailure(f"expected ({IMAGE_SIZE}, {IMAGE_SIZE}, 3) image, got {image.shape}")
    blocks = image.reshape(LATENT_SIZE, _BLOCK, LATENT_SIZE, _BLOCK, 3).mean(axis=(1, 3))
    rgb = np.moveaxis(blocks, -1, 0)  # (3, 8, 8)
    luminance = rgb.mean(axis=0, keepdims=True)
    return np.concatenate([rgb, luminance], axis=0)


def decode_latent(z: np.ndarray) -> np.ndarray:
    """Nearest-neighbor upsample of the RGB channels, clipped to [0, 1]."""
    if z.shape != (CHANNELS, LATENT_SIZE, LATENT_SIZE):
        raise BackendFailure(f"expected ({CHANNELS}, {LATENT_SIZE}, {LATENT_SIZE}) latent")
    rgb = z[:3]
    up = rgb.repeat(_BLOCK, axis=1).repeat(_BLOCK, axis=2)
    return np.clip(np.moveaxis(up, 0, -1), 0.0, 1.0)


# --- step hooks ---------------------------------------------------------------


@dataclass(frozen=True)
class RemovalHook:
    """Substitute self-attention with cached source values, minus removed cells."""

    v_source: np.ndarray  # (CELLS, CHANNELS) cached source features this step
    removed_cells: np.ndarray  # (CELLS,) bool

    @property
    def kind(self) -> str:
        return "removal"


@dataclass(frozen=True)
class InsertionHook:
    """Bias self- and cross-attention toward the planned segment layout."""

    self_corr: CorrespondenceMatrix
    cross_corr: CorrespondenceMatrix
    lam: float

    @property
    def kind(self) -> str:
        return "insertion"


class ToyDenoiser:
    """Reference backend; every call lands in `calls` for trace assertions."""

    hooked_layers = ("l0",)

    def __init__(self, steps: int = 20):
        if steps < 1:
            raise ValueError("need at least one step")
        self.steps = steps
        self.calls: list[dict] = []

    # -- codec ------------------------------------------------------------

    def encode(self, image: np.ndarray) -> np.ndarray:
        return encode_image(image)

    def decode(self, latent: np.ndarray) -> np.ndarray:
        return decode_latent(latent)

    # -- features ----------------------------------------------------------

    def source_kv(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """The (K, V) this backend would use at a step over latent z."""
        _, k = positional_qk()
        return k, flatten_latent(z)

    def _crossmix(self, prompt: str, hook) -> np.ndarray:
        q, _ = positional_qk()
        emb = embed_prompt(prompt)
        scores = scaled_scores(q, emb.keys)
        if isinstance(hook, InsertionHook):
            scores = scores + insertion_bias(scores, hook.cross_corr, hook.lam)
        return softmax(scores) @ emb.values

    def _selfmix(self, f: np.ndarray, hook) -> np.ndarray:
        q, k = positional_qk()
        if isinstance(hook, RemovalHook):
            return removal_attention(q, k, hook.v_source, hook.removed_cells)
        scores = scaled_scores(q, k)
        if isinstance(hook, InsertionHook):
            scores = scores + insertion_bias(scores, hook.self_corr, hook.lam)
        return softmax(scores) @ f

    # -- stepping ----------------------------------------------------------

    def denoise_step(self, z: np.ndarray, step: int, prompt: str, hook=None) -> np.ndarray:
        """One sampling step z_step -> z_{step-1}."""
        self.calls.append(
            {
                "op": "denoise",
                "step": step,
                "prompt": prompt,
                "hook": hook.kind if hook is not None else None,
            }
        )
        f = flatten_latent(z)
        mixed = 0.5 * self._selfmix(f, hook) + 0.5 * self._crossmix(prompt, hook)
        return unflatten_latent(CONTRACTION * f + (1.0 - CONTRACTION) * mixed)

    def invert_step(self, z_prev: np.ndarray, step: int, prompt: str) -> np.ndarray:
        """Exact inverse of the plain (hook-free) denoise step."""
        self.calls.append({"op": "invert", "step": step, "prompt": prompt})
        _, _, _, mix_inv = _positional()
        c = 0.5 * (1.0 - CONTRACTION) * self._crossmix(prompt, None)
        f_prev = flatten_latent(z_prev)
        return unflatten_latent(mix_inv @ (f_prev - c))
