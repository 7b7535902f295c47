"""
Toy CLIP-style dual encoder.

Both towers are pre-LN transformers.  The text tower is causally masked and
pools at the [EOS] position; the image tower splits the image into patches,
prepends a learned [CLS] token and pools there.  Both project into a shared
space and L2-normalise.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..core.errors import ShapeError
from ..models.config_models import EncoderConfig
from ..tensor import ops
from ..tensor.parameter import Parameter, ParameterStore
from ..tensor.rng import SeededRng
from ..tensor.tensor import Tensor, no_grad, resolve_dtype
from .vocab import TokenSeq, Vocabulary, stack_tokens

logger = logging.getLogger(__name__)

LOGIT_SCALE_INIT = math.log(1 / 0.07)
LOGIT_SCALE_MAX = math.log(100.0)
MLP_RATIO = 4
# fixed per-pixel normalisation applied before patchify
PIXEL_MEAN = 0.5
PIXEL_STD = 0.15


class EmbeddingPair(BaseModel):
    """
    Model for the outputs of one encoder pass
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    image_emb: Optional[np.ndarray] = Field(default=None, description="Unit vector [d_embed]")
    text_emb: Optional[np.ndarray] = Field(default=None, description="Unit vector [d_embed]")
    penultimate: Optional[np.ndarray] = Field(
        default=None, description="Pre-projection [CLS] activation [d_model]"
    )


def patchify(images: np.ndarray, patch_size: int) -> np.ndarray:
    """[b, 3, H, W] planar images -> [b, n_patches, patch*patch*3], patches row-major"""
    b, c, h, w = images.shape
    p = patch_size
    grid = images.reshape(b, c, h // p, p, w // p, p)
    grid = grid.transpose(0, 2, 4, 3, 5, 1)
    return grid.reshape(b, (h // p) * (w // p), p * p * c)


def causal_mask(length: int, dtype) -> np.ndarray:
    mask = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(mask, ops.NEG_INF_MASK, 0.0).astype(dtype)


class DualEncoder:
    """
    Paired text and image encoders with a learned logit scale.

    Parameters live in ``self.params`` under hierarchical names
    (``text.*``, ``image.*``, ``logit_scale``).
    """

    def __init__(
        self,
        config: EncoderConfig,
        vocab_size: int,
        seed: int = 0,
        dtype="f32",
        init: bool = True,
    ):
        self.config = config
        self.vocab_size = vocab_size
        self.seed = seed
        self.dtype = resolve_dtype(dtype)
        self.params = ParameterStore()
        if init:
            self._init_parameters(SeededRng(seed))

    # construction

    def _normal(self, rng: SeededRng, name: str, shape, std: float) -> None:
        self.params.new(name, rng.split(name).normal(shape, std=std, dtype=self.dtype))

    def _constant(self, name: str, shape, value: float) -> None:
        self.params.new(name, np.full(shape, value, dtype=self.dtype))

    def _init_tower(self, rng: SeededRng, prefix: str) -> None:
        cfg = self.config
        d = cfg.d_model
        hidden = MLP_RATIO * d
        for layer in range(cfg.n_layers):
            block = f"{prefix}.blocks.{layer}"
            self._constant(f"{block}.ln1.gamma", (d,), 1.0)
            self._constant(f"{block}.ln1.beta", (d,), 0.0)
            self._normal(rng, f"{block}.attn.w_qkv", (d, 3 * d), d**-0.5)
            self._constant(f"{block}.attn.b_qkv", (3 * d,), 0.0)
            self._normal(rng, f"{block}.attn.w_out", (d, d), (2 * cfg.n_layers * d) ** -0.5)
            self._constant(f"{block}.attn.b_out", (d,), 0.0)
            self._constant(f"{block}.ln2.gamma", (d,), 1.0)
            self._constant(f"{block}.ln2.beta", (d,), 0.0)
            self._normal(rng, f"{block}.mlp.w_in", (d, hidden), d**-0.5)
            self._constant(f"{block}.mlp.b_in", (hidden,), 0.0)
            self._normal(rng, f"{block}.mlp.w_out", (hidden, d), (2 * cfg.n_layers * hidden) ** -0.5)
            self._constant(f"{block}.mlp.b_out", (d,), 0.0)
        self._constant(f"{prefix}.ln_final.gamma", (d,), 1.0)
        self._constant(f"{prefix}.ln_final.beta", (d,), 0.0)
        self._normal(rng, f"{prefix}.projection", (d, cfg.d_embed), d**-0.5)

    def _init_parameters(self, rng: SeededRng) -> None:
        cfg = self.config
        d = cfg.d_model
        self._normal(rng, "text.token_embedding", (self.vocab_size, d), 0.02)
        self._normal(rng, "text.positional", (cfg.context_len, d), 0.01)
        self._init_tower(rng, "text")
        self._normal(rng, "image.patch_projection", (cfg.patch_dim, d), cfg.patch_dim**-0.5)
        self._constant("image.patch_bias", (d,), 0.0)
        self._normal(rng, "image.cls_token", (d,), d**-0.5)
        self._normal(rng, "image.positional", (cfg.n_patches + 1, d), 0.01)
        self._init_tower(rng, "image")
        self._constant("logit_scale", (), LOGIT_SCALE_INIT)

    def p(self, name: str) -> Tensor:
        return self.params[name].tensor

    def parameters(self) -> List[Parameter]:
        return list(self.params)

    def total_parameters(self) -> int:
        return self.params.total_size()

    def clone(self) -> "DualEncoder":
        """Independent copy with identical parameter values and trainable flags"""
        copy = DualEncoder(self.config, self.vocab_size, seed=self.seed, dtype=self.dtype, init=False)
        for param in self.params:
            copy.params.new(param.name, param.data.copy(), trainable=param.trainable)
        return copy

    def frozen_view(self) -> "DualEncoder":
        """Frozen encoder sharing this encoder's arrays; the flags here are left alone"""
        view = DualEncoder(self.config, self.vocab_size, seed=self.seed, dtype=self.dtype, init=False)
        for param in self.params:
            view.params.add(Parameter(param.name, Tensor._wrap(param.data), trainable=False))
        return view

    # transformer

    def _attention(self, x: Tensor, block: str, mask: Optional[np.ndarray]) -> Tensor:
        b, length, d = x.shape
        heads = self.config.n_heads
        dh = d // heads
        qkv = x @ self.p(f"{block}.attn.w_qkv") + self.p(f"{block}.attn.b_qkv")
        qkv = ops.transpose(qkv.reshape(b, length, 3, heads, dh), (2, 0, 3, 1, 4))
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = (q @ ops.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(dh))
        if mask is not None:
            scores = scores + Tensor._wrap(mask)
        weights = ops.softmax(scores, axis=-1)
        out = ops.transpose(weights @ v, (0, 2, 1, 3)).reshape(b, length, d)
        return out @ self.p(f"{block}.attn.w_out") + self.p(f"{block}.attn.b_out")

    def _block(self, x: Tensor, block: str, mask: Optional[np.ndarray]) -> Tensor:
        h = ops.layer_norm(x, self.p(f"{block}.ln1.gamma"), self.p(f"{block}.ln1.beta"))
        x = x + self._attention(h, block, mask)
        h = ops.layer_norm(x, self.p(f"{block}.ln2.gamma"), self.p(f"{block}.ln2.beta"))
        h = ops.gelu(h @ self.p(f"{block}.mlp.w_in") + self.p(f"{block}.mlp.b_in"))
        return x + (h @ self.p(f"{block}.mlp.w_out") + self.p(f"{block}.mlp.b_out"))

    def _tower(self, x: Tensor, prefix: str, mask: Optional[np.ndarray]) -> Tensor:
        for layer in range(self.config.n_layers):
            x = self._block(x, f"{prefix}.blocks.{layer}", mask)
        return ops.layer_norm(x, self.p(f"{prefix}.ln_final.gamma"), self.p(f"{prefix}.ln_final.beta"))

    # text tower

    def embed_tokens(self, ids: np.ndarray) -> Tensor:
        """Token embeddings [b, L, d_model] (positional embeddings are added later)"""
        return ops.embedding(self.p("text.token_embedding"), ids)

    def text_features(self, embedded: Tensor, eos_pos: np.ndarray) -> Tensor:
        """
        Run the causal text tower on pre-embedded sequences.

        Args:
            embedded: Token (or prompt) embeddings [b, L, d_model]
            eos_pos: [EOS] index per sequence

        Returns:
            Unit-norm text embeddings [b, d_embed]
        """
        length = self.config.context_len
        if embedded.ndim != 3 or embedded.shape[1] != length:
            raise ShapeError(f"text input must have length {length}, got shape {embedded.shape}")
        x = embedded + self.p("text.positional")
        x = self._tower(x, "text", causal_mask(length, self.dtype))
        pooled = x[np.arange(x.shape[0]), np.asarray(eos_pos, dtype=np.int64)]
        return ops.l2_normalize(pooled @ self.p("text.projection"))

    def encode_tokens(self, seqs: Union[TokenSeq, Sequence[TokenSeq]]) -> Tensor:
        if isinstance(seqs, TokenSeq):
            seqs = [seqs]
        for seq in seqs:
            if len(seq) != self.config.context_len:
                raise ShapeError(
                    f"token sequence has length {len(seq)}, expected {self.config.context_len}"
                )
        ids, eos = stack_tokens(seqs)
        return self.text_features(self.embed_tokens(ids), eos)

    # image tower

    def image_features(self, images: np.ndarray) -> Tuple[Tensor, Tensor]:
        """
        Run the image tower.

        Args:
            images: Planar images [b, 3, side, side] (a single [3, side, side] is accepted)

        Returns:
            (penultimate [b, d_model], unit-norm image embeddings [b, d_embed])
        """
        images = np.asarray(images)
        if images.ndim == 3:
            images = images[None]
        side = self.config.image_side
        if images.ndim != 4 or images.shape[1:] != (3, side, side):
            raise ShapeError(f"expected images of shape (3, {side}, {side}), got {images.shape[1:]}")
        b = images.shape[0]
        pixels = (images.astype(self.dtype) - PIXEL_MEAN) / PIXEL_STD
        patches = Tensor._wrap(patchify(pixels.astype(self.dtype), self.config.patch_size))
        tokens = patches @ self.p("image.patch_projection") + self.p("image.patch_bias")
        cls = ops.reshape(self.p("image.cls_token"), (1, 1, self.config.d_model))
        cls = cls + Tensor._wrap(np.zeros((b, 1, self.config.d_model), dtype=self.dtype))
        x = ops.concat([cls, tokens], axis=1) + self.p("image.positional")
        x = self._tower(x, "image", None)
        penultimate = x[:, 0]
        return penultimate, ops.l2_normalize(penultimate @ self.p("image.projection"))

    # logit scale

    def scale(self) -> Tensor:
        return ops.exp(self.p("logit_scale"))

    def clamp_logit_scale(self) -> None:
        """Keep exp(logit_scale) inside [1, 100]"""
        data = self.params["logit_scale"].data
        np.clip(data, 0.0, LOGIT_SCALE_MAX, out=data)

    def scale_value(self) -> float:
        return float(np.exp(self.params["logit_scale"].data))

    # inference helpers

    def embed_images(self, images: np.ndarray, batch: int = 128) -> Tuple[np.ndarray, np.ndarray]:
        """Penultimate features and image embeddings as arrays, without recording"""
        penult, emb = [], []
        with no_grad():
            for start in range(0, len(images), batch):
                p, e = self.image_features(images[start : start + batch])
                penult.append(p.data)
                emb.append(e.data)
        if not penult:
            d = self.config
            return np.zeros((0, d.d_model), self.dtype), np.zeros((0, d.d_embed), self.dtype)
        return np.concatenate(penult), np.concatenate(emb)

    def embed_texts(self, seqs: Sequence[TokenSeq]) -> np.ndarray:
        with no_grad():
            return self.encode_tokens(list(seqs)).data


def build_backbone(config: EncoderConfig, vocab: Vocabulary, seed: int = 0, dtype="f32") -> DualEncoder:
    model = DualEncoder(config, len(vocab), seed=seed, dtype=dtype)
    logger.info(
        f"Initialised dual encoder with {model.total_parameters()} parameters (seed {seed})"
    )
    return model
