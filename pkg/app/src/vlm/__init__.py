"""
Toy vision-language dual encoder, its vocabulary and contrastive pre-training.
"""

import numpy as np

from .contrastive import clip_contrastive_loss, cosine_logits
from .encoder import DualEncoder, EmbeddingPair, build_backbone, patchify
from .pretrain import pretrain_toy
from .vocab import TokenSeq, Vocabulary, stack_tokens, tokenize


def encode_text(seq: TokenSeq, model: DualEncoder) -> np.ndarray:
    """Unit text embedding [d_embed] of one token sequence"""
    return model.embed_texts([seq])[0]


def encode_image(image: np.ndarray, model: DualEncoder) -> EmbeddingPair:
    """Image embedding and penultimate [CLS] activation of one [3, H, W] image"""
    penultimate, emb = model.embed_images(np.asarray(image)[None])
    return EmbeddingPair(image_emb=emb[0], penultimate=penultimate[0])


__all__ = [
    "DualEncoder",
    "EmbeddingPair",
    "TokenSeq",
    "Vocabulary",
    "build_backbone",
    "clip_contrastive_loss",
    "cosine_logits",
    "encode_image",
    "encode_text",
    "patchify",
    "pretrain_toy",
    "stack_tokens",
    "tokenize",
]
