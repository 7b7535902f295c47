import numpy as np

from ..prompts.classes import CLASS_WORDS
from ..tensor.tensor import Tensor, no_grad
from ..vlm.contrastive import cosine_logits
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary, tokenize


def class_text_embeddings(backbone: DualEncoder, vocab: Vocabulary) -> Tensor:
    """Text embeddings [2, d_embed] of the single-word captions "real" and "fake" """
    seqs = [tokenize(word, vocab, backbone.config.context_len) for word in CLASS_WORDS]
    return backbone.encode_tokens(seqs)


def softmax_fake(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=-1, keepdims=True)
    return probs[..., 1]


def zero_shot_probability(backbone: DualEncoder, vocab: Vocabulary, images: np.ndarray) -> np.ndarray:
    """
    Fake probability from the untouched backbone: softmax over the scaled
    cosine similarity to the two class-word captions.
    """
    with no_grad():
        classes = class_text_embeddings(backbone, vocab)
        _, emb = backbone.embed_images(images)
        logits = cosine_logits(Tensor._wrap(emb), classes, backbone.scale_value())
    return softmax_fake(logits.data)
