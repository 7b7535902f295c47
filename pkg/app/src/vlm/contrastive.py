import numpy as np

from ..core.errors import ContractViolationError, ShapeError
from ..tensor import ops
from ..tensor.tensor import Tensor

UNIT_NORM_TOLERANCE = 1e-3


def check_unit_norm(x: Tensor, label: str) -> None:
    norms = np.sqrt((np.asarray(x.data, dtype=np.float64) ** 2).sum(axis=-1))
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE):
        worst = float(norms.flat[np.argmax(np.abs(norms - 1.0))])
        raise ContractViolationError(f"{label} must be unit-normalised, found norm {worst:.6f}")


def cosine_logits(image_emb: Tensor, class_embs: Tensor, scale) -> Tensor:
    """
    Scaled cosine similarities ``scale * <image_emb, class_emb_i>``.

    Args:
        image_emb: Unit vectors [d] or [b, d]
        class_embs: Unit class embeddings [c, d]
        scale: exp(logit_scale), a float or scalar Tensor

    Returns:
        Logits [c] or [b, c]
    """
    image_emb = ops.as_tensor(image_emb)
    class_embs = ops.as_tensor(class_embs, image_emb.dtype)
    check_unit_norm(image_emb, "image embedding")
    check_unit_norm(class_embs, "class embeddings")
    single = image_emb.ndim == 1
    if single:
        image_emb = ops.reshape(image_emb, (1, image_emb.shape[0]))
    logits = (image_emb @ ops.swapaxes(class_embs, -1, -2)) * scale
    if single:
        logits = ops.reshape(logits, (class_embs.shape[0],))
    return logits


def clip_contrastive_loss(image_embs: Tensor, text_embs: Tensor, scale) -> Tensor:
    """
    Symmetric InfoNCE over a batch of matched pairs.

    Row i of both inputs is a matched pair; the loss averages image->text and
    text->image cross entropy with diagonal targets.
    """
    if image_embs.shape != text_embs.shape or image_embs.ndim != 2:
        raise ShapeError(
            f"contrastive loss needs matching [b, d] inputs, got {image_embs.shape} and {text_embs.shape}"
        )
    b = image_embs.shape[0]
    if b < 2:
        raise ShapeError(f"contrastive loss needs a batch of at least 2 pairs, got {b}")
    logits = cosine_logits(image_embs, text_embs, scale)
    targets = np.arange(b)
    image_to_text = ops.cross_entropy_with_logits(logits, targets)
    text_to_image = ops.cross_entropy_with_logits(ops.swapaxes(logits, 0, 1), targets)
    return (image_to_text + text_to_image) * 0.5
