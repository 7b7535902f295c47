import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.src.core.errors import ContractViolationError, DataError, ShapeError, VocabularyError
from app.src.data.synth import pretraining_corpus
from app.src.models.config_models import EncoderConfig
from app.src.tensor import Tensor
from app.src.vlm import encode_image, encode_text
from app.src.vlm.contrastive import clip_contrastive_loss, cosine_logits
from app.src.vlm.encoder import LOGIT_SCALE_MAX, DualEncoder, patchify
from app.src.vlm.pretrain import batch_slices, pretrain_toy
from app.src.vlm.vocab import EOS_ID, PAD_ID, SOS_ID, TokenSeq, Vocabulary, tokenize


def _unit(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# vocabulary and tokenizer


def test_reserved_ids_and_class_words(vocab):
    assert vocab.tokens[:3] == ["[SOS]", "[EOS]", "[PAD]"]
    assert "real" in vocab and "fake" in vocab
    assert len(vocab) <= 512


def test_vocabulary_text_round_trip(vocab, tmp_path):
    vocab.save(tmp_path / "vocab.txt")
    assert Vocabulary.load(tmp_path / "vocab.txt").tokens == vocab.tokens


def test_vocabulary_requires_class_words():
    with pytest.raises(ValueError):
        Vocabulary(["[SOS]", "[EOS]", "[PAD]", "real"])


def test_tokenize_single_word(vocab):
    seq = tokenize("fake", vocab, context_len=16)
    assert seq.ids == [SOS_ID, vocab.id_of("fake"), EOS_ID] + [PAD_ID] * 13
    assert seq.eos_pos == 2


def test_tokenize_empty_caption(vocab):
    seq = tokenize("", vocab, context_len=16)
    assert seq.ids == [SOS_ID, EOS_ID] + [PAD_ID] * 14
    assert seq.eos_pos == 1


def test_tokenize_truncates_keeping_eos(vocab):
    words = " ".join(["stripes", "red"] * 10)
    seq = tokenize(words, vocab, context_len=16)
    assert len(seq) == 16
    assert seq.eos_pos == 15
    assert seq.ids[1:15] == [vocab.id_of("stripes"), vocab.id_of("red")] * 7


def test_tokenize_unknown_word(vocab):
    with pytest.raises(VocabularyError) as info:
        tokenize("a photo of a unicorn", vocab)
    assert info.value.word == "unicorn"


def test_token_seq_rejects_tokens_after_eos():
    with pytest.raises(ValidationError):
        TokenSeq(ids=[SOS_ID, EOS_ID, 5, PAD_ID], eos_pos=1)


# encoders


def test_text_embedding_is_unit_and_deterministic(backbone, vocab):
    seq = tokenize("stripes red coarse", vocab, backbone.config.context_len)
    first = encode_text(seq, backbone)
    assert first.shape == (backbone.config.d_embed,)
    assert abs(np.linalg.norm(first.astype(np.float64)) - 1.0) < 1e-5
    assert encode_text(seq, backbone).tobytes() == first.tobytes()


def test_word_order_changes_text_embedding(backbone, vocab):
    length = backbone.config.context_len
    a = encode_text(tokenize("stripes red", vocab, length), backbone)
    b = encode_text(tokenize("red stripes", vocab, length), backbone)
    assert not np.allclose(a, b)


def test_padding_embeddings_do_not_reach_eos(backbone, vocab):
    seq = tokenize("blobs green fine", vocab, backbone.config.context_len)
    ids = np.asarray([seq.ids])
    embedded = backbone.embed_tokens(ids).data
    zeroed = embedded.copy()
    zeroed[0, seq.eos_pos + 1 :] = 0.0
    eos = np.asarray([seq.eos_pos])
    out = backbone.text_features(Tensor(embedded), eos).data
    out_zeroed = backbone.text_features(Tensor(zeroed), eos).data
    np.testing.assert_allclose(out, out_zeroed, atol=1e-6)


def test_text_length_mismatch(backbone, vocab):
    with pytest.raises(ShapeError):
        backbone.encode_tokens(tokenize("fake", vocab, backbone.config.context_len + 4))


def test_image_embedding_pair(backbone):
    side = backbone.config.image_side
    zeros = encode_image(np.zeros((3, side, side), np.float32), backbone)
    ones = encode_image(np.ones((3, side, side), np.float32), backbone)
    assert zeros.penultimate.shape == (backbone.config.d_model,)
    assert zeros.text_emb is None
    assert abs(np.linalg.norm(zeros.image_emb.astype(np.float64)) - 1.0) < 1e-5
    assert not np.allclose(zeros.image_emb, ones.image_emb)


def test_image_size_mismatch(backbone):
    side = backbone.config.image_side
    with pytest.raises(ShapeError):
        encode_image(np.zeros((3, side * 2, side * 2), np.float32), backbone)


def test_default_sequence_length_is_patches_plus_cls(vocab):
    model = DualEncoder(EncoderConfig(), len(vocab))
    assert patchify(np.zeros((1, 3, 64, 64), np.float32), 8).shape == (1, 64, 192)
    assert model.params["image.positional"].data.shape == (65, 64)


def test_encoder_config_divisibility():
    with pytest.raises(ValidationError):
        EncoderConfig(d_model=10, n_heads=4)
    with pytest.raises(ValidationError):
        EncoderConfig(image_side=60, patch_size=8)


def test_logit_scale_init_and_clamp(backbone):
    assert math.isclose(backbone.scale_value(), 1 / 0.07, rel_tol=1e-5)
    backbone.params["logit_scale"].data[...] = 10.0
    backbone.clamp_logit_scale()
    assert math.isclose(float(backbone.params["logit_scale"].data), LOGIT_SCALE_MAX, rel_tol=1e-6)
    assert backbone.scale_value() == pytest.approx(100.0, rel=1e-5)


# similarity and contrastive loss


def test_cosine_logits_contract():
    e0 = np.array([1.0, 0.0, 0.0])
    e1 = np.array([0.0, 1.0, 0.0])
    logits = cosine_logits(Tensor(e0), Tensor(np.stack([e0, e1])), 100.0)
    np.testing.assert_allclose(logits.data, [100.0, 0.0])
    with pytest.raises(ContractViolationError):
        cosine_logits(Tensor(e0 * 1.01), Tensor(np.stack([e0, e1])), 1.0)


def test_cosine_argmax_is_scale_invariant():
    rng = np.random.default_rng(0)
    images, classes = _unit(rng, 5, 4), _unit(rng, 3, 4)
    small = cosine_logits(Tensor(images), Tensor(classes), 0.5).data
    large = cosine_logits(Tensor(images), Tensor(classes), 80.0).data
    assert small.argmax(axis=1).tolist() == large.argmax(axis=1).tolist()


def test_contrastive_loss_rejects_single_pair():
    e = Tensor(np.array([[1.0, 0.0]]))
    with pytest.raises(ShapeError):
        clip_contrastive_loss(e, e, 1.0)


def test_contrastive_loss_two_by_two():
    rng = np.random.default_rng(1)
    images, texts = _unit(rng, 2, 3), _unit(rng, 2, 3)
    scale = 7.0
    s = scale * images @ texts.T

    def ce(rows):
        return np.mean([np.log(np.exp(r).sum()) - r[i] for i, r in enumerate(rows)])

    expected = 0.5 * (ce(s) + ce(s.T))
    loss = clip_contrastive_loss(Tensor(images), Tensor(texts), scale)
    assert loss.item() == pytest.approx(expected, abs=1e-12)


def test_contrastive_loss_perfect_alignment():
    e = Tensor(np.eye(3))
    assert clip_contrastive_loss(e, e, 100.0).item() < 1e-12


def test_contrastive_loss_permutation_symmetry():
    rng = np.random.default_rng(2)
    images, texts = _unit(rng, 4, 5), _unit(rng, 4, 5)
    perm = np.array([2, 0, 3, 1])
    a = clip_contrastive_loss(Tensor(images), Tensor(texts), 10.0).item()
    b = clip_contrastive_loss(Tensor(images[perm]), Tensor(texts[perm]), 10.0).item()
    assert a == pytest.approx(b, abs=1e-12)


# pre-training


def test_batch_slices_merges_short_tail():
    chunks = batch_slices(np.arange(9), 4, min_size=2)
    assert [len(c) for c in chunks] == [4, 5]
    assert [len(c) for c in batch_slices(np.arange(9), 4)] == [4, 4, 1]


def test_pretrain_zero_epochs_is_identity(backbone, vocab):
    corpus = pretraining_corpus(8, 4, seed=1, side=backbone.config.image_side)
    before = {p.name: p.data.copy() for p in backbone.parameters()}
    _, curve = pretrain_toy(backbone, corpus, vocab, epochs=0)
    assert curve == []
    for p in backbone.parameters():
        assert p.data.tobytes() == before[p.name].tobytes()


def test_pretrain_rejects_empty_dataset(backbone, vocab):
    with pytest.raises(DataError):
        pretrain_toy(backbone, [], vocab)


def test_pretrain_is_deterministic_and_learns(tiny_config, vocab):
    corpus = pretraining_corpus(48, 4, seed=2, side=tiny_config.image_side)
    curves = []
    for _ in range(2):
        model = DualEncoder(tiny_config, len(vocab), seed=0)
        _, curve = pretrain_toy(model, corpus, vocab, epochs=6, batch=16, lr=3e-3, seed=7)
        curves.append(curve)
        assert 1.0 <= model.scale_value() <= 100.0 + 1e-3
    assert curves[0] == curves[1]
    assert curves[0][-1] < curves[0][0]


@pytest.mark.slow
def test_pretraining_separates_matched_pairs(tiny_config, vocab):
    model = DualEncoder(tiny_config, len(vocab), seed=0)
    pretrain_toy(model, pretraining_corpus(400, 4, seed=4, side=8), vocab, epochs=8, batch=32, lr=3e-3, seed=7)
    held_out = pretraining_corpus(40, 4, seed=5, side=8)
    _, image_emb = model.embed_images(np.stack([s.image for s in held_out]))
    text_emb = model.embed_texts([tokenize(s.caption, vocab, tiny_config.context_len) for s in held_out])
    sims = image_emb.astype(np.float64) @ text_emb.astype(np.float64).T
    matched = np.diag(sims).mean()
    mismatched = sims[~np.eye(len(held_out), dtype=bool)].mean()
    assert matched > mismatched
