"""
Closed word-level vocabulary and tokenizer of the text encoder.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.errors import VocabularyError
from ..prompts.captions import CATEGORY_PATTERNS, CATEGORY_TINTS, FAMILY_WORDS, SCALE_WORDS
from ..prompts.classes import CLASS_WORDS, EOS_TOKEN, FILLER_WORDS, PAD_TOKEN, RESERVED_TOKENS, SOS_TOKEN

MAX_VOCAB_SIZE = 512
SOS_ID, EOS_ID, PAD_ID = 0, 1, 2


class Vocabulary:
    """
    Bijective token <-> id map; ids 0, 1, 2 are [SOS], [EOS], [PAD]
    """

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:3]) != RESERVED_TOKENS:
            raise ValueError(f"Vocabulary must start with {RESERVED_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("Vocabulary tokens must be unique")
        if len(tokens) > MAX_VOCAB_SIZE:
            raise ValueError(f"Vocabulary has {len(tokens)} tokens, limit is {MAX_VOCAB_SIZE}")
        for word in CLASS_WORDS:
            if word not in tokens:
                raise ValueError(f"Vocabulary is missing class word {word!r}")
        self.tokens: List[str] = tokens
        self.ids: Dict[str, int] = {token: i for i, token in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    def id_of(self, word: str) -> int:
        try:
            return self.ids[word]
        except KeyError:
            raise VocabularyError(word) from None

    def to_text(self) -> str:
        """One token per line; the line number is the id"""
        return "".join(f"{token}\n" for token in self.tokens)

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        return cls([line for line in text.split("\n") if line != ""])

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def default(cls) -> "Vocabulary":
        """Reserved tokens, class words, then every caption descriptor word"""
        words: List[str] = list(RESERVED_TOKENS) + list(CLASS_WORDS)
        pools: Iterable[Iterable[str]] = (
            CATEGORY_PATTERNS,
            CATEGORY_TINTS,
            SCALE_WORDS,
            *FAMILY_WORDS.values(),
            FILLER_WORDS,
        )
        for pool in pools:
            for word in pool:
                if word not in words:
                    words.append(word)
        return cls(words)


class TokenSeq(BaseModel):
    """
    Model for a fixed-length token sequence: [SOS] words [EOS] [PAD]...
    """

    model_config = ConfigDict(frozen=True)

    ids: List[int] = Field(description="Token ids, right-padded to the context length")
    eos_pos: int = Field(ge=1, description="Index of the [EOS] token")

    @model_validator(mode="after")
    def _check_layout(self):
        ids = self.ids
        if self.eos_pos >= len(ids):
            raise ValueError("eos_pos must be inside the sequence")
        if ids[0] != SOS_ID or ids.count(SOS_ID) != 1:
            raise ValueError("exactly one [SOS] at position 0 is required")
        if ids[self.eos_pos] != EOS_ID or ids.count(EOS_ID) != 1:
            raise ValueError("exactly one [EOS] at eos_pos is required")
        if any(token != PAD_ID for token in ids[self.eos_pos + 1 :]):
            raise ValueError("only [PAD] may follow [EOS]")
        return self

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(text: str, vocab: Vocabulary, context_len: int = 32) -> TokenSeq:
    """
    Tokenize a caption into a padded TokenSeq.

    Args:
        text: Whitespace separated words, matched lowercase
        vocab: Closed vocabulary
        context_len: Sequence length L

    Returns:
        [SOS] + first L-2 word ids + [EOS] + [PAD] * rest
    """
    if context_len < 2:
        raise ValueError("context_len must leave room for [SOS] and [EOS]")
    word_ids = [vocab.id_of(word) for word in text.lower().split()]
    word_ids = word_ids[: context_len - 2]
    ids = [SOS_ID, *word_ids, EOS_ID]
    eos_pos = len(ids) - 1
    ids.extend([PAD_ID] * (context_len - len(ids)))
    return TokenSeq(ids=ids, eos_pos=eos_pos)


def stack_tokens(seqs: Sequence[TokenSeq]) -> "tuple[np.ndarray, np.ndarray]":
    """Batch arrays (ids[b, L], eos_pos[b]) for a list of sequences"""
    ids = np.asarray([seq.ids for seq in seqs], dtype=np.int64)
    eos = np.asarray([seq.eos_pos for seq in seqs], dtype=np.int64)
    return ids, eos
