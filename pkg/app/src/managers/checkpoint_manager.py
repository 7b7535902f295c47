"""
Single-file checkpoints.

Layout (all integers little-endian)::

    "VLMC" | u16 version | u32 config length | config text (UTF-8)
    then per parameter:
        u16 name length | name | u8 dtype tag | u8 ndim | u32 dims... | raw values
    u32 CRC-32 of every preceding byte
"""

import logging
import os
import struct
import tempfile
import zlib
from collections import OrderedDict
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..agents.adapted_model import AdaptedModel, build_strategy
from ..core.config import ExperimentConfig, parse_key_values
from ..core.errors import (
    ConfigError,
    ChecksumMismatchError,
    CheckpointFormatError,
    MagicMismatchError,
    UnsupportedVersionError,
)
from ..tensor.parameter import Parameter
from ..vlm.encoder import DualEncoder
from ..vlm.vocab import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"VLMC"
VERSION = 1
DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}

KIND_DUAL_ENCODER = "dual_encoder"
KIND_ADAPTED = "adapted"

Model = Union[DualEncoder, AdaptedModel]
PathLike = Union[str, Path]


class CheckpointContents(BaseModel):
    """
    Model for everything a checkpoint restores
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: object = Field(description="DualEncoder or AdaptedModel")
    config: ExperimentConfig = Field(description="Experiment config stored with the weights")
    kind: str = Field(description="'dual_encoder' or 'adapted'")
    seed: int = Field(description="Initialisation seed")
    vocab: Vocabulary = Field(description="Vocabulary of the text encoder")


# byte layout


def encode_payload(config_text: str, params: Iterable[Parameter]) -> bytes:
    """Serialise a config block and a tensor table, CRC included"""
    config_bytes = config_text.encode("utf-8")
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(config_bytes)), config_bytes]
    for param in params:
        data = param.data
        if data.dtype not in DTYPE_TAGS:
            raise CheckpointFormatError(f"Unsupported dtype {data.dtype} for {param.name}")
        name = param.name.encode("utf-8")
        parts.append(struct.pack("<H", len(name)))
        parts.append(name)
        parts.append(struct.pack("<BB", DTYPE_TAGS[data.dtype], data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(np.ascontiguousarray(data, dtype=data.dtype.newbyteorder("<")).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_payload(blob: bytes) -> Tuple[str, "OrderedDict[str, np.ndarray]"]:
    """
    Validate and parse a checkpoint.

    Returns:
        (config text, parameter arrays by name in file order)
    """
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise MagicMismatchError(f"Not a VLMC checkpoint (magic {blob[:4]!r})")
    if len(blob) < 14:
        raise CheckpointFormatError(f"Checkpoint truncated to {len(blob)} bytes")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != VERSION:
        raise UnsupportedVersionError(f"Unsupported checkpoint version {version} (expected {VERSION})")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    actual_crc = zlib.crc32(body)
    if actual_crc != stored_crc:
        raise ChecksumMismatchError(
            f"Checkpoint CRC mismatch: stored {stored_crc:08x}, computed {actual_crc:08x}"
        )

    def take(offset: int, size: int) -> bytes:
        if offset + size > len(body):
            raise CheckpointFormatError("Checkpoint tensor table is truncated")
        return body[offset : offset + size]

    (config_len,) = struct.unpack("<I", take(6, 4))
    offset = 10
    config_text = take(offset, config_len).decode("utf-8")
    offset += config_len

    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    while offset < len(body):
        (name_len,) = struct.unpack("<H", take(offset, 2))
        offset += 2
        name = take(offset, name_len).decode("utf-8")
        offset += name_len
        tag, ndim = struct.unpack("<BB", take(offset, 2))
        offset += 2
        if tag not in TAG_DTYPES:
            raise CheckpointFormatError(f"Unknown dtype tag {tag} for parameter {name}")
        shape = struct.unpack(f"<{ndim}I", take(offset, 4 * ndim))
        offset += 4 * ndim
        dtype = TAG_DTYPES[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        raw = take(offset, nbytes)
        offset += nbytes
        if name in tensors:
            raise CheckpointFormatError(f"Duplicate parameter {name} in checkpoint")
        tensors[name] = np.frombuffer(raw, dtype=dtype.newbyteorder("<")).astype(dtype).reshape(shape)
    return config_text, tensors


# models


def _config_block(config: ExperimentConfig, kind: str, seed: int, vocab: Vocabulary) -> str:
    if any("," in token for token in vocab.tokens):
        raise CheckpointFormatError("Vocabulary tokens must not contain commas")
    values: Dict[str, str] = dict(config.flat())
    values["checkpoint.kind"] = kind
    values["checkpoint.seed"] = str(seed)
    values["checkpoint.vocab"] = ",".join(vocab.tokens)
    return "".join(f"{key}={values[key]}\n" for key in sorted(values))


def encode_checkpoint(
    model: Model,
    config: Optional[ExperimentConfig] = None,
    vocab: Optional[Vocabulary] = None,
) -> bytes:
    """
    Serialise a DualEncoder or an AdaptedModel.

    Args:
        model: Model to store
        config: Experiment config; defaults to one built from the model's own
            encoder config (and strategy spec)
        vocab: Vocabulary of the text encoder (AdaptedModel carries its own)
    """
    if isinstance(model, AdaptedModel):
        kind, backbone = KIND_ADAPTED, model.backbone
        vocab = model.vocab
        base = config or ExperimentConfig()
        config = base.model_copy(update={"model": backbone.config, "strategy": model.spec})
    else:
        kind, backbone = KIND_DUAL_ENCODER, model
        vocab = vocab or Vocabulary.default()
        config = (config or ExperimentConfig()).model_copy(update={"model": backbone.config})
    if len(vocab) != backbone.vocab_size:
        raise CheckpointFormatError(
            f"Vocabulary has {len(vocab)} tokens but the model embeds {backbone.vocab_size}"
        )
    return encode_payload(_config_block(config, kind, model.seed, vocab), model.parameters())


def _restore(params: Iterable[Parameter], tensors: Dict[str, np.ndarray]) -> None:
    params = list(params)
    expected = {p.name for p in params}
    if expected != set(tensors):
        missing = sorted(expected - set(tensors))
        unknown = sorted(set(tensors) - expected)
        raise CheckpointFormatError(f"Parameter mismatch: missing {missing}, unexpected {unknown}")
    for param in params:
        array = tensors[param.name]
        if array.shape != param.data.shape:
            raise CheckpointFormatError(
                f"Shape mismatch for {param.name}: file {array.shape}, model {param.data.shape}"
            )
        param.tensor.data = array.copy()


def decode_checkpoint(blob: bytes) -> CheckpointContents:
    config_text, tensors = decode_payload(blob)
    values = parse_key_values(config_text)
    try:
        kind = values.pop("checkpoint.kind")
        seed = int(values.pop("checkpoint.seed"))
        vocab = Vocabulary([t for t in values.pop("checkpoint.vocab").split(",") if t])
    except (KeyError, ValueError) as e:
        raise CheckpointFormatError(f"Checkpoint config block is incomplete: {e}") from e
    try:
        config = ExperimentConfig.from_flat(values)
    except ConfigError as e:
        raise CheckpointFormatError(f"Checkpoint config block is invalid: {e}") from e

    dtype = next(iter(tensors.values())).dtype if tensors else np.dtype(np.float32)
    backbone = DualEncoder(config.model, len(vocab), seed=seed, dtype=dtype)
    if kind == KIND_DUAL_ENCODER:
        _restore(backbone.params, tensors)
        model: Model = backbone
    elif kind == KIND_ADAPTED:
        strategy = build_strategy(backbone, config.strategy, vocab, seed)
        _restore(strategy.all_parameters(), tensors)
        model = AdaptedModel(strategy)
    else:
        raise CheckpointFormatError(f"Unknown checkpoint kind {kind!r}")
    return CheckpointContents(model=model, config=config, kind=kind, seed=seed, vocab=vocab)


# files


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Write via a temporary file in the target directory and rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save_checkpoint(
    model: Model,
    path: PathLike,
    config: Optional[ExperimentConfig] = None,
    vocab: Optional[Vocabulary] = None,
) -> Path:
    try:
        written = atomic_write_bytes(path, encode_checkpoint(model, config, vocab))
    except OSError as e:
        raise OSError(f"Could not write checkpoint {path}: {e}") from e
    logger.info(f"Saved checkpoint to {written}")
    return written


def read_checkpoint(path: PathLike) -> CheckpointContents:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    contents = decode_checkpoint(path.read_bytes())
    logger.info(f"Loaded {contents.kind} checkpoint from {path}")
    return contents


def load_checkpoint(path: PathLike) -> Model:
    return read_checkpoint(path).model
