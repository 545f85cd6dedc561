"""
Binary embedding checkpoints.

Layout (all integers little-endian):
    4 bytes   magic b"RKGE"
    uint16    format version
    uint8     scorer tag (0 = TransE, 1 = ComplEx)
    uint32    k, number of entities, number of relations
    entity ids, then relation ids: uint32 byte length + UTF-8 bytes each
    float64   entity matrix, row-major, n_entities x width
    float64   relation matrix, row-major, n_relations x width
    uint32    byte length + UTF-8 JSON of the training config (may be empty)

width is k for TransE and 2k for ComplEx (interleaved real/imaginary pairs).
"""
import logging
import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.errors import CheckpointError, ConfigError
from app.schemas.training import ScorerName, TrainConfig
from app.services.embedding_service import EmbeddingTable, get_scorer

logger = logging.getLogger(__name__)

MAGIC = b"RKGE"
FORMAT_VERSION = 1
SCORER_TAGS = {ScorerName.TRANSE: 0, ScorerName.COMPLEX: 1}
TAG_SCORERS = {tag: name for name, tag in SCORER_TAGS.items()}

HEADER = struct.Struct("<4sHBIII")
LENGTH = struct.Struct("<I")


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise CheckpointError("corrupt checkpoint: unexpected end of file")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def string(self) -> str:
        (length,) = LENGTH.unpack(self.take(LENGTH.size))
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("corrupt checkpoint: id is not valid UTF-8")

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        raw = self.take(rows * cols * 8)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)


def _pack_string(value: str) -> bytes:
    encoded = value.encode("utf-8")
    return LENGTH.pack(len(encoded)) + encoded


def save_checkpoint(table: EmbeddingTable, path: Union[str, Path], cfg: Optional[TrainConfig] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    parts: List[bytes] = [
        HEADER.pack(MAGIC, FORMAT_VERSION, SCORER_TAGS[table.scorer], table.k, len(table.entities), len(table.relations))
    ]
    parts.extend(_pack_string(e) for e in table.entities)
    parts.extend(_pack_string(r) for r in table.relations)
    parts.append(np.ascontiguousarray(table.entity_vectors, dtype="<f8").tobytes())
    parts.append(np.ascontiguousarray(table.relation_vectors, dtype="<f8").tobytes())
    parts.append(_pack_string(cfg.model_dump_json() if cfg is not None else ""))

    path.write_bytes(b"".join(parts))
    logger.info(f"✅ Saved {table.scorer.value} checkpoint ({len(table.entities)} entities) to {path}")


def load_checkpoint(path: Union[str, Path]) -> Tuple[EmbeddingTable, Optional[TrainConfig]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"checkpoint not found: {path}")
    reader = _Reader(path.read_bytes())

    magic, version, tag, k, n_entities, n_relations = HEADER.unpack(reader.take(HEADER.size))
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not an embedding checkpoint (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    if tag not in TAG_SCORERS:
        raise CheckpointError(f"unknown scorer tag {tag}")

    scorer = TAG_SCORERS[tag]
    width = get_scorer(scorer).width(k)
    entities = [reader.string() for _ in range(n_entities)]
    relations = [reader.string() for _ in range(n_relations)]
    entity_vectors = reader.matrix(n_entities, width)
    relation_vectors = reader.matrix(n_relations, width)
    config_json = reader.string()
    if reader.offset != len(reader.data):
        raise CheckpointError("corrupt checkpoint: trailing bytes")

    cfg = None
    if config_json:
        try:
            cfg = TrainConfig.model_validate_json(config_json)
        except ValidationError as e:
            raise CheckpointError(f"corrupt checkpoint config: {e}")

    try:
        table = EmbeddingTable(scorer, k, entities, relations, entity_vectors, relation_vectors)
    except ConfigError as e:
        raise CheckpointError(f"corrupt checkpoint: {e}")
    logger.info(f"Loaded {scorer.value} checkpoint k={k} from {path}")
    return table, cfg
