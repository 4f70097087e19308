"""Node features: hashed bag-of-words encoder and the binary embedding store."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from grag.amr import AmrAugmentedText

MAGIC = b"GRAGEMB1"
VERSION = 1
QUESTION_KEY = "__question__"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


class EmbeddingFormatError(ValueError):
    pass


class BadMagic(EmbeddingFormatError):
    pass


class DimMismatch(EmbeddingFormatError):
    pass


class TruncatedFile(EmbeddingFormatError):
    pass


class DuplicateDocId(EmbeddingFormatError):
    pass


class MissingAmrText(KeyError):
    pass


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def hash_encode(text: str, d: int, seed: int = 0) -> np.ndarray:
    """Signed feature hashing of lowercase whitespace tokens, L2-normalized.

    Token hash is FNV-1a-64 of the UTF-8 bytes XOR ``seed``; bucket is
    ``hash mod d`` and the sign is negative when bit 63 is set.
    """
    if d < 2:
        raise ValueError("hash_encode needs d >= 2")
    vec = np.zeros(d, dtype=np.float64)
    key = seed & MASK64
    for tok in text.lower().split():
        h = fnv1a_64(tok.encode("utf-8")) ^ key
        vec[h % d] += -1.0 if h >> 63 else 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class HashEncoder:
    dim: int = 64
    seed: int = 0

    def encode(self, text: str) -> np.ndarray:
        return hash_encode(text, self.dim, self.seed)


@dataclass
class EmbeddingSet:
    dim: int
    doc_vectors: dict[str, np.ndarray]
    question_vector: np.ndarray
    provenance: str = "loaded"
    _matrix_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.dim <= 0:
            raise DimMismatch("embedding dim must be positive")
        for k, v in [(QUESTION_KEY, self.question_vector), *self.doc_vectors.items()]:
            if np.shape(v) != (self.dim,):
                raise DimMismatch(f"vector {k!r} has shape {np.shape(v)}, expected ({self.dim},)")

    def matrix(self, doc_ids: Sequence[str]) -> np.ndarray:
        missing = [d for d in doc_ids if d not in self.doc_vectors]
        if missing:
            raise KeyError(f"no embedding for documents {missing}")
        return np.stack([np.asarray(self.doc_vectors[d], dtype=np.float64) for d in doc_ids])


def document_input(text: str, amr: AmrAugmentedText | str | None) -> str:
    extra = amr.rendered if isinstance(amr, AmrAugmentedText) else (amr or "")
    return " ".join(part for part in (text.strip(), extra.strip()) if part)


def build_node_features(
    docs: Sequence[tuple[str, str]],
    amr_texts: Mapping[str, AmrAugmentedText | str],
    mode: str,
    enc: HashEncoder,
    question_text: str = "",
) -> EmbeddingSet:
    """Encode each document as plain text (``baseline``) or text followed by its
    AMR path words (``amr_augmented``). The question vector is always the plain
    question text."""
    if mode not in ("baseline", "amr_augmented"):
        raise ValueError(f"unknown feature mode {mode!r}")
    vectors = {}
    for doc_id, text in docs:
        if mode == "amr_augmented":
            if doc_id not in amr_texts:
                raise MissingAmrText(doc_id)
            text = document_input(text, amr_texts[doc_id])
        vectors[doc_id] = enc.encode(text)
    return EmbeddingSet(enc.dim, vectors, enc.encode(question_text), provenance="hashed")


def save_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    records = [(QUESTION_KEY, emb.question_vector), *emb.doc_vectors.items()]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, emb.dim, len(records)))
        for key, vec in records:
            raw_id = key.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_id)))
            fh.write(raw_id)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingSet:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise BadMagic(f"{path}: not a GRAGEMB1 file")
    if len(data) < 20:
        raise TruncatedFile(f"{path}: header truncated")
    version, dim, count = struct.unpack_from("<III", data, 8)
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if dim == 0 or (expected_dim is not None and dim != expected_dim):
        raise DimMismatch(f"{path}: dim {dim}, expected {expected_dim}")
    off = 20
    vectors: dict[str, np.ndarray] = {}
    question = None
    for k in range(count):
        if off + 2 > len(data):
            raise TruncatedFile(f"{path}: record {k} of {count} missing")
        (id_len,) = struct.unpack_from("<H", data, off)
        off += 2
        end = off + id_len + 4 * dim
        if end > len(data):
            raise TruncatedFile(f"{path}: record {k} of {count} truncated")
        key = data[off:off + id_len].decode("utf-8")
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=off + id_len).astype(np.float64)
        off = end
        if key == QUESTION_KEY:
            if question is not None:
                raise DuplicateDocId(f"{path}: question vector stored twice")
            question = vec
        else:
            if key in vectors:
                raise DuplicateDocId(f"{path}: duplicate id {key!r}")
            vectors[key] = vec
    if question is None:
        question = np.zeros(dim)
    return EmbeddingSet(dim, vectors, question, provenance="loaded")
