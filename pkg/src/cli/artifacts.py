"""
Corpus cache and run artifacts on disk.

A prepared corpus lives under ``$RPR_CACHE_DIR/<name>/v1/``:

    records.jsonl    ingested records, one JSON object per line
    vocab.tsv        token<TAB>index
    documents.bin    polarity documents (see ``encode_documents``)
    split.json       seed and record positions of every partition
    embeddings.npy   word vector table
    manifest.json    RunManifest of the ``prepare`` run
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import struct
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from ..corpus import PreparedCorpus, assemble_corpus
from ..corpus.documents import PolarityDocuments
from ..corpus.embeddings import EmbeddingTable
from ..corpus.text import Vocabulary
from ..lib.core.errors import ArtifactNotFoundError, DataError
from ..schemas.records import DatasetSplit, InteractionRecord
from ..schemas.reports import RunManifest

logger = logging.getLogger(__name__)

RECORDS_FILE = "records.jsonl"
VOCAB_FILE = "vocab.tsv"
DOCUMENTS_FILE = "documents.bin"
SPLIT_FILE = "split.json"
EMBEDDINGS_FILE = "embeddings.npy"
MANIFEST_FILE = "manifest.json"

_DOC_MAGIC = b"RPRDOCS\0"


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_manifest(directory: Path, manifest: RunManifest) -> Path:
    path = Path(directory) / MANIFEST_FILE
    atomic_write_text(path, manifest.model_dump_json(indent=2))
    return path


def read_manifest(directory: Path) -> RunManifest:
    path = Path(directory) / MANIFEST_FILE
    if not path.is_file():
        raise ArtifactNotFoundError(path)
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))


def write_csv(path: Path, rows: Sequence[Sequence[str]]) -> None:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    atomic_write_text(path, buffer.getvalue())


def write_records(path: Path, records: Iterable[InteractionRecord]) -> None:
    lines = [rec.model_dump_json() for rec in records]
    atomic_write_text(path, "\n".join(lines) + "\n" if lines else "")


def read_records(path: Path) -> List[InteractionRecord]:
    if not path.is_file():
        raise ArtifactNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        return [
            InteractionRecord.model_validate_json(line) for line in fh if line.strip()
        ]


def encode_documents(documents: Mapping[str, PolarityDocuments]) -> bytes:
    """
    magic, u32 user count, then per user: u32 id length, UTF-8 id,
    u64 length + int64 ids of the positive then the negative sequence
    """
    parts = [_DOC_MAGIC, struct.pack("<I", len(documents))]
    for user_id, docs in documents.items():
        raw = user_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
        for tokens in (docs.positive_tokens, docs.negative_tokens):
            parts.append(struct.pack("<Q", len(tokens)))
            parts.append(np.asarray(tokens, dtype="<i8").tobytes())
    return b"".join(parts)


def decode_documents(data: bytes) -> Dict[str, PolarityDocuments]:
    if not data.startswith(_DOC_MAGIC):
        raise DataError("documents file has a bad header")
    offset = len(_DOC_MAGIC)

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise DataError("documents file is truncated")
        chunk = data[offset : offset + n]
        offset += n
        return chunk

    (n_users,) = struct.unpack("<I", take(4))
    documents: Dict[str, PolarityDocuments] = {}
    for _ in range(n_users):
        (id_len,) = struct.unpack("<I", take(4))
        user_id = take(id_len).decode("utf-8")
        seqs = []
        for _ in range(2):
            (length,) = struct.unpack("<Q", take(8))
            values = np.frombuffer(take(8 * length), dtype="<i8")
            seqs.append(values.astype(np.int64))
        documents[user_id] = PolarityDocuments(user_id, seqs[0], seqs[1])
    return documents


def write_corpus_cache(
    directory: Path,
    records: Sequence[InteractionRecord],
    corpus: PreparedCorpus,
    manifest: RunManifest,
) -> None:
    directory = Path(directory)
    write_records(directory / RECORDS_FILE, records)
    vocab_text = "\n".join(corpus.vocab.to_lines()) + "\n"
    atomic_write_text(directory / VOCAB_FILE, vocab_text)
    atomic_write_bytes(directory / DOCUMENTS_FILE, encode_documents(corpus.documents))
    split = {"seed": corpus.split.seed, "indices": corpus.split.indices}
    atomic_write_text(directory / SPLIT_FILE, json.dumps(split, indent=2))
    buffer = io.BytesIO()
    np.save(buffer, corpus.embeddings.matrix, allow_pickle=False)
    atomic_write_bytes(directory / EMBEDDINGS_FILE, buffer.getvalue())
    write_manifest(directory, manifest)
    logger.info(f"Corpus cache written to {directory}")


def load_corpus_cache(
    directory: Path,
    threshold: Optional[float] = None,
    max_len: Optional[int] = None,
) -> PreparedCorpus:
    """
    Rebuild a PreparedCorpus from a cache directory.

    Documents are rebuilt from the training split when ``threshold`` or
    ``max_len`` differ from the values the cache was prepared with.
    """
    directory = Path(directory)
    required = (RECORDS_FILE, VOCAB_FILE, DOCUMENTS_FILE, SPLIT_FILE, EMBEDDINGS_FILE)
    for name in required:
        if not (directory / name).is_file():
            raise ArtifactNotFoundError(directory / name)

    manifest = read_manifest(directory)
    records = read_records(directory / RECORDS_FILE)
    with open(directory / VOCAB_FILE, "r", encoding="utf-8") as fh:
        vocab = Vocabulary.from_lines(fh)

    raw_split = json.loads((directory / SPLIT_FILE).read_text(encoding="utf-8"))
    indices = {k: [int(i) for i in v] for k, v in raw_split["indices"].items()}
    try:
        split = DatasetSplit(
            seed=int(raw_split["seed"]),
            train=[records[i] for i in indices["train"]],
            validation=[records[i] for i in indices["validation"]],
            test=[records[i] for i in indices["test"]],
            indices=indices,
        )
    except (IndexError, KeyError) as e:
        raise DataError(f"split file does not match the cached records: {e}") from e

    matrix = np.load(directory / EMBEDDINGS_FILE, allow_pickle=False)
    if matrix.shape[0] != len(vocab):
        raise DataError(
            f"embedding table has {matrix.shape[0]} rows for {len(vocab)} tokens"
        )
    embeddings = EmbeddingTable(matrix=matrix, pad_index=vocab.pad_index)

    cached_threshold = float(manifest.config.get("polarity_threshold", 3.0))
    cached_max_len = int(manifest.config.get("max_doc_len", 500))
    threshold = cached_threshold if threshold is None else threshold
    max_len = cached_max_len if max_len is None else max_len
    corpus = assemble_corpus(split, vocab, embeddings, threshold, max_len)
    if (threshold, max_len) == (cached_threshold, cached_max_len):
        cached = decode_documents((directory / DOCUMENTS_FILE).read_bytes())
        if set(cached) != set(corpus.documents):
            raise DataError("cached documents do not cover the training users")
        corpus.documents = cached
    else:
        logger.info(f"Rebuilt documents (threshold={threshold}, max_len={max_len})")
    logger.info(
        f"Loaded corpus cache {directory}: {len(records)} records, "
        f"{vocab.n_regular} tokens"
    )
    return corpus


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
