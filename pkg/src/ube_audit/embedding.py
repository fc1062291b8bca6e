"""Embedding input/output: binary and text loaders, normalization, word pool.

Loaders return a :class:`RawEmbedding` that preserves file order (assumed to
be descending frequency, so a token's row index doubles as its frequency
rank). Zero vectors are dropped and duplicate tokens keep their first
occurrence, both counted and logged. :func:`normalize` turns a raw embedding
into a :class:`UnitEmbedding` whose rows all have unit Euclidean norm.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, TruncatedFile, UnknownToken

log = logging.getLogger(__name__)

_HEADER_LIMIT = 256  # a sane word2vec header fits well within this


@dataclass(frozen=True, eq=False)
class RawEmbedding:
    """Vectors exactly as read from disk, in file (frequency-rank) order."""

    dim: int
    tokens: tuple[str, ...]
    vectors: np.ndarray  # (len(tokens), dim) float32
    dropped_zero: int = 0
    dropped_duplicates: int = 0


class UnitEmbedding:
    """Row-normalized embedding with rank-ordered vocabulary.

    ``vectors`` is float32 storage; every statistic downstream upcasts to
    float64. Row order is frequency rank: ``rank(token)`` is the row index.
    """

    def __init__(self, tokens, vectors: np.ndarray):
        self.tokens = tuple(tokens)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.tokens):
            raise ConfigError("vectors must be one row per token")
        self.dim = int(self.vectors.shape[1])
        self._rank = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self._rank) != len(self.tokens):
            raise ConfigError("duplicate tokens in embedding")
        self._fingerprint: str | None = None

    @classmethod
    def build(cls, tokens, vectors) -> "UnitEmbedding":
        """Normalize arbitrary vectors and wrap them (synthetic-data helper)."""
        raw = np.asarray(vectors, dtype=np.float64)
        if raw.ndim != 2:
            raise ConfigError("vectors must be 2-d")
        norms = np.linalg.norm(raw, axis=1)
        if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
            raise ConfigError("vectors must be finite and nonzero")
        return cls(tokens, (raw / norms[:, None]).astype(np.float32))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token) -> bool:
        return token in self._rank

    def rank(self, token: str) -> int:
        """Frequency rank (row index) of a token."""
        try:
            return self._rank[token]
        except KeyError:
            raise UnknownToken(token) from None

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.rank(token)].astype(np.float64)

    def rows(self, tokens) -> np.ndarray:
        """Float64 matrix of the unit vectors for the given tokens, in order."""
        idx = [self.rank(t) for t in tokens]
        return self.vectors[idx].astype(np.float64)

    @property
    def fingerprint(self) -> str:
        """SHA-256 over dimension, vocabulary, and vector bytes."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(f"dim={self.dim};n={len(self.tokens)}\n".encode())
            step = 65536
            for start in range(0, len(self.tokens), step):
                h.update("\0".join(self.tokens[start:start + step]).encode())
                h.update(b"\1")
            h.update(np.ascontiguousarray(self.vectors))
            self._fingerprint = h.hexdigest()
        return self._fingerprint


def normalize(raw: RawEmbedding) -> UnitEmbedding:
    """Scale every row of a raw embedding to unit norm."""
    vectors = np.asarray(raw.vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0.0):
        raise ConfigError("embedding contains zero or non-finite vectors")
    return UnitEmbedding(raw.tokens, (vectors / norms[:, None]).astype(np.float32))


def _dedupe_and_drop_zeros(tokens: list[str], vectors: np.ndarray) -> RawEmbedding:
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    keep: list[int] = []
    seen: set[str] = set()
    dropped_zero = 0
    dropped_dup = 0
    for i, tok in enumerate(tokens):
        if norms[i] == 0.0:
            dropped_zero += 1
            continue
        if tok in seen:
            dropped_dup += 1
            continue
        seen.add(tok)
        keep.append(i)
    if dropped_zero or dropped_dup:
        log.warning("embedding.load kept=%d dropped_zero=%d dropped_duplicates=%d",
                    len(keep), dropped_zero, dropped_dup)
    else:
        log.info("embedding.load kept=%d dropped_zero=0 dropped_duplicates=0", len(keep))
    return RawEmbedding(
        dim=int(vectors.shape[1]),
        tokens=tuple(tokens[i] for i in keep),
        vectors=np.ascontiguousarray(vectors[keep]),
        dropped_zero=dropped_zero,
        dropped_duplicates=dropped_dup,
    )


class _ByteReader:
    """Chunked reader that tracks absolute file offsets for error messages."""

    def __init__(self, fh, offset: int, chunk: int = 1 << 20):
        self._fh = fh
        self._chunk = chunk
        self._buf = b""
        self._cur = 0
        self._base = offset  # absolute offset of _buf[0]

    @property
    def offset(self) -> int:
        return self._base + self._cur

    def _fill(self) -> bool:
        if self._cur:
            self._base += self._cur
            self._buf = self._buf[self._cur:]
            self._cur = 0
        more = self._fh.read(self._chunk)
        if not more:
            return False
        self._buf += more
        return True

    def read_exact(self, n: int) -> bytes | None:
        while len(self._buf) - self._cur < n:
            if not self._fill():
                return None
        out = self._buf[self._cur:self._cur + n]
        self._cur += n
        return out

    def read_token(self) -> bytes | None:
        """Bytes up to the next space, skipping leading record separators."""
        while True:
            while self._cur < len(self._buf) and self._buf[self._cur] in b"\r\n":
                self._cur += 1
            if self._cur < len(self._buf):
                break
            if not self._fill():
                return None
        while True:
            end = self._buf.find(b" ", self._cur)
            if end != -1:
                tok = self._buf[self._cur:end]
                self._cur = end + 1
                return tok
            if not self._fill():
                return None


def load_word2vec_binary(path: str | Path) -> RawEmbedding:
    """Load the classic binary format: ASCII "vocab dim" header, then
    records of token bytes, a space, dim little-endian float32, and an
    optional newline."""
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline(_HEADER_LIMIT)
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"{path}: malformed header {header!r}")
        try:
            vocab, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}: non-integer header {header!r}") from None
        if vocab < 0 or dim <= 0:
            raise FormatError(f"{path}: header declares vocab={vocab}, dim={dim}")
        reader = _ByteReader(fh, offset=len(header))
        tokens: list[str] = []
        vectors = np.empty((vocab, dim), dtype=np.float32)
        vec_bytes = 4 * dim
        for i in range(vocab):
            tok = reader.read_token()
            if tok is None:
                raise TruncatedFile(
                    f"{path}: file ended in record {i + 1} of {vocab}",
                    byte_offset=reader.offset)
            payload = reader.read_exact(vec_bytes)
            if payload is None:
                raise TruncatedFile(
                    f"{path}: vector {i + 1} of {vocab} incomplete",
                    byte_offset=reader.offset)
            tokens.append(tok.decode("utf-8", errors="replace"))
            vectors[i] = np.frombuffer(payload, dtype="<f4")
    return _dedupe_and_drop_zeros(tokens, vectors)


def load_text_vectors(path: str | Path, header: str = "auto") -> RawEmbedding:
    """Load whitespace-separated text vectors ("token v1 ... vd" per line).

    ``header`` is one of ``expected`` (first line must be "vocab dim"),
    ``absent`` (first line is data), or ``auto`` (a two-integer first line
    is treated as a header). Line numbers in errors are 1-based and count
    the header line.
    """
    if header not in ("expected", "absent", "auto"):
        raise ConfigError(f"header must be expected|absent|auto, got {header!r}")
    path = Path(path)
    tokens: list[str] = []
    rows: list[np.ndarray] = []
    declared: int | None = None
    dim: int | None = None
    pending_blank: int | None = None
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                # Tolerated only when nothing but EOF follows.
                if pending_blank is None:
                    pending_blank = lineno
                continue
            if pending_blank is not None:
                raise FormatError(f"{path}: blank line", line=pending_blank)
            if lineno == 1 and header != "absent":
                is_header = len(parts) == 2 and all(_is_int(p) for p in parts)
                if header == "expected" and not is_header:
                    raise FormatError(f"{path}: expected a 'vocab dim' header", line=1)
                if is_header:
                    declared, dim = int(parts[0]), int(parts[1])
                    if declared < 0 or dim <= 0:
                        raise FormatError(
                            f"{path}: header declares vocab={declared}, dim={dim}", line=1)
                    continue
            if dim is None:
                dim = len(parts) - 1
                if dim <= 0:
                    raise FormatError(f"{path}: no vector values", line=lineno)
            if len(parts) - 1 != dim:
                raise FormatError(
                    f"{path}: expected {dim} values, found {len(parts) - 1}", line=lineno)
            try:
                row = np.asarray(parts[1:], dtype=np.float64)
            except ValueError:
                raise FormatError(f"{path}: non-numeric vector value", line=lineno) from None
            tokens.append(parts[0])
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no vectors found")
    if declared is not None and declared != len(rows):
        raise FormatError(f"{path}: header declares {declared} vectors, found {len(rows)}")
    vectors = np.asarray(rows, dtype=np.float32)
    return _dedupe_and_drop_zeros(tokens, vectors)


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def save_word2vec_binary(path: str | Path, tokens, vectors) -> None:
    """Write the classic binary format (newline-terminated records)."""
    vectors = np.asarray(vectors, dtype="<f4")
    tokens = list(tokens)
    if vectors.ndim != 2 or len(tokens) != vectors.shape[0]:
        raise ConfigError("tokens and vectors disagree")
    with open(path, "wb") as fh:
        fh.write(f"{len(tokens)} {vectors.shape[1]}\n".encode())
        for tok, row in zip(tokens, vectors):
            if " " in tok or "\n" in tok:
                raise ConfigError(f"token not writable in binary format: {tok!r}")
            fh.write(tok.encode("utf-8") + b" ")
            fh.write(row.tobytes())
            fh.write(b"\n")


def save_text_vectors(path: str | Path, tokens, vectors, header: bool = True) -> None:
    """Write text vectors, one token per line, full float precision."""
    vectors = np.asarray(vectors, dtype=np.float32)
    tokens = list(tokens)
    if vectors.ndim != 2 or len(tokens) != vectors.shape[0]:
        raise ConfigError("tokens and vectors disagree")
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(tokens)} {vectors.shape[1]}\n")
        for tok, row in zip(tokens, vectors):
            if " " in tok or "\n" in tok:
                raise ConfigError(f"token not writable in text format: {tok!r}")
            fh.write(tok + " " + " ".join(repr(float(x)) for x in row) + "\n")


@dataclass(frozen=True, eq=False)
class WordPool:
    """The M most frequent all-lowercase words, in rank order.

    ``tokens`` are the vocabulary entries (usable for vector lookup);
    ``words`` are their display forms after underscore-to-space mapping.
    """

    tokens: tuple[str, ...]
    words: tuple[str, ...]
    indices: np.ndarray  # rows into the source embedding
    pool_mean: np.ndarray  # float64 mean of member unit vectors
    requested: int

    def __len__(self) -> int:
        return len(self.tokens)


def frequent_lowercase_words(emb: UnitEmbedding, m: int,
                             underscore_as_space: bool = True) -> WordPool:
    """Select the word pool: scan the vocabulary in rank order and keep a
    token iff its display form contains only a-z and spaces AND no
    case-folded-equal variant occurred at a smaller rank. Stops after ``m``
    keepers; if the vocabulary runs out first, all survivors are kept and a
    warning is logged.
    """
    if m <= 0:
        raise ConfigError(f"pool size must be positive, got {m}")
    kept_tokens: list[str] = []
    kept_words: list[str] = []
    kept_idx: list[int] = []
    seen_keys: set[str] = set()
    for rank, token in enumerate(emb.tokens):
        display = token.replace("_", " ") if underscore_as_space else token
        key = display.casefold()
        fresh = key not in seen_keys
        seen_keys.add(key)
        if not fresh:
            continue
        if not display.strip(" "):
            continue
        if not all(c == " " or "a" <= c <= "z" for c in display):
            continue
        kept_tokens.append(token)
        kept_words.append(display)
        kept_idx.append(rank)
        if len(kept_tokens) == m:
            break
    if len(kept_tokens) < m:
        log.warning("pool.select kept=%d requested=%d (vocabulary exhausted)",
                    len(kept_tokens), m)
    else:
        log.info("pool.select kept=%d requested=%d", len(kept_tokens), m)
    if not kept_tokens:
        raise ConfigError("no vocabulary token passes the lowercase filter")
    indices = np.asarray(kept_idx, dtype=np.intp)
    pool_mean = emb.vectors[indices].astype(np.float64).mean(axis=0)
    return WordPool(tuple(kept_tokens), tuple(kept_words), indices, pool_mean, m)
