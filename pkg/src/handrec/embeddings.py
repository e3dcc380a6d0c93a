"""Word embeddings composed from subword character n-grams.

Supplies the supervision target E for the semantic head: a word is wrapped in
boundary markers, split into contiguous code-point n-grams of bounded length,
and represented as the mean of its own vector and the vectors of its known
subwords. A small skip-gram trainer with negative sampling produces desk-scale
tables; the loader reads standard text word-vector files so pre-trained models
can be dropped in.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, DataError, InvalidInputError

BOUNDARY_START = "<"
BOUNDARY_END = ">"


@dataclass(frozen=True)
class SubwordConfig:
    """Bounds on subword n-gram length, and whether words are boundary-wrapped."""

    l_min: int = 3
    l_max: int = 6
    use_boundaries: bool = True

    def __post_init__(self):
        if not (1 <= self.l_min <= self.l_max):
            raise InvalidInputError(
                f"require 1 <= l_min <= l_max, got l_min={self.l_min} l_max={self.l_max}"
            )


def extract_subwords(word: str, config: SubwordConfig) -> list[str]:
    """All contiguous code-point n-grams of the (wrapped) word.

    Enumeration order is shorter lengths first, left to right within each
    length; duplicate n-grams are kept. Lengths that exceed the wrapped word
    yield nothing.
    """
    if not word:
        raise InvalidInputError("cannot extract subwords of an empty word")
    wrapped = word
    if config.use_boundaries:
        wrapped = BOUNDARY_START + word + BOUNDARY_END
    chars = list(wrapped)  # code points, not bytes
    n = len(chars)
    out = []
    for k in range(config.l_min, min(config.l_max, n) + 1):
        for i in range(n - k + 1):
            out.append("".join(chars[i : i + k]))
    return out


@dataclass
class EmbeddingTable:
    """Word and subword vectors sharing one dimensionality."""

    dimension: int
    word_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    subword_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    subword_config: SubwordConfig = field(default_factory=SubwordConfig)

    def __len__(self) -> int:
        return len(self.word_vectors)


def embed_word(word: str, table: EmbeddingTable) -> np.ndarray:
    """Compose the embedding E of a word from the table.

    E is the mean of the word's own vector (when stored) and the vectors of
    all distinct known subwords of the word. A word with no stored vector and
    no known subwords is out of coverage.
    """
    if not word:
        raise InvalidInputError("cannot embed an empty word")
    if not table.word_vectors and not table.subword_vectors:
        raise CoverageError("embedding table is empty")
    parts = []
    direct = table.word_vectors.get(word)
    if direct is not None:
        parts.append(direct)
    if table.subword_vectors:
        seen = set()
        for sub in extract_subwords(word, table.subword_config):
            if sub in seen:
                continue
            seen.add(sub)
            vec = table.subword_vectors.get(sub)
            if vec is not None:
                parts.append(vec)
    if not parts:
        raise CoverageError(f"word {word!r} has no word vector and no known subwords")
    return np.mean(np.stack(parts), axis=0)


@dataclass
class ToyCorpus:
    """Tokenized sentences with a symmetric context window."""

    sentences: list[list[str]]
    context_window: int = 2

    def __post_init__(self):
        if self.context_window < 1:
            raise InvalidInputError("context window must be >= 1")
        for sent in self.sentences:
            for tok in sent:
                if not tok:
                    raise InvalidInputError("corpus contains an empty token")

    @staticmethod
    def from_text(path: str, context_window: int = 2) -> "ToyCorpus":
        sentences = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                toks = line.split()
                if toks:
                    sentences.append(toks)
        return ToyCorpus(sentences, context_window)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def train_skipgram(
    corpus: ToyCorpus,
    config: SubwordConfig = SubwordConfig(),
    dim: int = 32,
    epochs: int = 5,
    seed: int = 0,
    learning_rate: float = 0.05,
    negatives: int = 5,
) -> EmbeddingTable:
    """Skip-gram with negative sampling over subword-composed center vectors.

    For every (center, context) pair within the window, the center word is
    represented by the mean of its word vector and its subword vectors; all of
    them receive gradient. Context words use a separate output matrix. Noise
    words are drawn from the unigram distribution raised to 0.75.
    Single-threaded and fully determined by the seed.
    """
    counts: dict[str, int] = {}
    for sent in corpus.sentences:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
    vocab = sorted(counts)
    if len(vocab) < 2:
        raise DataError(f"corpus has {len(vocab)} distinct tokens, need at least 2")
    word_index = {w: i for i, w in enumerate(vocab)}

    subwords = sorted({s for w in vocab for s in extract_subwords(w, config)})
    sub_index = {s: i for i, s in enumerate(subwords)}
    # distinct subword rows per word, fixed once
    word_subrows = {
        w: sorted({sub_index[s] for s in extract_subwords(w, config)}) for w in vocab
    }

    rng = np.random.default_rng(seed)
    bound = 0.5 / dim
    w_in = rng.uniform(-bound, bound, size=(len(vocab), dim))
    s_in = rng.uniform(-bound, bound, size=(len(subwords), dim)) if subwords else np.zeros((0, dim))
    w_out = np.zeros((len(vocab), dim))

    freq = np.array([counts[w] for w in vocab], dtype=np.float64) ** 0.75
    noise = freq / freq.sum()

    window = corpus.context_window
    for _ in range(epochs):
        for sent in corpus.sentences:
            ids = [word_index[t] for t in sent]
            for pos, center in enumerate(ids):
                rows = word_subrows[vocab[center]]
                pieces = 1 + len(rows)
                center_vec = w_in[center].copy()
                if rows:
                    center_vec = (center_vec + s_in[rows].sum(axis=0)) / pieces
                lo = max(0, pos - window)
                hi = min(len(ids), pos + window + 1)
                grad_center = np.zeros(dim)
                for ctx_pos in range(lo, hi):
                    if ctx_pos == pos:
                        continue
                    targets = [ids[ctx_pos]]
                    labels = [1.0]
                    for neg in rng.choice(len(vocab), size=negatives, p=noise):
                        if neg != ids[ctx_pos]:
                            targets.append(int(neg))
                            labels.append(0.0)
                    for tgt, label in zip(targets, labels):
                        score = _sigmoid(center_vec @ w_out[tgt])
                        g = (score - label) * learning_rate
                        grad_center += g * w_out[tgt]
                        w_out[tgt] -= g * center_vec
                # mean composition spreads the center gradient evenly
                grad_center /= pieces
                w_in[center] -= grad_center
                if rows:
                    s_in[rows] -= grad_center

    table = EmbeddingTable(dimension=dim, subword_config=config)
    for w, i in word_index.items():
        table.word_vectors[w] = w_in[i].astype(np.float32)
    for s, i in sub_index.items():
        table.subword_vectors[s] = s_in[i].astype(np.float32)
    return table


def _parse_vector_file(path: str) -> tuple[int, int, list[tuple[str, np.ndarray]]]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise DataError(f"{path}:1: header must be 'count dimension', got {header.strip()!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}:1: non-integer header field in {header.strip()!r}") from None
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            token = fields[0]
            if len(fields) - 1 != dim:
                raise DataError(
                    f"{path}:{lineno}: expected {dim} floats for {token!r}, got {len(fields) - 1}"
                )
            try:
                vec = np.array([float(x) for x in fields[1:]], dtype=np.float32)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector component") from None
            entries.append((token, vec))
    if len(entries) != count:
        raise DataError(f"{path}: header promises {count} vectors, file has {len(entries)}")
    return count, dim, entries


def load_embedding_file(path: str) -> EmbeddingTable:
    """Read a text word-vector file (header 'count dim', then 'token v1 .. vD').

    If sidecar files written by ``save_embedding_file`` exist next to it
    (``<path>.subwords`` with subword vectors, ``<path>.meta.json`` with the
    subword configuration), they are loaded too; plain pre-trained files work
    without them.
    """
    if not os.path.exists(path):
        raise DataError(f"embedding file not found: {path}")
    _, dim, entries = _parse_vector_file(path)
    table = EmbeddingTable(dimension=dim)
    for token, vec in entries:
        table.word_vectors[token] = vec

    sub_path = path + ".subwords"
    if os.path.exists(sub_path):
        _, sub_dim, sub_entries = _parse_vector_file(sub_path)
        if sub_dim != dim:
            raise DataError(f"{sub_path}: dimension {sub_dim} != word-vector dimension {dim}")
        for token, vec in sub_entries:
            table.subword_vectors[token] = vec

    meta_path = path + ".meta.json"
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        table.subword_config = SubwordConfig(
            l_min=meta["l_min"], l_max=meta["l_max"], use_boundaries=meta["use_boundaries"]
        )
    return table


def _write_vector_file(path: str, dim: int, items: list[tuple[str, np.ndarray]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(items)} {dim}\n")
        for token, vec in items:
            fh.write(token + " " + " ".join(f"{x:.8g}" for x in vec) + "\n")


def save_embedding_file(table: EmbeddingTable, path: str) -> None:
    """Write the table in the text word-vector format (plus sidecars for subwords)."""
    _write_vector_file(path, table.dimension, sorted(table.word_vectors.items()))
    if table.subword_vectors:
        _write_vector_file(path + ".subwords", table.dimension, sorted(table.subword_vectors.items()))
        with open(path + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "l_min": table.subword_config.l_min,
                    "l_max": table.subword_config.l_max,
                    "use_boundaries": table.subword_config.use_boundaries,
                },
                fh,
            )
            fh.write("\n")
