"""Tokenization, embedding/dataset loading, and fixed-length encoding."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import make_rng

CLASSES = (1, 2, 3)
PUNCT = set(".,!?;:\"'()")
URL_PREFIXES = ("http://", "https://")
OOV_SEED = 0


class DataFormatError(ValueError):
    """Malformed dataset or embedding file; carries the path and line number."""

    def __init__(self, message, path=None, line=None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class PipelineConfig:
    max_len: int = 47
    lowercase: bool = True

    def __post_init__(self):
        if self.max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")


@dataclass(frozen=True)
class LabeledExample:
    id: str
    label: int | None
    text: str


@dataclass(frozen=True)
class EncodedExample:
    id: str
    label: int | None
    matrix: np.ndarray  # (max_len, dim)


@dataclass(eq=False)
class EmbeddingTable:
    dim: int
    entries: dict = field(default_factory=dict)
    oov_vector: np.ndarray = None
    pad_vector: np.ndarray = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError(f"embedding dim must be positive, got {self.dim}")
        for word, vec in self.entries.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {word!r} has shape {vec.shape}, expected ({self.dim},)")
        if self.oov_vector is None:
            self.oov_vector = oov_vector(self.dim)
        if self.pad_vector is None:
            self.pad_vector = np.zeros(self.dim, dtype=np.float32)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, token):
        return token in self.entries

    def lookup(self, token):
        return self.entries.get(token, self.oov_vector)


def oov_vector(dim, seed=OOV_SEED):
    """Fixed pseudo-random unit vector for unknown tokens."""
    v = make_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    return v.astype(np.float32)


def _split_punct(chunk):
    lead = []
    while chunk and chunk[0] in PUNCT:
        lead.append(chunk[0])
        chunk = chunk[1:]
    trail = []
    while chunk and chunk[-1] in PUNCT:
        trail.append(chunk[-1])
        chunk = chunk[:-1]
    return lead + ([chunk] if chunk else []) + trail[::-1]


def tokenize(text, config=PipelineConfig()):
    """Split on whitespace and detach leading/trailing sentence punctuation.

    URLs are kept verbatim. Hashtags and @-mentions stay single tokens (the
    ``#``/``@`` is never split off). Stopwords are kept.

    >>> tokenize("I just took an Advil!")
    ['i', 'just', 'took', 'an', 'advil', '!']
    """
    if config.lowercase:
        text = text.lower()
    tokens = []
    for chunk in text.split():
        if chunk.startswith(URL_PREFIXES):
            tokens.append(chunk)
        else:
            tokens.extend(_split_punct(chunk))
    return tokens


def load_embeddings(path):
    """Read a text embedding file (``<vocab_size> <dim>`` header, then one word per line)."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 2:
            raise DataFormatError(f"line 1: malformed header {header.strip()!r}, expected '<vocab_size> <dim>'", path, 1)
        try:
            vocab_size, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataFormatError(f"line 1: malformed header {header.strip()!r}", path, 1) from None
        if vocab_size < 0 or dim <= 0:
            raise DataFormatError(f"line 1: invalid header values {vocab_size} {dim}", path, 1)

        entries = {}
        lineno = 1
        for lineno, line in enumerate(f, start=2):
            fields = line.split()
            if not fields:
                raise DataFormatError(f"line {lineno}: empty line", path, lineno)
            word, values = fields[0], fields[1:]
            if len(values) != dim:
                raise DataFormatError(
                    f"line {lineno}: word {word!r} has {len(values)} values, expected {dim}", path, lineno
                )
            if word in entries:
                raise DataFormatError(f"line {lineno}: duplicate word {word!r}", path, lineno)
            try:
                entries[word] = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError:
                raise DataFormatError(f"line {lineno}: non-numeric value for {word!r}", path, lineno) from None
            if len(entries) > vocab_size:
                raise DataFormatError(f"line {lineno}: more rows than the declared {vocab_size}", path, lineno)
    if len(entries) != vocab_size:
        raise DataFormatError(f"header declares {vocab_size} words but file has {len(entries)}", path, lineno)
    return EmbeddingTable(dim=dim, entries=entries)


def parse_label(raw):
    if raw in ("1", "2", "3"):
        return int(raw)
    return None


def load_dataset(path, require_labels=True):
    """Read ``id<TAB>label<TAB>text`` lines; blank lines are skipped.

    With ``require_labels=False`` an out-of-domain label column is accepted as
    a placeholder and stored as ``None``.
    """
    path = Path(path)
    examples = []
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataFormatError(f"expected 3 tab-separated fields, got {len(fields)} at line {lineno}", path, lineno)
            ex_id, raw_label, text = fields
            label = parse_label(raw_label)
            if label is None and require_labels:
                raise DataFormatError(f"invalid label {raw_label} at line {lineno}", path, lineno)
            examples.append(LabeledExample(ex_id, label, text))
    return examples


def dump_dataset(examples, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        for ex in examples:
            f.write(f"{ex.id}\t{ex.label}\t{ex.text}\n")


def class_counts(examples):
    counts = {c: 0 for c in CLASSES}
    for ex in examples:
        counts[ex.label] += 1
    return counts


def encode(example, table, config=PipelineConfig()):
    tokens = tokenize(example.text, config)[: config.max_len]
    matrix = np.zeros((config.max_len, table.dim), dtype=np.float32)
    matrix[:] = table.pad_vector
    for t, token in enumerate(tokens):
        matrix[t] = table.lookup(token)
    return EncodedExample(example.id, example.label, matrix)


def encode_all(examples, table, config=PipelineConfig()):
    """Stack encodings into an (n, max_len, dim) array plus a label vector (0 for unlabeled)."""
    X = np.zeros((len(examples), config.max_len, table.dim), dtype=np.float32)
    y = np.zeros(len(examples), dtype=np.int64)
    for i, ex in enumerate(examples):
        X[i] = encode(ex, table, config).matrix
        y[i] = ex.label or 0
    return X, y
