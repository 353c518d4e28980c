"""Piece files, framing validation, fixed-length continuous encoding.

A piece file is plain ASCII CSV: token names separated by commas and/or line
breaks, no header, no quoting.  Valid pieces start with the start token, end
with exactly one end token, and hold at most 576 labels.  Encoding maps each
label to its grid value and end-pads with 1.0 up to the model sequence length.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_for
from .vocab import END_LABEL, START_LABEL, BREATH_LABEL, Vocabulary, tokens_to_values

MAX_PIECE_LEN = 576


class CorpusError(ValueError):
    """Base for piece/corpus validation failures."""

    def __init__(self, message: str, source_name: str = ""):
        self.source_name = source_name
        super().__init__(f"{source_name}: {message}" if source_name else message)


class UnknownToken(CorpusError):
    def __init__(self, name: str, position: int, source_name: str = ""):
        self.token_name = name
        self.position = position
        super().__init__(f"unknown token {name!r} at position {position}", source_name)


class EmptyPiece(CorpusError):
    pass


class MissingStart(CorpusError):
    pass


class MissingEnd(CorpusError):
    pass


class ExtraEnd(CorpusError):
    pass


class TooLong(CorpusError):
    pass


class EmptyCorpus(CorpusError):
    pass


@dataclass
class Piece:
    """An ordered label sequence.  Loader-produced pieces satisfy the framing
    invariants; sampler output may not (the linter reports on it instead)."""

    labels: np.ndarray
    source_name: str = ""

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)

    def __len__(self):
        return int(self.labels.size)


@dataclass
class Corpus:
    pieces: list = field(default_factory=list)

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)


def parse_labels(text: str, vocab: Vocabulary, source_name: str = "") -> np.ndarray:
    """Token names -> labels, no framing checks.  Used by the lenient paths
    (lint/stats over generated pieces)."""
    names = []
    for chunk in text.replace("\r", "\n").split("\n"):
        names.extend(part.strip() for part in chunk.split(","))
    names = [n for n in names if n]
    labels = np.empty(len(names), dtype=np.int64)
    for i, n in enumerate(names):
        if n not in vocab:
            raise UnknownToken(n, i, source_name)
        labels[i] = vocab.label(n)
    return labels


def validate_framing(labels: np.ndarray, source_name: str = "") -> None:
    if labels.size == 0:
        raise EmptyPiece("piece holds no tokens", source_name)
    if labels.size > MAX_PIECE_LEN:
        raise TooLong(f"{labels.size} tokens exceeds the maximum of {MAX_PIECE_LEN}", source_name)
    if labels[0] != START_LABEL:
        raise MissingStart("first token is not the start token", source_name)
    if labels[-1] != END_LABEL:
        raise MissingEnd("last token is not the end token", source_name)
    if np.any(labels[:-1] == END_LABEL):
        raise ExtraEnd("end token occurs before the final position", source_name)


def load_piece(text: str, vocab: Vocabulary, source_name: str = "") -> Piece:
    """Parse and validate one piece file's content."""
    labels = parse_labels(text, vocab, source_name)
    validate_framing(labels, source_name)
    return Piece(labels, source_name)


def encode_piece(piece: Piece, seq_len: int = MAX_PIECE_LEN) -> np.ndarray:
    """Grid values of the piece, end-padded with 1.0 to seq_len entries."""
    n = len(piece)
    if n > seq_len:
        raise TooLong(f"{n} tokens exceeds sequence length {seq_len}", piece.source_name)
    out = np.ones(seq_len, dtype=np.float64)
    out[:n] = tokens_to_values(piece.labels)
    return out


def decode_values(values, vocab: Vocabulary, source_name: str = "") -> Piece:
    """Round a continuous sequence to labels and strip trailing end padding."""
    from .vocab import values_to_tokens

    labels = values_to_tokens(values)
    end = labels.size
    while end > 1 and labels[end - 1] == END_LABEL and labels[end - 2] == END_LABEL:
        end -= 1
    return Piece(labels[:end], source_name)


def load_corpus(files, vocab: Vocabulary, max_workers: int = 1) -> Corpus:
    """Validate a set of (name, content) piece files into a Corpus.

    Accepts a mapping or an iterable of pairs; pieces come out sorted by file
    name regardless of input order.  The first invalid file fails the load
    with its name attached.
    """
    if hasattr(files, "items"):
        listing = sorted(files.items())
    else:
        listing = sorted(files)
    if not listing:
        raise EmptyCorpus("no piece files supplied")
    names = [name for name, _ in listing]
    if len(set(names)) != len(names):
        raise CorpusError("duplicate piece file names")
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            pieces = list(pool.map(lambda nc: load_piece(nc[1], vocab, nc[0]), listing))
    else:
        pieces = [load_piece(content, vocab, name) for name, content in listing]
    return Corpus(pieces)


def piece_to_csv(piece: Piece, vocab: Vocabulary) -> str:
    """Render a piece in the corpus file format, one token per line."""
    return "\n".join(vocab.name(int(l)) for l in piece.labels) + "\n"


def make_fixture_corpus(seed: int, count: int, length_range=(67, MAX_PIECE_LEN)) -> Corpus:
    """Deterministic synthetic pieces so tests run without the real dataset.

    Pieces are framed start..end with a breath token every 4-12 labels and
    uniformly random pitch/technique tokens in between.
    """
    lo, hi = length_range
    if not (3 <= lo <= hi <= MAX_PIECE_LEN):
        raise ValueError(f"length range must satisfy 3 <= min <= max <= {MAX_PIECE_LEN}")
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = rng_for(seed, "corpus.fixtures")
    interior_choices = np.array(
        [l for l in range(1, END_LABEL) if l != BREATH_LABEL], dtype=np.int64
    )
    pieces = []
    for i in range(count):
        n = int(rng.integers(lo, hi + 1))
        labels = np.empty(n, dtype=np.int64)
        labels[0] = START_LABEL
        labels[-1] = END_LABEL
        gap = int(rng.integers(4, 13))
        for pos in range(1, n - 1):
            if gap == 0:
                labels[pos] = BREATH_LABEL
                gap = int(rng.integers(4, 13))
            else:
                labels[pos] = rng.choice(interior_choices)
                gap -= 1
        pieces.append(Piece(labels, f"fixture_{i:03d}"))
    return Corpus(pieces)
