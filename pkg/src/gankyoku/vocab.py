"""Token inventory and the affine map between integer labels and grid values.

45 tokens carry integer labels 0..44.  Label 22 marks a breath; 0 and 44 are
the start/end framing tokens.  The continuous encoding of label L is
(L - 22) / 22, so labels 0/22/44 land exactly on -1/0/1 and the grid spacing
is 1/22.
"""

from importlib import resources

import numpy as np

VOCAB_SIZE = 45
START_LABEL = 0
BREATH_LABEL = 22
END_LABEL = 44
GRID_STEP = 1.0 / 22.0


class VocabularyError(ValueError):
    """Malformed vocabulary manifest."""


class Vocabulary:
    """Immutable mapping between the 45 token names and their labels."""

    def __init__(self, names):
        names = tuple(names)
        if len(names) != VOCAB_SIZE:
            raise VocabularyError(f"expected {VOCAB_SIZE} tokens, got {len(names)}")
        seen = set()
        for label, name in enumerate(names):
            if not name or not name.isascii():
                raise VocabularyError(f"label {label}: token name must be non-empty ASCII")
            if "," in name or any(ch.isspace() for ch in name):
                raise VocabularyError(f"label {label}: token name {name!r} contains a comma or whitespace")
            if name in seen:
                raise VocabularyError(f"duplicate token name {name!r}")
            seen.add(name)
        self._names = names
        self._labels = {name: label for label, name in enumerate(names)}

    def __len__(self):
        return VOCAB_SIZE

    def name(self, label: int) -> str:
        if not 0 <= label < VOCAB_SIZE:
            raise VocabularyError(f"label {label} out of range 0..{VOCAB_SIZE - 1}")
        return self._names[label]

    def label(self, name: str) -> int:
        try:
            return self._labels[name]
        except KeyError:
            raise VocabularyError(f"unknown token name {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._labels

    @property
    def names(self) -> tuple:
        return self._names

    @property
    def start_name(self) -> str:
        return self._names[START_LABEL]

    @property
    def breath_name(self) -> str:
        return self._names[BREATH_LABEL]

    @property
    def end_name(self) -> str:
        return self._names[END_LABEL]


def load_vocabulary(manifest_text: str) -> Vocabulary:
    """Parse a manifest of exactly 45 "label,token_name" lines.

    Raises VocabularyError on duplicate labels or names, out-of-range or
    non-contiguous labels, a wrong line count, or malformed lines.
    """
    entries = {}
    for lineno, raw in enumerate(manifest_text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        head, sep, name = line.partition(",")
        if not sep:
            raise VocabularyError(f"line {lineno}: expected 'label,token_name', got {line!r}")
        try:
            label = int(head)
        except ValueError:
            raise VocabularyError(f"line {lineno}: bad label {head!r}") from None
        if not 0 <= label < VOCAB_SIZE:
            raise VocabularyError(f"line {lineno}: label {label} out of range 0..{VOCAB_SIZE - 1}")
        if label in entries:
            raise VocabularyError(f"line {lineno}: duplicate label {label}")
        entries[label] = name.strip()
    if len(entries) != VOCAB_SIZE:
        raise VocabularyError(f"expected {VOCAB_SIZE} manifest lines, got {len(entries)}")
    return Vocabulary(entries[label] for label in range(VOCAB_SIZE))


def default_vocabulary() -> Vocabulary:
    """The manifest shipped with the package (romanized Kinko-style names)."""
    text = resources.files("gankyoku.data").joinpath("default_vocab.csv").read_text("utf-8")
    return load_vocabulary(text)


def token_to_value(label: int) -> float:
    """Grid value of a label: (label - 22) / 22."""
    if not 0 <= label < VOCAB_SIZE:
        raise VocabularyError(f"label {label} out of range 0..{VOCAB_SIZE - 1}")
    return (label - BREATH_LABEL) / BREATH_LABEL


def tokens_to_values(labels) -> np.ndarray:
    """Vectorized token_to_value."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= VOCAB_SIZE):
        raise VocabularyError("label out of range 0..44")
    return (labels - BREATH_LABEL) / float(BREATH_LABEL)


def values_to_tokens(values) -> np.ndarray:
    """Vectorized value_to_token: clamp to [-1, 1], round to the nearest label.

    Exact halfway values resolve toward label 22 (the breath-centered side).
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    x = np.clip(values, -1.0, 1.0) * BREATH_LABEL + BREATH_LABEL
    lo = np.floor(x)
    frac = x - lo
    ties_up = lo + 0.5 < BREATH_LABEL  # tie between lo and lo+1: pick the one nearer 22
    up = (frac > 0.5) | ((frac == 0.5) & ties_up)
    return (lo + up).astype(np.int64)


def value_to_token(value: float) -> int:
    """Nearest label for one continuous value."""
    return int(values_to_tokens(np.array([value]))[0])


def detokenize(labels, vocab: Vocabulary) -> list:
    """Label sequence back to human-readable token names."""
    return [vocab.name(int(label)) for label in labels]
