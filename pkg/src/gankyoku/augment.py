"""Noise-based corpus augmentation and the 4-way noise-class labeling.

Each non-framing position is multiplied by a uniform draw from the open
interval (1-N, 1+N) and squashed through tanh, so perturbed values stay in
(-1, 1), zeros stay zero (breath positions are fixed points), and signs are
preserved.  Start/end positions, including the end padding, pass through
untouched.  Class 0 is reserved for unaugmented real pieces; classes 1..3
cover increasing noise factors.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, EmptyCorpus, Piece, encode_piece
from .vocab import END_LABEL, START_LABEL

CLASS_REAL = 0
NUM_CLASSES = 4
CLASS_1_MAX = 8.0 / 25.0
CLASS_3_MIN = 17.0 / 25.0


@dataclass
class LabeledSample:
    seq: np.ndarray
    label: int


def class_of_noise(n_factor: float) -> int:
    """Noise class for a factor N in (0, 1].

    1 for N <= 8/25, 2 for 8/25 < N < 17/25, 3 for N >= 17/25.  The shared
    boundary 8/25 goes to class 1.  Never returns the real-piece class 0.
    """
    if not 0.0 < n_factor <= 1.0:
        raise ValueError(f"noise factor must be in (0, 1], got {n_factor}")
    if n_factor <= CLASS_1_MAX:
        return 1
    if n_factor < CLASS_3_MIN:
        return 2
    return 3


def _open_unit_uniform(rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform draws in the open interval (0, 1); exact zeros are redrawn."""
    u = rng.random(count)
    while True:
        zero = u == 0.0
        if not zero.any():
            return u
        u[zero] = rng.random(int(zero.sum()))


def augment_sequence(
    seq: np.ndarray, piece: Piece, n_factor: float, rng: np.random.Generator
) -> np.ndarray:
    """One noisy variant of an encoded piece.

    seq must be the encoding of piece (same length framing).  Positions whose
    source token is start or end, and all end padding, are copied unchanged;
    position i elsewhere becomes tanh(seq[i] * r_i) with r_i ~ U(1-N, 1+N).
    """
    if not 0.0 < n_factor <= 1.0:
        raise ValueError(f"noise factor must be in (0, 1], got {n_factor}")
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 1 or len(piece) > seq.size:
        raise ValueError("sequence does not match the piece")
    if not np.array_equal(seq, encode_piece(piece, seq.size)):
        raise ValueError("sequence is not the encoding of the given piece")
    mutable = np.zeros(seq.size, dtype=bool)
    mutable[: len(piece)] = (piece.labels != START_LABEL) & (piece.labels != END_LABEL)
    out = seq.copy()
    u = _open_unit_uniform(rng, int(mutable.sum()))
    multipliers = (1.0 - n_factor) + 2.0 * n_factor * u
    out[mutable] = np.tanh(seq[mutable] * multipliers)
    return out


def _draw_noise_factor(rng: np.random.Generator, noise_class: int) -> float:
    intervals = {1: (0.0, CLASS_1_MAX), 2: (CLASS_1_MAX, CLASS_3_MIN), 3: (CLASS_3_MIN, 1.0)}
    lo, hi = intervals[noise_class]
    n = lo + (hi - lo) * float(_open_unit_uniform(rng, 1)[0])
    assert class_of_noise(n) == noise_class
    return n


def build_augmented_dataset(
    corpus: Corpus,
    per_class_count: int = 10,
    rng: np.random.Generator | None = None,
    seq_len: int = 576,
    max_workers: int = 1,
) -> list:
    """One class-0 sample per real piece plus per_class_count noisy variants
    per piece for each of classes 1..3.

    Each synthetic sample draws from its own child stream spawned off rng, so
    the result is independent of worker scheduling.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("cannot augment an empty corpus")
    if per_class_count < 0:
        raise ValueError("per_class_count must be non-negative")
    if rng is None:
        rng = np.random.default_rng(0)

    encoded = [encode_piece(p, seq_len) for p in corpus]
    specs = [
        (i, cls)
        for i in range(len(corpus))
        for cls in (1, 2, 3)
        for _ in range(per_class_count)
    ]
    streams = rng.spawn(len(specs)) if specs else []

    def synthesize(k: int) -> LabeledSample:
        i, cls = specs[k]
        stream = streams[k]
        n = _draw_noise_factor(stream, cls)
        return LabeledSample(augment_sequence(encoded[i], corpus.pieces[i], n, stream), cls)

    if max_workers and max_workers > 1 and specs:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            synthetic = list(pool.map(synthesize, range(len(specs))))
    else:
        synthetic = [synthesize(k) for k in range(len(specs))]

    samples = []
    by_piece = {i: [] for i in range(len(corpus))}
    for (i, _), sample in zip(specs, synthetic):
        by_piece[i].append(sample)
    for i in range(len(corpus)):
        samples.append(LabeledSample(encoded[i], CLASS_REAL))
        samples.extend(by_piece[i])
    return samples
