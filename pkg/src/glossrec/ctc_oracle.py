"""Brute-force references for the CTC dynamic program.

Everything here works by exhaustive path enumeration and is deliberately
independent of the trellis code in ctc.py, so the two can check each other.
"""

from __future__ import annotations

import itertools

import numpy as np

from .ctc import BLANK_ID, ExtendedVocabulary, collapse_path, validate_logits
from .errors import OracleLimitError

MAX_ORACLE_FRAMES = 12
MAX_ORACLE_PATHS = 10**8


def _guard(num_classes: int, T: int) -> None:
    if T > MAX_ORACLE_FRAMES or num_classes**T > MAX_ORACLE_PATHS:
        raise OracleLimitError(
            f"enumeration of {num_classes}^{T} paths exceeds oracle bounds"
        )


def feasible_paths_oracle(
    T: int, labeling: list[int], vocab: ExtendedVocabulary
) -> set[tuple[int, ...]]:
    """All length-T paths over the extended vocabulary that collapse to the labeling."""
    _guard(vocab.num_classes, T)
    target = list(labeling)
    return {
        pi
        for pi in itertools.product(range(vocab.num_classes), repeat=T)
        if collapse_path(pi) == target
    }


def oracle_path_probability(logits: np.ndarray, labeling: list[int]) -> float:
    """Sum of path probabilities by full enumeration (vectorized, no trellis).

    Run merging and blank removal are done with array ops instead of the
    per-path collapse loop purely for speed; the semantics are identical.
    """
    logits = validate_logits(logits)
    T, K = logits.shape
    _guard(K, T)

    paths = np.array(list(itertools.product(range(K), repeat=T)), dtype=np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted) / np.exp(shifted).sum(axis=1, keepdims=True)
    path_probs = probs[np.arange(T), paths].prod(axis=1)

    # collapse every row: keep first-of-run positions, then drop blanks
    keep = np.ones_like(paths, dtype=bool)
    keep[:, 1:] = paths[:, 1:] != paths[:, :-1]
    keep &= paths != BLANK_ID

    target = np.asarray(labeling, dtype=np.int64)
    lengths = keep.sum(axis=1)
    match = lengths == len(target)
    if len(target) > 0 and match.any():
        rows, cols = np.nonzero(keep)
        slot = keep.cumsum(axis=1) - 1
        width = int(max(lengths.max(), len(target)))
        gathered = np.full((paths.shape[0], width), -1, dtype=np.int64)
        gathered[rows, slot[rows, cols]] = paths[rows, cols]
        match &= (gathered[:, : len(target)] == target).all(axis=1)

    return float(path_probs[match].sum())
