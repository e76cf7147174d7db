"""Connectionist temporal classification over an extended gloss vocabulary.

The extended vocabulary is the gloss set plus one blank class at id 0.
A path is a frame-level id sequence; the collapse function merges runs of
identical ids and then deletes blanks, and the loss is the negative log of
the total probability of every path that collapses to the target labeling.

All dynamic programming runs in log space with -inf as the log-zero
sentinel (np.logaddexp treats it absorbingly), in float64 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleAlignmentError, InvalidInputError

BLANK_ID = 0

LOG_ZERO = -np.inf


@dataclass(frozen=True)
class ExtendedVocabulary:
    """Gloss symbols with stable ids: blank is 0, glosses are 1..len(glosses)."""

    glosses: tuple[str, ...]
    blank_id: int = field(default=BLANK_ID, init=False)

    def __post_init__(self):
        if len(set(self.glosses)) != len(self.glosses):
            raise InvalidInputError("duplicate gloss symbols")
        if len(self.glosses) == 0:
            raise InvalidInputError("vocabulary needs at least one gloss")

    @property
    def num_glosses(self) -> int:
        return len(self.glosses)

    @property
    def num_classes(self) -> int:
        """Size of the extended vocabulary (glosses + blank)."""
        return len(self.glosses) + 1

    def id_of(self, symbol: str) -> int:
        try:
            return self.glosses.index(symbol) + 1
        except ValueError:
            raise InvalidInputError(f"unknown gloss {symbol!r}") from None

    def symbol_of(self, gloss_id: int) -> str:
        if not 1 <= gloss_id <= len(self.glosses):
            raise InvalidInputError(f"gloss id {gloss_id} out of range")
        return self.glosses[gloss_id - 1]

    @staticmethod
    def numbered(n: int) -> "ExtendedVocabulary":
        """Synthetic vocabulary g01..gNN."""
        width = max(2, len(str(n)))
        return ExtendedVocabulary(tuple(f"g{i:0{width}d}" for i in range(1, n + 1)))


def validate_labeling(labeling: list[int], num_glosses: int) -> None:
    for tok in labeling:
        if not 1 <= tok <= num_glosses:
            raise InvalidInputError(
                f"label id {tok} outside gloss range [1, {num_glosses}]"
            )


def validate_logits(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] < 1 or logits.shape[1] < 2:
        raise InvalidInputError(f"logits must be (T, num_classes), got {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("logits contain non-finite values")
    return logits


def collapse_path(path, num_classes: int | None = None) -> list[int]:
    """Merge runs of identical ids, then delete blanks.

    The order matters: "ab-b" collapses to "abb" because the blank keeps the
    two b-runs apart before it is removed.
    """
    out = []
    prev = None
    for sym in path:
        sym = int(sym)
        if sym < 0 or (num_classes is not None and sym >= num_classes):
            raise InvalidInputError(f"path id {sym} out of range")
        if sym != prev and sym != BLANK_ID:
            out.append(sym)
        prev = sym
    return out


def min_path_length(labeling: list[int]) -> int:
    """Shortest path that can collapse to the labeling.

    Every token needs a frame, and each adjacent repeated pair needs a
    separating blank frame on top.
    """
    repeats = sum(1 for a, b in zip(labeling, labeling[1:]) if a == b)
    return len(labeling) + repeats


def _extend_with_blanks(labeling: list[int]) -> np.ndarray:
    ext = np.full(2 * len(labeling) + 1, BLANK_ID, dtype=np.int64)
    ext[1::2] = labeling
    return ext


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_instance(logits: np.ndarray, labeling: list[int]) -> np.ndarray:
    logits = validate_logits(logits)
    validate_labeling(labeling, logits.shape[1] - 1)
    need = min_path_length(labeling)
    if logits.shape[0] < need:
        raise InfeasibleAlignmentError(
            f"labeling of {len(labeling)} tokens needs at least {need} frames, "
            f"got {logits.shape[0]}"
        )
    return logits


def _forward_alphas(log_probs: np.ndarray, ext: np.ndarray) -> np.ndarray:
    """Alpha trellis over the blank-interleaved labeling; includes emissions."""
    T = log_probs.shape[0]
    S = len(ext)
    emit = log_probs[:, ext]  # (T, S)
    # a state can also hop over a blank from two back, unless that would
    # merge a repeated gloss
    can_skip = np.zeros(S, dtype=bool)
    can_skip[2:] = (ext[2:] != BLANK_ID) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), LOG_ZERO)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        stay = alpha[t - 1]
        step = np.full(S, LOG_ZERO)
        step[1:] = alpha[t - 1, :-1]
        skip = np.full(S, LOG_ZERO)
        skip[2:] = alpha[t - 1, :-2]
        skip = np.where(can_skip, skip, LOG_ZERO)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), skip) + emit[t]
    return alpha


def _backward_betas(log_probs: np.ndarray, ext: np.ndarray) -> np.ndarray:
    T = log_probs.shape[0]
    S = len(ext)
    emit = log_probs[:, ext]
    can_skip_from = np.zeros(S, dtype=bool)
    can_skip_from[: S - 2] = (ext[:-2] != BLANK_ID) & (ext[:-2] != ext[2:])

    beta = np.full((T, S), LOG_ZERO)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = emit[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        stay = beta[t + 1]
        step = np.full(S, LOG_ZERO)
        step[:-1] = beta[t + 1, 1:]
        skip = np.full(S, LOG_ZERO)
        skip[:-2] = beta[t + 1, 2:]
        skip = np.where(can_skip_from, skip, LOG_ZERO)
        beta[t] = np.logaddexp(np.logaddexp(stay, step), skip) + emit[t]
    return beta


def ctc_loss(logits: np.ndarray, labeling: list[int]) -> float:
    """-log of the summed probability of all paths collapsing to the labeling."""
    logits = _check_instance(logits, labeling)
    ext = _extend_with_blanks(list(labeling))
    alpha = _forward_alphas(log_softmax(logits), ext)
    tail = alpha[-1, -1]
    if len(ext) > 1:
        tail = np.logaddexp(tail, alpha[-1, -2])
    return float(-tail)


def ctc_loss_and_gradient(
    logits: np.ndarray, labeling: list[int]
) -> tuple[float, np.ndarray]:
    """Loss plus d(loss)/d(logits) from the forward-backward posteriors.

    grad[t, k] = softmax(z_t)[k] - P(state with class k at frame t | labeling),
    so every row sums to zero.
    """
    logits = _check_instance(logits, labeling)
    ext = _extend_with_blanks(list(labeling))
    log_probs = log_softmax(logits)
    alpha = _forward_alphas(log_probs, ext)
    beta = _backward_betas(log_probs, ext)

    log_p = alpha[-1, -1]
    if len(ext) > 1:
        log_p = np.logaddexp(log_p, alpha[-1, -2])

    # alpha and beta both include the emission at t; remove one copy
    emit = log_probs[:, ext]
    log_gamma = alpha + beta - emit - log_p  # (T, S), state posteriors

    posterior = np.zeros_like(log_probs)
    gamma = np.exp(log_gamma)
    for s, k in enumerate(ext):
        posterior[:, k] += gamma[:, s]

    grad = np.exp(log_probs) - posterior
    return float(-log_p), grad


def ctc_gradient(logits: np.ndarray, labeling: list[int]) -> np.ndarray:
    return ctc_loss_and_gradient(logits, labeling)[1]


def greedy_decode(logits: np.ndarray) -> list[int]:
    """Collapse of the per-frame argmax path (ties break to the lowest id)."""
    logits = validate_logits(logits)
    path = np.argmax(logits, axis=1)
    return collapse_path(path, num_classes=logits.shape[1])
