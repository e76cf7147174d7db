"""The training objective: primary CTC plus two auxiliary terms.

The visual-enhancement term is the same CTC loss applied to the auxiliary
classifier's logits, so its gradient reaches only the front-end partition.
The visual-alignment term distills the primary classifier's
temperature-softened frame distributions into the auxiliary classifier's:
KL(teacher, student) averaged over frames, with the teacher treated as a
constant. No gradient of either auxiliary term touches the BiLSTM stack or
the primary classifier.

Combined objective: ctc + ve + alpha * va (each auxiliary term only when
enabled). The frame average in va keeps alpha comparable across sequence
lengths, and there is no temperature-squared rescaling of the distillation
gradient; alpha absorbs the scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ctc import ctc_loss_and_gradient
from .errors import InfeasibleAlignmentError, InvalidInputError
from .model import ForwardResult, RecognitionNetwork


@dataclass
class LossConfig:
    alpha: float = 25.0
    tau: float = 8.0
    enable_ve: bool = True
    enable_va: bool = True

    def __post_init__(self):
        if self.tau <= 0:
            raise InvalidInputError(f"temperature must be positive, got {self.tau}")
        if self.alpha < 0:
            raise InvalidInputError(f"alpha must be nonnegative, got {self.alpha}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "enable_ve": self.enable_ve,
            "enable_va": self.enable_va,
        }


@dataclass
class LossBreakdown:
    l_ctc: float
    l_ve: float
    l_va: float
    total: float


def softmax_with_temperature(z: np.ndarray, tau: float) -> np.ndarray:
    """softmax(z / tau) with max-shift stabilization; rows sum to 1."""
    if tau <= 0:
        raise InvalidInputError(f"temperature must be positive, got {tau}")
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("logits contain non-finite values")
    scaled = z / tau
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=-1, keepdims=True)


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """sum p * log(p / q) in nats, with 0 * log 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidInputError("distributions differ in shape")
    if np.any(p < 0) or np.any(q <= 0):
        raise InvalidInputError("p must be nonnegative and q strictly positive")
    if not (
        np.isclose(p.sum(), 1.0, atol=1e-8) and np.isclose(q.sum(), 1.0, atol=1e-8)
    ):
        raise InvalidInputError("arguments must be probability distributions")
    mask = p > 0
    return float((p[mask] * (np.log(p[mask]) - np.log(q[mask]))).sum())


def ve_loss(visual_logits: np.ndarray, labeling: list[int]) -> float:
    """CTC loss on the auxiliary classifier's logits."""
    return ve_loss_and_gradient(visual_logits, labeling)[0]


def ve_loss_and_gradient(
    visual_logits: np.ndarray, labeling: list[int]
) -> tuple[float, np.ndarray]:
    return ctc_loss_and_gradient(visual_logits, labeling)


def va_loss(
    context_logits: np.ndarray, visual_logits: np.ndarray, tau: float
) -> float:
    return va_loss_and_gradient(context_logits, visual_logits, tau)[0]


def va_loss_and_gradient(
    context_logits: np.ndarray, visual_logits: np.ndarray, tau: float
) -> tuple[float, np.ndarray]:
    """Frame-averaged KL(teacher, student) and its gradient on the student.

    The teacher (context) side is a constant for differentiation: the
    returned gradient is on visual_logits only, (q - p) / (tau * T') per
    frame.
    """
    if context_logits.shape != visual_logits.shape:
        raise InvalidInputError(
            f"logit shapes differ: {context_logits.shape} vs {visual_logits.shape}"
        )
    teacher = softmax_with_temperature(context_logits, tau)
    student = softmax_with_temperature(visual_logits, tau)
    T = teacher.shape[0]
    loss = sum(kl_divergence(teacher[t], student[t]) for t in range(T)) / T
    grad_student = (student - teacher) / (tau * T)
    return float(loss), grad_student


def total_loss(
    frames: np.ndarray,
    labeling: list[int],
    model: RecognitionNetwork,
    config: LossConfig,
    mode: str = "train",
    accumulate_grads: bool = True,
) -> tuple[LossBreakdown, "ForwardResult"]:
    """Run the model, compute the combined objective, and backpropagate.

    Gradients land in the model's grad buffers (on top of whatever is
    already there; callers zero them per step). With both auxiliary terms
    disabled this is exactly the plain CTC objective and the auxiliary
    backward path is never entered. Returns the breakdown together with the
    forward pass so callers can decode without a second pass.
    """
    result = model.forward(frames, mode)
    try:
        l_ctc, grad_context = ctc_loss_and_gradient(result.context_logits, labeling)
    except InfeasibleAlignmentError as err:
        raise InfeasibleAlignmentError(f"ctc: {err}") from None

    l_ve = 0.0
    l_va = 0.0
    grad_visual = None
    if config.enable_ve:
        try:
            l_ve, grad_ve = ve_loss_and_gradient(result.visual_logits, labeling)
        except InfeasibleAlignmentError as err:
            raise InfeasibleAlignmentError(f"ve: {err}") from None
        grad_visual = grad_ve
    if config.enable_va:
        l_va, grad_va = va_loss_and_gradient(
            result.context_logits, result.visual_logits, config.tau
        )
        scaled = config.alpha * grad_va
        grad_visual = scaled if grad_visual is None else grad_visual + scaled

    if accumulate_grads:
        model.backward(grad_context, grad_visual)
    total = l_ctc + l_ve + config.alpha * l_va
    return LossBreakdown(l_ctc=l_ctc, l_ve=l_ve, l_va=l_va, total=total), result
