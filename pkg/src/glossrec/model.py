"""The recognition network: temporal front end, BiLSTM stack, two classifiers.

The front end (temporal convolutions + batch norm + the auxiliary classifier)
forms the "visual" parameter partition; the BiLSTM stack and the primary
classifier form the alignment partition. Auxiliary-logit gradients can only
reach visual parameters, which is what makes the auxiliary losses act as a
constraint on the front end rather than on the whole network.

Checkpoints are a custom deterministic binary container (no timestamps), so
identical training runs produce byte-identical files.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SequenceTooShortError
from .layers import BatchNorm1d, BiLstmLayer, Conv1d, Linear, MaxPool2, Relu

# variant -> (layer plan, receptive field, output-length fn, min input length)
TEMPORAL_VARIANTS = {
    "frame-c1": (("conv1", "bn", "relu"), 1, lambda T: T, 1),
    "frame-c3": (("conv3", "bn", "relu"), 3, lambda T: T - 2, 3),
    "subgloss": (("conv5", "bn", "relu", "pool"), 6, lambda T: T // 2 - 2, 6),
    "gloss": (
        ("conv5", "bn", "relu", "pool", "conv5", "bn", "relu", "pool"),
        16,
        lambda T: T // 4 - 3,
        16,
    ),
}


def variant_output_length(variant: str, T: int) -> int:
    _, _, fn, min_T = _variant(variant)
    if T < min_T:
        raise SequenceTooShortError(
            f"variant {variant!r} needs at least {min_T} frames, got {T}"
        )
    return fn(T)


def variant_receptive_field(variant: str) -> int:
    return _variant(variant)[1]


def _variant(variant: str):
    try:
        return TEMPORAL_VARIANTS[variant]
    except KeyError:
        raise InvalidInputError(
            f"unknown temporal variant {variant!r}; "
            f"expected one of {sorted(TEMPORAL_VARIANTS)}"
        ) from None


@dataclass
class ModelConfig:
    variant: str = "gloss"
    in_dim: int = 16
    channels: int = 64  # temporal-layer output width
    hidden: int = 64  # BiLSTM width per direction
    num_classes: int = 11  # glosses + blank

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "in_dim": self.in_dim,
            "channels": self.channels,
            "hidden": self.hidden,
            "num_classes": self.num_classes,
        }


@dataclass
class ForwardResult:
    """Everything downstream consumers need from one pass.

    visual_logits come from the auxiliary classifier on the front-end
    features; context_logits from the primary classifier after the BiLSTMs.
    visual_features / mid_features are the inputs to the first and second
    BiLSTM layer (their norms are the trace's gloss/sequence norms), and
    gates holds the per-frame i/f/o activations of the last
    forward-direction LSTM.
    """

    visual_features: np.ndarray
    mid_features: np.ndarray
    visual_logits: np.ndarray
    context_logits: np.ndarray
    gates: dict[str, np.ndarray]


class RecognitionNetwork:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        plan, _, _, self._min_T = _variant(config.variant)

        self.temporal: list = []
        width = config.in_dim
        for kind in plan:
            if kind.startswith("conv"):
                kernel = int(kind[4:])
                self.temporal.append(Conv1d(kernel, width, config.channels, rng))
                width = config.channels
            elif kind == "bn":
                self.temporal.append(BatchNorm1d(config.channels))
            elif kind == "relu":
                self.temporal.append(Relu())
            else:
                self.temporal.append(MaxPool2())
        self.aux_head = Linear(config.channels, config.num_classes, rng)
        self.bilstm1 = BiLstmLayer(config.channels, config.hidden, rng)
        self.bilstm2 = BiLstmLayer(2 * config.hidden, config.hidden, rng)
        self.primary_head = Linear(2 * config.hidden, config.num_classes, rng)

    # ----- structure walking -------------------------------------------------

    def _named_layers(self):
        for i, layer in enumerate(self.temporal):
            yield f"temporal.{i}", layer
        yield "aux_head", self.aux_head
        yield "bilstm1.fwd", self.bilstm1.fwd
        yield "bilstm1.bwd", self.bilstm1.bwd
        yield "bilstm2.fwd", self.bilstm2.fwd
        yield "bilstm2.bwd", self.bilstm2.bwd
        yield "primary_head", self.primary_head

    def named_parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in self._named_layers():
            for name, arr in layer.params.items():
                out[f"{prefix}.{name}"] = arr
        return out

    def named_gradients(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in self._named_layers():
            for name, arr in layer.grads.items():
                out[f"{prefix}.{name}"] = arr
        return out

    def named_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, layer in self._named_layers():
            for name, arr in layer.buffers().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def is_visual_param(self, name: str) -> bool:
        """Membership in the front-end (feature extractor + auxiliary) partition."""
        return name.startswith("temporal.") or name.startswith("aux_head.")

    def zero_grads(self):
        for _, layer in self._named_layers():
            layer.zero_grads()

    # ----- forward / backward -------------------------------------------------

    def temporal_forward(self, frames: np.ndarray, mode: str = "train") -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.config.in_dim:
            raise InvalidInputError(
                f"expected (T, {self.config.in_dim}) frames, got {frames.shape}"
            )
        if frames.shape[0] < self._min_T:
            raise SequenceTooShortError(
                f"variant {self.config.variant!r} needs at least "
                f"{self._min_T} frames, got {frames.shape[0]}"
            )
        x = frames
        for layer in self.temporal:
            x = layer.forward(x, mode)
        return x

    def forward(self, frames: np.ndarray, mode: str = "train") -> ForwardResult:
        visual = self.temporal_forward(frames, mode)
        visual_logits = self.aux_head.forward(visual, mode)
        mid = self.bilstm1.forward(visual, mode)
        context = self.bilstm2.forward(mid, mode)
        context_logits = self.primary_head.forward(context, mode)
        return ForwardResult(
            visual_features=visual,
            mid_features=mid,
            visual_logits=visual_logits,
            context_logits=context_logits,
            gates=dict(self.bilstm2.fwd.gate_trace),
        )

    def backward(
        self, grad_context_logits: np.ndarray, grad_visual_logits: np.ndarray | None
    ) -> None:
        """Accumulate parameter gradients for the cached forward pass.

        grad_visual_logits=None skips the auxiliary path entirely (both the
        classifier and its contribution to the front end), which keeps a
        baseline run structurally identical to a build without it.
        """
        grad_mid = self.bilstm2.backward(self.primary_head.backward(grad_context_logits))
        grad_visual = self.bilstm1.backward(grad_mid)
        if grad_visual_logits is not None:
            grad_visual = grad_visual + self.aux_head.backward(grad_visual_logits)
        g = grad_visual
        for layer in reversed(self.temporal):
            g = layer.backward(g)


# ----- checkpoint container ----------------------------------------------

_MAGIC = b"GRCKPT01"


def save_checkpoint(model: RecognitionNetwork, path, extra: dict | None = None) -> None:
    """Versioned binary: magic, JSON header, then raw little-endian float64."""
    params = model.named_parameters()
    arrays = params | model.named_buffers()
    header = {
        "format_version": 1,
        "model": model.config.to_dict(),
        "visual_params": sorted(n for n in params if model.is_visual_param(n)),
        "arrays": [
            {
                "name": n,
                "shape": list(arr.shape),
                "kind": "param" if n in params else "buffer",
            }
            for n, arr in arrays.items()
        ],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[RecognitionNetwork, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise InvalidInputError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        if header.get("format_version") != 1:
            raise InvalidInputError(f"{path}: unsupported checkpoint version")
        model = RecognitionNetwork(ModelConfig(**header["model"]))
        params = model.named_parameters()
        buffers = model.named_buffers()
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(shape)
            target = params.get(entry["name"])
            if target is None:
                target = buffers.get(entry["name"])
            if target is None or target.shape != shape:
                raise InvalidInputError(
                    f"{path}: unexpected array {entry['name']} {shape}"
                )
            target[...] = data
    return model, header["extra"]
