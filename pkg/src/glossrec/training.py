"""Training loop, evaluation, and diagnostic traces.

Training is strictly single-threaded and a pure function of (config, seed):
corpus order, initialization, and the optimizer trajectory all come from
seeded generators, so two runs of the same config produce byte-identical
checkpoints and reports.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, load_corpus
from .ctc import greedy_decode
from .errors import ConfigError, DivergenceError, InfeasibleAlignmentError
from .losses import LossConfig, total_loss
from .metrics import MetricsReport, corpus_report, wer
from .model import (
    ModelConfig,
    RecognitionNetwork,
    load_checkpoint,
    save_checkpoint,
)
from .optim import Adam
from .prng import Xorshift64Star

logger = logging.getLogger("glossrec")


@dataclass
class RunConfig:
    corpus: str = ""
    out_dir: str = "runs/latest"
    variant: str = "gloss"
    channels: int = 64
    hidden: int = 64
    loss: LossConfig = field(default_factory=LossConfig)
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 30
    decay_epochs: tuple[int, ...] = (15, 22)
    decay_factor: float = 5.0
    lr_ratio: float = 1.0  # front-end rate / alignment rate; 0 freezes the front end
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ConfigError("lr must be nonnegative")
        if self.decay_factor <= 1:
            raise ConfigError("decay factor must exceed 1")
        if self.lr_ratio < 0:
            raise ConfigError("lr_ratio must be nonnegative")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus,
            "out_dir": self.out_dir,
            "variant": self.variant,
            "channels": self.channels,
            "hidden": self.hidden,
            "loss": self.loss.to_dict(),
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "epochs": self.epochs,
            "decay_epochs": list(self.decay_epochs),
            "decay_factor": self.decay_factor,
            "lr_ratio": self.lr_ratio,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        d = dict(d)
        if "loss" in d and isinstance(d["loss"], dict):
            d["loss"] = LossConfig(**d["loss"])
        if "decay_epochs" in d:
            d["decay_epochs"] = tuple(d["decay_epochs"])
        return RunConfig(**d)


@dataclass
class TrainResult:
    model: RecognitionNetwork
    epoch_rows: list[dict]
    checkpoint_paths: list[str]
    skipped_sentences: int


def build_model(config: RunConfig, corpus: Corpus) -> RecognitionNetwork:
    model_config = ModelConfig(
        variant=config.variant,
        in_dim=corpus.config.feature_dim,
        channels=config.channels,
        hidden=config.hidden,
        num_classes=corpus.config.vocab_size + 1,
    )
    return RecognitionNetwork(model_config, seed=config.seed)


def epoch_learning_rate(config: RunConfig, epoch: int) -> float:
    """Base rate divided by the decay factor after each listed epoch (1-based)."""
    drops = sum(1 for d in config.decay_epochs if epoch > d)
    return config.lr / (config.decay_factor**drops)


def train(config: RunConfig, corpus: Corpus | None = None) -> TrainResult:
    if corpus is None:
        corpus = load_corpus(config.corpus)
    model = build_model(config, corpus)
    adam = Adam(
        model.named_parameters().keys(),
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
    )
    shuffler = Xorshift64Star(config.seed)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    train_split = corpus.sentences("train")
    epoch_rows: list[dict] = []
    checkpoint_paths: list[str] = []
    skipped = 0

    for epoch in range(1, config.epochs + 1):
        lr = epoch_learning_rate(config, epoch)
        lr_map = {
            name: lr * config.lr_ratio if model.is_visual_param(name) else lr
            for name in model.named_parameters()
        }
        order = list(range(len(train_split)))
        shuffler.shuffle(order)

        sums = {"l_ctc": 0.0, "l_ve": 0.0, "l_va": 0.0, "total": 0.0}
        steps = 0
        err_tokens = 0
        ref_tokens = 0
        for idx in order:
            sid, frames, labeling = train_split[idx]
            model.zero_grads()
            try:
                breakdown, result = total_loss(
                    frames, labeling, model, config.loss, mode="train"
                )
            except InfeasibleAlignmentError as err:
                skipped += 1
                logger.warning("skipping infeasible sentence %s: %s", sid, err)
                continue
            if not np.isfinite(breakdown.total):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, sentence {sid}: "
                    f"{breakdown}"
                )
            adam.step(model.named_parameters(), model.named_gradients(), lr_map)
            sums["l_ctc"] += breakdown.l_ctc
            sums["l_ve"] += breakdown.l_ve
            sums["l_va"] += breakdown.l_va
            sums["total"] += breakdown.total
            steps += 1
            decoded = greedy_decode(result.context_logits)
            err_tokens += wer(labeling, decoded).num_errors
            ref_tokens += len(labeling)

        dev_report = evaluate(model, corpus, "dev")
        row = {
            "epoch": epoch,
            "lr": lr,
            "train_l_ctc": sums["l_ctc"] / max(steps, 1),
            "train_l_ve": sums["l_ve"] / max(steps, 1),
            "train_l_va": sums["l_va"] / max(steps, 1),
            "train_total": sums["total"] / max(steps, 1),
            "train_wer": err_tokens / ref_tokens if ref_tokens else 0.0,
            "dev_wer_p": dev_report.totals["wer_p"],
            "dev_wer_a": dev_report.totals["wer_a"],
            "dev_wdr": dev_report.totals["wdr"],
            "dev_war": dev_report.totals["war"],
        }
        epoch_rows.append(row)
        logger.info(
            "epoch %d: loss %.4f train-wer %.3f dev-wer-p %.3f dev-wer-a %.3f",
            epoch,
            row["train_total"],
            row["train_wer"],
            row["dev_wer_p"],
            row["dev_wer_a"],
        )
        if epoch in config.decay_epochs or epoch == config.epochs:
            name = (
                "checkpoint_final.ckpt"
                if epoch == config.epochs
                else f"checkpoint_epoch{epoch:03d}.ckpt"
            )
            path = out_dir / name
            # path fields stay out of the echo so identical runs produce
            # byte-identical checkpoints regardless of where they live
            echo = {
                k: v
                for k, v in config.to_dict().items()
                if k not in ("out_dir", "corpus")
            }
            save_checkpoint(model, path, extra={"epoch": epoch, "run": echo})
            checkpoint_paths.append(str(path))

    _write_epoch_log(out_dir / "epochs.csv", epoch_rows)
    return TrainResult(
        model=model,
        epoch_rows=epoch_rows,
        checkpoint_paths=checkpoint_paths,
        skipped_sentences=skipped,
    )


def _write_epoch_log(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def evaluate(model: RecognitionNetwork, corpus: Corpus, split: str) -> MetricsReport:
    """Eval-mode decode of both classifiers, scored as co-aligned triplets."""
    if model.config.num_classes != corpus.config.vocab_size + 1:
        raise ConfigError(
            f"model has {model.config.num_classes} classes but corpus vocabulary "
            f"needs {corpus.config.vocab_size + 1}"
        )
    items = []
    for sid, frames, labeling in corpus.sentences(split):
        result = model.forward(frames, mode="eval")
        hyp_p = greedy_decode(result.context_logits)
        hyp_a = greedy_decode(result.visual_logits)
        items.append((sid, labeling, hyp_a, hyp_p))
    return corpus_report(items)


def evaluate_checkpoint(checkpoint_path, corpus_dir, split: str) -> MetricsReport:
    model, _ = load_checkpoint(checkpoint_path)
    return evaluate(model, load_corpus(corpus_dir), split)


TRACE_COLUMNS = (
    "frame",
    "gate_i",
    "gate_f",
    "gate_o",
    "gloss_norm",
    "seq_norm",
    "primary_argmax",
    "primary_prob",
    "aux_argmax",
    "aux_prob",
)


def trace(model: RecognitionNetwork, frames: np.ndarray) -> list[dict]:
    """Per-frame diagnostics from one eval-mode pass.

    Gate columns average the last forward-direction LSTM's gate activations;
    the norms are the l2 lengths of the features entering the first and
    second BiLSTM layers; argmax/prob columns describe both classifiers'
    frame posteriors.
    """
    result = model.forward(frames, mode="eval")

    def softmax(z):
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)

    probs_p = softmax(result.context_logits)
    probs_a = softmax(result.visual_logits)
    rows = []
    for t in range(result.context_logits.shape[0]):
        rows.append(
            {
                "frame": t,
                "gate_i": float(result.gates["i"][t].mean()),
                "gate_f": float(result.gates["f"][t].mean()),
                "gate_o": float(result.gates["o"][t].mean()),
                "gloss_norm": float(np.linalg.norm(result.visual_features[t])),
                "seq_norm": float(np.linalg.norm(result.mid_features[t])),
                "primary_argmax": int(np.argmax(probs_p[t])),
                "primary_prob": float(probs_p[t].max()),
                "aux_argmax": int(np.argmax(probs_a[t])),
                "aux_prob": float(probs_a[t].max()),
            }
        )
    return rows


def write_trace_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(TRACE_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)


def trace_sentence(checkpoint_path, corpus_dir, sentence_id: str) -> list[dict]:
    model, _ = load_checkpoint(checkpoint_path)
    corpus = load_corpus(corpus_dir)
    frames, _ = corpus.find(sentence_id)
    return trace(model, frames)
