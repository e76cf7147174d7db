"""Deterministic synthetic continuous-gesture corpus.

Stands in for a video front end: every gloss owns a prototype feature
vector, a sentence is rendered as noisy prototype segments joined at the
gloss boundaries by transition frames that interpolate between the
neighboring prototypes. Transition frames carry no label, which gives the
blank class real work to do.

Generation is a pure function of the config (including the seed) via the
package's own PRNG, so corpora hash identically across runs and platforms.

On-disk layout (one directory per corpus):
  manifest.json          config echo, per-split counts, content hash
  <split>.feat           records: int64 T, int64 C, then T*C float64,
                         all little-endian, rows frame-major
  <split>.labels         one line per sentence: "ID gloss-id gloss-id ..."
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ctc import min_path_length
from .errors import ConfigError, InvalidInputError
from .model import variant_output_length
from .prng import Xorshift64Star

SPLITS = ("train", "dev", "test")


@dataclass
class GlossTemplate:
    gloss_id: int
    prototype: np.ndarray
    duration_range: tuple[int, int]


@dataclass
class CorpusConfig:
    vocab_size: int = 10
    feature_dim: int = 16
    sentence_length_range: tuple[int, int] = (3, 6)
    duration_range: tuple[int, int] = (6, 10)
    transition_range: tuple[int, int] = (2, 4)
    noise_std: float = 0.3
    train_count: int = 200
    dev_count: int = 40
    test_count: int = 40
    seed: int = 2024
    # sentences are redrawn until they satisfy this variant's CTC feasibility
    feasibility_variant: str = "gloss"

    def __post_init__(self):
        counts = (
            self.vocab_size,
            self.feature_dim,
            self.train_count,
            self.dev_count,
            self.test_count,
        )
        if any(c < 1 for c in counts):
            raise ConfigError("all corpus counts must be >= 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        for lo, hi in (
            self.sentence_length_range,
            self.duration_range,
            self.transition_range,
        ):
            if lo > hi or lo < 0:
                raise ConfigError(f"bad range ({lo}, {hi})")
        if self.sentence_length_range[0] < 1 or self.duration_range[0] < 1:
            raise ConfigError("sentences need >= 1 gloss and >= 1 frame per gloss")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "feature_dim": self.feature_dim,
            "sentence_length_range": list(self.sentence_length_range),
            "duration_range": list(self.duration_range),
            "transition_range": list(self.transition_range),
            "noise_std": self.noise_std,
            "train_count": self.train_count,
            "dev_count": self.dev_count,
            "test_count": self.test_count,
            "seed": self.seed,
            "feasibility_variant": self.feasibility_variant,
        }

    @staticmethod
    def from_dict(d: dict) -> "CorpusConfig":
        d = dict(d)
        for key in ("sentence_length_range", "duration_range", "transition_range"):
            if key in d:
                d[key] = tuple(d[key])
        return CorpusConfig(**d)


MIN_PROTOTYPE_DISTANCE = 1.0
_MAX_TEMPLATE_ATTEMPTS = 10**4
_MAX_SENTENCE_ATTEMPTS = 1000


def generate_templates(config: CorpusConfig, rng: Xorshift64Star) -> list[GlossTemplate]:
    """Prototype per gloss, rejection-sampled to stay pairwise separated."""
    templates: list[GlossTemplate] = []
    attempts = 0
    while len(templates) < config.vocab_size:
        if attempts >= _MAX_TEMPLATE_ATTEMPTS:
            raise ConfigError(
                f"could not draw {config.vocab_size} prototypes with pairwise "
                f"distance >= {MIN_PROTOTYPE_DISTANCE} in {attempts} attempts"
            )
        attempts += 1
        candidate = np.array([rng.normal() for _ in range(config.feature_dim)])
        if all(
            np.linalg.norm(candidate - t.prototype) >= MIN_PROTOTYPE_DISTANCE
            for t in templates
        ):
            templates.append(
                GlossTemplate(
                    gloss_id=len(templates) + 1,
                    prototype=candidate,
                    duration_range=config.duration_range,
                )
            )
    return templates


def _noise(rng: Xorshift64Star, std: float, dim: int) -> np.ndarray:
    if std == 0.0:
        return np.zeros(dim)
    return std * np.array([rng.normal() for _ in range(dim)])


def _render_sentence(
    glosses: list[int],
    templates: list[GlossTemplate],
    config: CorpusConfig,
    rng: Xorshift64Star,
) -> np.ndarray:
    """Noisy prototype segments with unlabeled transition frames at the
    gloss boundaries; a k-frame transition interpolates the neighboring
    prototypes at weights 1/(k+1) .. k/(k+1), endpoints excluded."""
    frames: list[np.ndarray] = []
    for idx, gloss in enumerate(glosses):
        if idx > 0:
            n_trans = rng.randint(*config.transition_range)
            src = templates[glosses[idx - 1] - 1].prototype
            dst = templates[gloss - 1].prototype
            for j in range(n_trans):
                w = (j + 1) / (n_trans + 1)
                frames.append(
                    (1 - w) * src
                    + w * dst
                    + _noise(rng, config.noise_std, config.feature_dim)
                )
        duration = rng.randint(*templates[gloss - 1].duration_range)
        for _ in range(duration):
            frames.append(
                templates[gloss - 1].prototype
                + _noise(rng, config.noise_std, config.feature_dim)
            )
    return np.stack(frames)


def sentence_is_feasible(
    frames: np.ndarray, labeling: list[int], variant: str
) -> bool:
    try:
        out_len = variant_output_length(variant, frames.shape[0])
    except Exception:
        return False
    return out_len >= min_path_length(labeling)


def generate_sentence(
    templates: list[GlossTemplate], config: CorpusConfig, rng: Xorshift64Star
) -> tuple[np.ndarray, list[int]]:
    """One (frames, labeling) pair, redrawn until CTC-feasible for the variant."""
    for _ in range(_MAX_SENTENCE_ATTEMPTS):
        n = rng.randint(*config.sentence_length_range)
        glosses = [rng.randint(1, config.vocab_size) for _ in range(n)]
        frames = _render_sentence(glosses, templates, config, rng)
        if sentence_is_feasible(frames, glosses, config.feasibility_variant):
            return frames, glosses
    raise ConfigError(
        "could not draw a CTC-feasible sentence; durations/transitions are too "
        f"short for variant {config.feasibility_variant!r}"
    )


@dataclass
class Corpus:
    config: CorpusConfig
    templates: list[GlossTemplate]
    splits: dict[str, list[tuple[str, np.ndarray, list[int]]]] = field(
        default_factory=dict
    )

    def sentences(self, split: str) -> list[tuple[str, np.ndarray, list[int]]]:
        try:
            return self.splits[split]
        except KeyError:
            raise InvalidInputError(
                f"unknown split {split!r}; expected one of {SPLITS}"
            ) from None

    def find(self, sentence_id: str) -> tuple[np.ndarray, list[int]]:
        for split in self.splits.values():
            for sid, frames, labeling in split:
                if sid == sentence_id:
                    return frames, labeling
        raise InvalidInputError(f"unknown sentence id {sentence_id!r}")


def generate_corpus(config: CorpusConfig) -> Corpus:
    master = Xorshift64Star(config.seed)
    templates = generate_templates(config, master.derive(0))
    counts = {
        "train": config.train_count,
        "dev": config.dev_count,
        "test": config.test_count,
    }
    splits = {}
    for stream, split in enumerate(SPLITS, start=1):
        rng = master.derive(stream)
        sentences = []
        for i in range(counts[split]):
            frames, labeling = generate_sentence(templates, config, rng)
            sentences.append((f"{split}-{i:04d}", frames, labeling))
        splits[split] = sentences
    return Corpus(config=config, templates=templates, splits=splits)


# ----- disk format ---------------------------------------------------------


def _feature_record(frames: np.ndarray) -> bytes:
    T, C = frames.shape
    return struct.pack("<qq", T, C) + np.ascontiguousarray(
        frames, dtype="<f8"
    ).tobytes()


def content_hash(corpus: Corpus) -> str:
    digest = hashlib.sha256()
    for split in SPLITS:
        for sid, frames, labeling in corpus.splits[split]:
            digest.update(sid.encode())
            digest.update(_feature_record(frames))
            digest.update(" ".join(map(str, labeling)).encode())
    return digest.hexdigest()


def save_corpus(corpus: Corpus, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split in SPLITS:
        with open(out / f"{split}.feat", "wb") as feat_fh:
            for _, frames, _ in corpus.splits[split]:
                feat_fh.write(_feature_record(frames))
        with open(out / f"{split}.labels", "w", encoding="utf-8") as lab_fh:
            for sid, _, labeling in corpus.splits[split]:
                lab_fh.write(" ".join([sid] + [str(g) for g in labeling]) + "\n")
    manifest = {
        "format_version": 1,
        "config": corpus.config.to_dict(),
        "counts": {split: len(corpus.splits[split]) for split in SPLITS},
        "content_hash": content_hash(corpus),
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_corpus(corpus_dir) -> Corpus:
    root = Path(corpus_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise InvalidInputError(f"no manifest.json under {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    config = CorpusConfig.from_dict(manifest["config"])
    corpus = Corpus(config=config, templates=[])
    for split in SPLITS:
        labels = []
        with open(root / f"{split}.labels", encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if parts:
                    labels.append((parts[0], [int(t) for t in parts[1:]]))
        sentences = []
        with open(root / f"{split}.feat", "rb") as fh:
            for sid, labeling in labels:
                head = fh.read(16)
                if len(head) != 16:
                    raise InvalidInputError(f"{split}.feat: truncated record")
                T, C = struct.unpack("<qq", head)
                data = np.frombuffer(fh.read(T * C * 8), dtype="<f8")
                if data.size != T * C:
                    raise InvalidInputError(f"{split}.feat: truncated record")
                sentences.append((sid, data.reshape(T, C).copy(), labeling))
            if fh.read(1):
                raise InvalidInputError(f"{split}.feat: trailing bytes")
        corpus.splits[split] = sentences
    return corpus
