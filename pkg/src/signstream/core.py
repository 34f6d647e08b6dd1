"""Shared domain types: vocabulary, engine configuration, events.

All types here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import IO, Optional, Sequence, Union

import numpy as np

from .errors import (
    ConfigMissing,
    ConfigRange,
    DuplicateLabel,
    EmptyVocabulary,
    ParseError,
)

PROB_SUM_TOL = 1e-5

# Fields an operator may retune on a live session. Everything else is fixed
# per session because it changes the model input contract.
LIVE_TUNABLE_FIELDS = ("threshold", "avg_size", "stride_fraction")


@dataclass(frozen=True)
class Vocabulary:
    """Ordered gloss label list; class id i maps to labels[i]."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 2:
            raise EmptyVocabulary(f"vocabulary needs >= 2 labels, got {len(self.labels)}")
        seen = set()
        for label in self.labels:
            if not isinstance(label, str) or not label:
                raise ParseError(f"labels must be non-empty strings, got {label!r}")
            if label in seen:
                raise DuplicateLabel(label)
            seen.add(label)

    @property
    def size(self) -> int:
        return len(self.labels)

    def id_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(label) from None

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def to_json(self) -> str:
        return json.dumps(list(self.labels), ensure_ascii=False)


def load_vocabulary(source: Union[IO, bytes, str]) -> Vocabulary:
    """Load a vocabulary from a UTF-8 JSON array of strings.

    Class ids follow file order. Raises DuplicateLabel, EmptyVocabulary or
    ParseError on malformed input.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"vocabulary file is not UTF-8: {e}") from e
    if not data.strip():
        raise EmptyVocabulary("vocabulary file is empty")
    try:
        labels = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"vocabulary file is not valid JSON: {e}") from e
    if not isinstance(labels, list):
        raise ParseError("vocabulary file must be a JSON array of strings")
    if not labels:
        raise EmptyVocabulary("vocabulary array is empty")
    return Vocabulary(labels=tuple(labels))


@dataclass(frozen=True)
class Normalization:
    """Per-channel mean / std applied after scaling pixels to [0, 1]."""

    mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    std: tuple[float, float, float] = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class EngineConfig:
    """All inference-time tuning knobs.

    threshold, avg_size and stride_fraction are the live-tunable trio; the
    rest is fixed per session.
    """

    window_len: int
    stride_fraction: float
    avg_size: int
    threshold: float
    frame_skip: int = 1
    input_resolution: tuple[int, int] = (224, 224)  # (height, width)
    normalization: Normalization = field(default_factory=Normalization)
    backend_output: str = "probabilities"  # or "logits"
    input_layout: str = "cthw"  # model window layout: "cthw" or "tchw"

    def __post_init__(self):
        if not isinstance(self.window_len, int) or self.window_len < 1:
            raise ConfigRange("window_len", f"must be an integer >= 1, got {self.window_len}")
        if not isinstance(self.avg_size, int) or self.avg_size < 1:
            raise ConfigRange("avg_size", f"must be an integer >= 1, got {self.avg_size}")
        if not isinstance(self.frame_skip, int) or self.frame_skip < 1:
            raise ConfigRange("frame_skip", f"must be an integer >= 1, got {self.frame_skip}")
        if not _finite(self.stride_fraction) or not 0.0 <= self.stride_fraction <= 1.0:
            raise ConfigRange("stride_fraction", f"must be in [0, 1], got {self.stride_fraction}")
        if not _finite(self.threshold) or not 0.0 <= self.threshold <= 1.0:
            raise ConfigRange("threshold", f"must be in [0, 1], got {self.threshold}")
        h, w = self.input_resolution
        if not (isinstance(h, int) and isinstance(w, int) and h >= 1 and w >= 1):
            raise ConfigRange("input_resolution", f"must be positive integers, got {self.input_resolution}")
        if len(self.normalization.mean) != 3 or len(self.normalization.std) != 3:
            raise ConfigRange("normalization", "mean and std must each have 3 entries")
        if any(s <= 0 for s in self.normalization.std):
            raise ConfigRange("normalization", "std entries must be strictly positive")
        if self.backend_output not in ("logits", "probabilities"):
            raise ConfigRange("backend_output", f"must be 'logits' or 'probabilities', got {self.backend_output!r}")
        if self.input_layout not in ("cthw", "tchw"):
            raise ConfigRange("input_layout", f"must be 'cthw' or 'tchw', got {self.input_layout!r}")

    def with_updates(self, **fields) -> "EngineConfig":
        """Return a new config with the given fields replaced (revalidated)."""
        return replace(self, **fields)

    def to_dict(self) -> dict:
        return {
            "window_len": self.window_len,
            "stride_fraction": self.stride_fraction,
            "avg_size": self.avg_size,
            "threshold": self.threshold,
            "frame_skip": self.frame_skip,
            "input_resolution": list(self.input_resolution),
            "normalization": {
                "mean": list(self.normalization.mean),
                "std": list(self.normalization.std),
            },
            "backend_output": self.backend_output,
            "input_layout": self.input_layout,
        }


_REQUIRED_FIELDS = ("window_len", "stride_fraction", "avg_size", "threshold")


def validate_config(raw: dict) -> EngineConfig:
    """Validate a raw config mapping into an EngineConfig.

    window_len, stride_fraction, avg_size and threshold are required; the
    remaining fields fall back to defaults. Raises ConfigMissing or
    ConfigRange.
    """
    if not isinstance(raw, dict):
        raise ParseError("config must be a JSON object")
    for name in _REQUIRED_FIELDS:
        if name not in raw:
            raise ConfigMissing(name)
    kwargs = {name: raw[name] for name in _REQUIRED_FIELDS}
    if "frame_skip" in raw:
        kwargs["frame_skip"] = raw["frame_skip"]
    if "input_resolution" in raw:
        res = raw["input_resolution"]
        if not (isinstance(res, (list, tuple)) and len(res) == 2):
            raise ConfigRange("input_resolution", f"must be [height, width], got {res!r}")
        kwargs["input_resolution"] = tuple(res)
    if "normalization" in raw:
        norm = raw["normalization"]
        try:
            kwargs["normalization"] = Normalization(
                mean=tuple(float(v) for v in norm["mean"]),
                std=tuple(float(v) for v in norm["std"]),
            )
        except (KeyError, TypeError, ValueError):
            raise ConfigRange("normalization", f"must be {{mean: [3], std: [3]}}, got {norm!r}")
    if "backend_output" in raw:
        kwargs["backend_output"] = raw["backend_output"]
    if "input_layout" in raw:
        kwargs["input_layout"] = raw["input_layout"]
    return EngineConfig(**kwargs)


def load_config(source: Union[IO, bytes, str]) -> EngineConfig:
    """Load and validate a JSON config file."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"config file is not valid JSON: {e}") from e
    return validate_config(raw)


def check_prob_vector(values: np.ndarray, num_classes: Optional[int] = None,
                      tol: float = PROB_SUM_TOL) -> np.ndarray:
    """Assert the probability-vector invariants; returns the array.

    Entries must lie in [0, 1] and sum to 1 within `tol`.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ParseError(f"probability vector must be 1-D, got shape {values.shape}")
    if num_classes is not None and values.shape[0] != num_classes:
        raise ParseError(f"probability vector has {values.shape[0]} entries, expected {num_classes}")
    if not np.all(np.isfinite(values)):
        raise ParseError("probability vector contains non-finite entries")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ParseError("probability entries must lie in [0, 1]")
    if abs(float(values.sum()) - 1.0) > tol:
        raise ParseError(f"probability vector sums to {values.sum():.7f}, not 1")
    return values


@dataclass(frozen=True)
class GlossEvent:
    """One emitted recognition: a gloss with its confidence and frame span."""

    gloss_id: int
    label: str
    confidence: float
    frame_start: int
    frame_end: int
    emitted_at: float  # monotonic timestamp

    def __post_init__(self):
        if self.frame_start > self.frame_end:
            raise ValueError(f"frame_start {self.frame_start} > frame_end {self.frame_end}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "type": "gloss",
            "gloss_id": self.gloss_id,
            "label": self.label,
            "confidence": round(float(self.confidence), 4),
            "frame_start": self.frame_start,
            "frame_end": self.frame_end,
        }


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False
