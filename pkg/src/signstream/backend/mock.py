"""Deterministic scripted backend for tests and sweeps.

The i-th infer call returns the i-th scripted vector; calls beyond the
script return the default vector (uniform unless the script provides
one). reset() rewinds the call counter so the same script replays
identically across sweep passes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence, Union

import numpy as np

from .base import Backend
from ..errors import ParseError, ScriptError


@dataclass(frozen=True)
class MockScript:
    """Ordered per-call score vectors plus a fallback for later calls."""

    vectors: tuple[tuple[float, ...], ...]
    default: Optional[tuple[float, ...]] = None
    output_kind: str = "probabilities"

    def __post_init__(self):
        if not self.vectors:
            raise ScriptError("mock script must contain at least one vector")
        width = len(self.vectors[0])
        if width < 2:
            raise ScriptError(f"scripted vectors need >= 2 entries, got {width}")
        for vec in self.vectors:
            if len(vec) != width:
                raise ScriptError(f"inconsistent vector lengths: {len(vec)} vs {width}")
        if self.default is not None and len(self.default) != width:
            raise ScriptError(f"default vector length {len(self.default)} vs {width}")

    @property
    def num_classes(self) -> int:
        return len(self.vectors[0])


class MockBackend(Backend):
    def __init__(self, script: MockScript):
        super().__init__(num_classes=script.num_classes, output_kind=script.output_kind)
        self._script = script
        self._calls = 0
        if script.default is not None:
            self._default = np.asarray(script.default, dtype=np.float64)
        else:
            self._default = np.full(script.num_classes, 1.0 / script.num_classes)

    def _run(self, window: np.ndarray) -> np.ndarray:
        i = self._calls
        self._calls += 1
        if i < len(self._script.vectors):
            return np.asarray(self._script.vectors[i], dtype=np.float64)
        return self._default.copy()

    def reset(self) -> None:
        self._calls = 0


def make_mock_backend(script: Union[MockScript, Sequence[Sequence[float]]],
                      default: Optional[Sequence[float]] = None,
                      output_kind: str = "probabilities") -> MockBackend:
    if not isinstance(script, MockScript):
        script = MockScript(
            vectors=tuple(tuple(float(v) for v in vec) for vec in script),
            default=tuple(float(v) for v in default) if default is not None else None,
            output_kind=output_kind,
        )
    return MockBackend(script)


def load_mock_script(source: Union[IO, bytes, str]) -> MockScript:
    """Parse a mock script from JSON.

    Accepted shapes: a bare array of arrays of numbers, or an object
    {"vectors": [...], "default": [...], "output_kind": "..."}.
    """
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"mock script is not valid JSON: {e}") from e
    if isinstance(raw, list):
        raw = {"vectors": raw}
    if not isinstance(raw, dict) or "vectors" not in raw:
        raise ParseError("mock script must be an array of vectors or {'vectors': [...]}")
    default = raw.get("default")
    return MockScript(
        vectors=tuple(tuple(float(v) for v in vec) for vec in raw["vectors"]),
        default=tuple(float(v) for v in default) if default is not None else None,
        output_kind=raw.get("output_kind", "probabilities"),
    )
