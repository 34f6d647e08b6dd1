"""WER scoring, offline clip evaluation and parameter-grid sweeps.

WER is pooled across clips (sum of errors over sum of reference lengths),
the standard ASR convention. Sweeps recompute inference only when the
stride changes, since window placement depends on the stride but the
per-window probabilities do not depend on threshold or averaging size.
"""

from __future__ import annotations

import io
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import cv2
import numpy as np

from .backend import Backend
from .core import EngineConfig, Vocabulary
from .decoder import DecoderState, PredictionRecord, Transcript
from .engine import RecognitionEngine
from .errors import EmptyReference, ParseError, SourceError, UnknownLabel
from .preprocess import RawFrame

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")


# ---------------------------------------------------------------------------
# edit distance / WER

@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def __add__(self, other: "EditCounts") -> "EditCounts":
        return EditCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> EditCounts:
    """Minimal (S, D, I) alignment between reference and hypothesis.

    Unit costs; ties between minimal alignments resolve toward fewer
    substitutions, then fewer insertions, so the backtrace is
    deterministic. Raises EmptyReference for an empty reference.
    """
    if len(ref) == 0:
        raise EmptyReference("reference gloss sequence is empty")
    n, m = len(ref), len(hyp)
    # dp[i][j] = (S, D, I) for ref[:i] vs hyp[:j], minimal by (total, S, I)
    dp = [[None] * (m + 1) for _ in range(n + 1)]
    dp[0][0] = (0, 0, 0)
    for j in range(1, m + 1):
        dp[0][j] = (0, 0, j)
    for i in range(1, n + 1):
        dp[i][0] = (0, i, 0)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            s, d, ins = dp[i - 1][j - 1]
            diag = (s, d, ins) if ref[i - 1] == hyp[j - 1] else (s + 1, d, ins)
            s, d, ins = dp[i - 1][j]
            down = (s, d + 1, ins)
            s, d, ins = dp[i][j - 1]
            right = (s, d, ins + 1)
            dp[i][j] = min(diag, down, right, key=lambda c: (c[0] + c[1] + c[2], c[0], c[2]))
    s, d, ins = dp[n][m]
    return EditCounts(substitutions=s, deletions=d, insertions=ins, ref_len=n)


def wer(counts: EditCounts) -> float:
    """(S + D + I) / N; may exceed 1.0 when insertions dominate."""
    if counts.ref_len < 1:
        raise EmptyReference("reference length must be >= 1")
    return counts.distance / counts.ref_len


# ---------------------------------------------------------------------------
# annotated clips and prediction logs

@dataclass(frozen=True)
class AnnotatedClip:
    """A continuous clip (frame directory or prediction log) plus its
    reference gloss sequence."""

    source: str
    reference: tuple[str, ...]

    def __post_init__(self):
        if not self.reference:
            raise EmptyReference(f"clip {self.source!r} has an empty reference")


def load_annotations(path: str) -> list[AnnotatedClip]:
    """Read clips from JSON Lines: {"source": "...", "glosses": [...]}.

    Relative sources resolve against the annotations file's directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    clips = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ParseError(f"{path}:{lineno}: invalid JSON: {e}") from e
                source = obj["source"]
                if not os.path.isabs(source):
                    source = os.path.join(base, source)
                clips.append(AnnotatedClip(source=source, reference=tuple(obj["glosses"])))
    except OSError as e:
        raise SourceError(f"cannot read annotations {path}: {e}") from e
    return clips


def write_prediction_log(records: Sequence[PredictionRecord], target) -> None:
    """Write records as JSON Lines, one record per line."""
    own = isinstance(target, str)
    f = open(target, "w", encoding="utf-8") if own else target
    try:
        for record in records:
            f.write(json.dumps(record.to_dict()) + "\n")
    finally:
        if own:
            f.close()


def read_prediction_log(source) -> list[PredictionRecord]:
    own = isinstance(source, str)
    f = open(source, "r", encoding="utf-8") if own else source
    try:
        records = []
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(PredictionRecord(
                window_ordinal=obj["window_ordinal"],
                frame_start=obj["frame_start"],
                frame_end=obj["frame_end"],
                probs=np.asarray(obj["probs"], dtype=np.float64),
            ))
        return records
    finally:
        if own:
            f.close()


# ---------------------------------------------------------------------------
# offline evaluation

@dataclass
class OfflineResult:
    transcript: Transcript
    counts: EditCounts
    wer: float
    prediction_log: list[PredictionRecord]
    warnings: list[str] = field(default_factory=list)


def _list_frame_files(directory: str) -> list[str]:
    try:
        names = sorted(os.listdir(directory))
    except OSError as e:
        raise SourceError(f"cannot read frame directory {directory}: {e}") from e
    files = [os.path.join(directory, n) for n in names
             if n.lower().endswith(IMAGE_EXTENSIONS)]
    if not files:
        raise SourceError(f"no frame images in {directory}")
    return files


def _check_reference(clip: AnnotatedClip, vocab: Vocabulary) -> None:
    for label in clip.reference:
        if label not in vocab:
            raise UnknownLabel(label)


def decode_records(records: Sequence[PredictionRecord], vocab: Vocabulary,
                   avg_size: int, threshold: float) -> Transcript:
    """Replay smooth -> gate -> collapse over a prediction log."""
    decoder = DecoderState(vocab, avg_size, threshold)
    transcript = Transcript()
    for record in records:
        event = decoder.step(record)
        if event is not None:
            transcript.append(event)
    return transcript


def run_clip_inference(clip: AnnotatedClip, cfg: EngineConfig,
                       vocab: Vocabulary, backend: Backend) -> list[PredictionRecord]:
    """Feed a clip's frames through the pipeline; return the per-window
    probability records (the decoder output is discarded here)."""
    backend.reset()
    engine = RecognitionEngine(cfg, vocab, backend)
    if os.path.isdir(clip.source):
        for i, path in enumerate(_list_frame_files(clip.source)):
            bgr = cv2.imread(path, cv2.IMREAD_COLOR)
            if bgr is None:
                raise SourceError(f"cannot decode frame image {path}")
            raw = RawFrame(pixels=cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB),
                           capture_index=i, capture_time=float(i))
            window = engine.ingest_raw(raw)
            if window is not None:
                engine.process_window(window)
    elif os.path.isfile(clip.source):
        return read_prediction_log(clip.source)
    else:
        raise SourceError(f"clip source not found: {clip.source}")
    return engine.prediction_log


def run_offline(clip: AnnotatedClip, cfg: EngineConfig, vocab: Vocabulary,
                backend: Optional[Backend] = None,
                records: Optional[Sequence[PredictionRecord]] = None) -> OfflineResult:
    """Evaluate one clip: decode a transcript and score it against the
    reference. Pass `records` to replay a prediction log instead of
    running inference."""
    _check_reference(clip, vocab)
    warnings: list[str] = []
    if records is None:
        if backend is None:
            raise ValueError("run_offline needs a backend or prediction records")
        records = run_clip_inference(clip, cfg, vocab, backend)
    if not records:
        warnings.append(
            f"clip {clip.source!r} produced no windows (shorter than the "
            f"window length?); transcript is empty")
        log.warning(warnings[-1])
    transcript = decode_records(records, vocab, cfg.avg_size, cfg.threshold)
    counts = edit_distance(list(clip.reference), transcript.labels())
    return OfflineResult(
        transcript=transcript,
        counts=counts,
        wer=wer(counts),
        prediction_log=list(records),
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# parameter sweep

@dataclass(frozen=True)
class SweepCell:
    threshold: float
    stride: float
    avg_size: int
    wer: Optional[float]
    events: int
    windows: int
    error: Optional[str] = None


@dataclass
class SweepResult:
    thresholds: tuple[float, ...]
    stride_fractions: tuple[float, ...]
    avg_sizes: tuple[int, ...]
    cells: list[SweepCell]

    def cell(self, threshold: float, stride: float, avg_size: int) -> SweepCell:
        for c in self.cells:
            if (c.threshold, c.stride, c.avg_size) == (threshold, stride, avg_size):
                return c
        raise KeyError((threshold, stride, avg_size))

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("threshold,stride,avg_size,wer,events,windows\n")
        for c in self.cells:
            wer_s = f"{c.wer:.6g}" if c.wer is not None else "nan"
            out.write(f"{c.threshold:g},{c.stride:g},{c.avg_size},{wer_s},"
                      f"{c.events},{c.windows}\n")
        return out.getvalue()

    def to_markdown(self) -> str:
        """Grid rendering grouped by threshold: rows are averaging sizes,
        columns are stride fractions."""
        lines = ["Inference time WER with different parameters", ""]
        header = "| avg size | " + " | ".join(f"{s:g}" for s in self.stride_fractions) + " |"
        rule = "|" + "---|" * (len(self.stride_fractions) + 1)
        for tau in self.thresholds:
            lines.append(f"**threshold={tau:g}**")
            lines.append("")
            lines.append(header)
            lines.append(rule)
            for k in self.avg_sizes:
                row = [str(k)]
                for s in self.stride_fractions:
                    c = self.cell(tau, s, k)
                    row.append("failed" if c.wer is None else f"{c.wer:.3g}")
                lines.append("| " + " | ".join(row) + " |")
            lines.append("")
        return "\n".join(lines)


def sweep(clips: Sequence[AnnotatedClip], cfg: EngineConfig, vocab: Vocabulary,
          thresholds: Sequence[float], stride_fractions: Sequence[float],
          avg_sizes: Sequence[int],
          backend: Optional[Backend] = None,
          log_provider: Optional[Callable[[AnnotatedClip, float], list]] = None,
          ) -> SweepResult:
    """Evaluate the (threshold x stride x avg-size) grid.

    Inference runs once per (stride, clip) and is replayed for every
    (threshold, avg_size) pair. `log_provider(clip, stride)` replaces
    inference when decoding from saved prediction logs. A failing cell is
    recorded with its error instead of aborting the sweep.
    """
    if not clips:
        raise ValueError("sweep needs at least one clip")
    if not (thresholds and stride_fractions and avg_sizes):
        raise ValueError("sweep grid axes must be non-empty")
    if backend is None and log_provider is None:
        raise ValueError("sweep needs a backend or a log provider")
    for clip in clips:
        _check_reference(clip, vocab)

    cells: list[SweepCell] = []
    for s in stride_fractions:
        stride_cfg = cfg.with_updates(stride_fraction=float(s))
        clip_records: list = []
        stride_error: Optional[str] = None
        try:
            for clip in clips:
                if log_provider is not None:
                    clip_records.append(list(log_provider(clip, s)))
                else:
                    clip_records.append(run_clip_inference(clip, stride_cfg, vocab, backend))
        except Exception as e:
            stride_error = f"{type(e).__name__}: {e}"
            log.warning("sweep inference pass failed at stride %g: %s", s, stride_error)

        for tau in thresholds:
            for k in avg_sizes:
                if stride_error is not None:
                    cells.append(SweepCell(float(tau), float(s), int(k),
                                           wer=None, events=0, windows=0,
                                           error=stride_error))
                    continue
                try:
                    total = EditCounts(0, 0, 0, 0)
                    events = 0
                    windows = 0
                    for clip, records in zip(clips, clip_records):
                        transcript = decode_records(records, vocab, int(k), float(tau))
                        total = total + edit_distance(list(clip.reference),
                                                      transcript.labels())
                        events += len(transcript)
                        windows += len(records)
                    cells.append(SweepCell(float(tau), float(s), int(k),
                                           wer=total.distance / total.ref_len,
                                           events=events, windows=windows))
                except Exception as e:
                    cells.append(SweepCell(float(tau), float(s), int(k),
                                           wer=None, events=0, windows=0,
                                           error=f"{type(e).__name__}: {e}"))
    order = {(float(t), float(s), int(k)): i
             for i, (t, s, k) in enumerate(
                 (t, s, k) for t in thresholds for s in stride_fractions for k in avg_sizes)}
    cells.sort(key=lambda c: order[(c.threshold, c.stride, c.avg_size)])
    return SweepResult(
        thresholds=tuple(float(t) for t in thresholds),
        stride_fractions=tuple(float(s) for s in stride_fractions),
        avg_sizes=tuple(int(k) for k in avg_sizes),
        cells=cells,
    )


def directory_log_provider(logs_dir: str) -> Callable[[AnnotatedClip, float], list]:
    """Prediction logs saved as <logs_dir>/stride_<s>/<clip-stem>.jsonl."""
    def provider(clip: AnnotatedClip, stride: float):
        stem = os.path.splitext(os.path.basename(clip.source.rstrip("/")))[0]
        path = os.path.join(logs_dir, f"stride_{stride:g}", f"{stem}.jsonl")
        if not os.path.isfile(path):
            raise SourceError(f"prediction log not found: {path}")
        return read_prediction_log(path)
    return provider
