"""Real-time continuous sign recognition runtime."""

from .core import (
    EngineConfig,
    GlossEvent,
    Normalization,
    Vocabulary,
    load_config,
    load_vocabulary,
    validate_config,
)
from .decoder import DecoderState, PredictionRecord, Transcript, softmax
from .engine import RecognitionEngine
from .evaluation import (
    AnnotatedClip,
    EditCounts,
    SweepResult,
    edit_distance,
    run_offline,
    sweep,
    wer,
)
from .scheduler import FrameRing, WindowReady, hop_frames

__version__ = "0.1.0"
