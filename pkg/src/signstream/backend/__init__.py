from .base import Backend
from .mock import MockBackend, MockScript, load_mock_script, make_mock_backend
from .onnx_backend import OnnxBackend, load_onnx_backend

__all__ = [
    "Backend",
    "MockBackend",
    "MockScript",
    "load_mock_script",
    "make_mock_backend",
    "OnnxBackend",
    "load_onnx_backend",
]
