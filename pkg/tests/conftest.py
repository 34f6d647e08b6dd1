import cv2
import numpy as np
import pytest

from signstream.core import EngineConfig, Normalization, Vocabulary


@pytest.fixture
def vocab():
    return Vocabulary(labels=("hello", "thanks", "please", "yes", "no"))


@pytest.fixture
def config():
    # symmetric normalization keeps closed-form pixel arithmetic simple
    return EngineConfig(
        window_len=4,
        stride_fraction=0.5,
        avg_size=2,
        threshold=0.5,
        input_resolution=(32, 32),
        normalization=Normalization(mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5)),
    )


def make_jpeg(height=480, width=640, color=(128, 128, 128), quality=90):
    """Encode a solid-color RGB frame as baseline JPEG bytes."""
    rgb = np.full((height, width, 3), color, dtype=np.uint8)
    ok, buf = cv2.imencode(".jpg", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR),
                           [cv2.IMWRITE_JPEG_QUALITY, quality])
    assert ok
    return buf.tobytes()


def random_probs(rng, n):
    """A valid probability vector drawn uniformly from the simplex."""
    v = rng.dirichlet(np.ones(n))
    return v / v.sum()
