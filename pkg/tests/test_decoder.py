import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from signstream.core import Vocabulary
from signstream.decoder import DecoderState, PredictionRecord, softmax
from signstream.errors import DimensionMismatch, InvalidScores

from conftest import random_probs


def record(ordinal, probs, start=None, end=None):
    start = ordinal * 2 if start is None else start
    end = start + 3 if end is None else end
    return PredictionRecord(window_ordinal=ordinal, frame_start=start,
                            frame_end=end, probs=np.asarray(probs, dtype=np.float64))


@pytest.fixture
def vocab2():
    return Vocabulary(labels=("A", "B"))


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])

    def test_closed_form(self):
        np.testing.assert_allclose(softmax(np.array([math.log(2), 0.0])),
                                   [2 / 3, 1 / 3], rtol=1e-12)

    def test_large_magnitude_no_overflow(self):
        # extended-precision oracle via mpmath
        import mpmath
        scores = [1000.0, 0.0]
        exact = [float(mpmath.exp(s - 1000) / (mpmath.exp(-1000) + mpmath.exp(0)))
                 for s in scores]
        out = softmax(np.array(scores))
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, exact, atol=1e-15)

    def test_nan_rejected(self):
        with pytest.raises(InvalidScores):
            softmax(np.array([np.nan, 1.0]))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(min_value=-1000, max_value=1000, allow_nan=False),
                    min_size=2, max_size=20))
    def test_sums_to_one(self, scores):
        out = softmax(np.array(scores))
        assert abs(out.sum() - 1.0) < 1e-6
        assert np.all(out >= 0)


class TestSmooth:
    def test_k1_identity(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.5)
        p = np.array([0.3, 0.7])
        np.testing.assert_array_equal(state.smooth(record(0, p)), p)

    def test_k2_arithmetic_mean(self, vocab2):
        state = DecoderState(vocab2, avg_size=2, threshold=0.5)
        state.smooth(record(0, [0.2, 0.8]))
        np.testing.assert_allclose(state.smooth(record(1, [0.6, 0.4])), [0.4, 0.6])

    def test_warmup_averages_available_records(self, vocab2):
        state = DecoderState(vocab2, avg_size=3, threshold=0.5)
        state.smooth(record(0, [0.2, 0.8]))
        out = state.smooth(record(1, [0.4, 0.6]))
        np.testing.assert_allclose(out, [0.3, 0.7])  # mean of 2, not 3

    def test_eviction_beyond_k(self, vocab2):
        state = DecoderState(vocab2, avg_size=2, threshold=0.5)
        state.smooth(record(0, [1.0, 0.0]))
        state.smooth(record(1, [0.0, 1.0]))
        out = state.smooth(record(2, [0.0, 1.0]))
        np.testing.assert_allclose(out, [0.0, 1.0])  # first record evicted

    def test_dimension_mismatch(self, vocab2):
        state = DecoderState(vocab2, avg_size=2, threshold=0.5)
        state.smooth(record(0, [0.5, 0.5]))
        with pytest.raises(DimensionMismatch):
            state.smooth(record(1, [0.3, 0.3, 0.4]))

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 5),
           n=st.integers(1, 12))
    def test_preserves_normalization(self, seed, k, n):
        vocab = Vocabulary(labels=("a", "b", "c", "d"))
        state = DecoderState(vocab, avg_size=k, threshold=0.5)
        rng = np.random.default_rng(seed)
        for i in range(n):
            out = state.smooth(record(i, random_probs(rng, 4)))
            assert abs(out.sum() - 1.0) < 1e-5
            assert np.all(out >= 0)


class TestGate:
    def test_confident_max_passes(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.9)
        assert state.gate(np.array([0.05, 0.95])) == (1, 0.95)

    def test_below_threshold_suppressed(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.9)
        assert state.gate(np.array([0.3, 0.7])) is None

    def test_tie_breaks_to_lowest_index(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.5)
        assert state.gate(np.array([0.5, 0.5])) == (0, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1),
           tau=st.floats(min_value=0.0, max_value=1.0))
    def test_returns_global_argmax(self, seed, tau):
        vocab = Vocabulary(labels=("a", "b", "c"))
        state = DecoderState(vocab, avg_size=1, threshold=tau)
        rng = np.random.default_rng(seed)
        probs = random_probs(rng, 3)
        gated = state.gate(probs)
        if gated is None:
            assert probs.max() < tau
        else:
            idx, conf = gated
            assert conf == probs.max()
            assert probs[idx] == probs.max()


def drive(state, gated_sequence):
    """Feed a scripted gate-output sequence through collapse."""
    events = []
    for i, gated in enumerate(gated_sequence):
        event = state.collapse(gated, frame_start=i * 2, frame_end=i * 2 + 3)
        if event is not None:
            events.append(event.label)
    return events


class TestCollapse:
    def test_repeats_collapse_to_one_event(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.5)
        assert drive(state, [(0, 0.9), (0, 0.9), (0, 0.9)]) == ["A"]

    def test_gap_resets_suppression(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.5)
        assert drive(state, [(0, 0.9), None, (0, 0.9)]) == ["A", "A"]

    def test_alternation(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.5)
        # hand-simulated: A emits, B emits, second B suppressed, A emits
        assert drive(state, [(0, 0.9), (1, 0.9), (1, 0.9), (0, 0.9)]) == ["A", "B", "A"]

    def test_event_fields(self, vocab2):
        state = DecoderState(vocab2, avg_size=1, threshold=0.5)
        event = state.collapse((1, 0.93), frame_start=120, frame_end=151)
        assert event.label == "B"
        assert event.gloss_id == 1
        assert event.confidence == 0.93
        assert (event.frame_start, event.frame_end) == (120, 151)


class TestThresholdMonotonicity:
    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3))
    def test_raising_tau_never_adds_gate_passes(self, seed, k):
        vocab = Vocabulary(labels=("a", "b", "c"))
        rng = np.random.default_rng(seed)
        stream = [random_probs(rng, 3) for _ in range(30)]
        counts = []
        for tau in (0.0, 0.34, 0.5, 0.7, 0.9, 1.0):
            state = DecoderState(vocab, avg_size=k, threshold=tau)
            n = 0
            for i, p in enumerate(stream):
                if state.gate(state.smooth(record(i, p))) is not None:
                    n += 1
            counts.append(n)
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_gap_reset_can_split_events_at_higher_tau(self, vocab2):
        # post-collapse event counts are NOT monotone in tau: a dip below
        # a higher threshold resets duplicate suppression, splitting one
        # sustained sign into two events. Documented behavior of the
        # gap-reset rule.
        stream = [np.array([0.95, 0.05]), np.array([0.6, 0.4]), np.array([0.95, 0.05])]

        def run(tau):
            state = DecoderState(vocab2, avg_size=1, threshold=tau)
            return sum(1 for i, p in enumerate(stream)
                       if state.step(record(i, p)) is not None)

        assert run(0.5) == 1
        assert run(0.9) == 2
