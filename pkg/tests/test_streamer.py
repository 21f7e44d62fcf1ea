import math
import queue
import threading

import numpy as np
import pytest

from midistream.decoding import GenParams
from midistream.events import NoteEvent
from midistream.streamer import (
    CHUNK_NOTES,
    ROLLOVER_STEP,
    SinkClosed,
    _build_window,
    next_chunk,
    run_stream,
    start_stream,
)
from midistream.testing import ScriptedEngine, ramp_logit_table, static_engine
from midistream.tokenizer import OnsetOutOfRange
from midistream.vocab import DEFAULT_VOCAB

V = DEFAULT_VOCAB
DENSE_TABLE = ramp_logit_table(time_slope=0.4)


def dense_stream(seed=1, **params_kw):
    return start_stream(static_engine(DENSE_TABLE), GenParams(seed=seed, **params_kw))


def prompt_notes(n, start_s=0.0, gap_s=0.1, instrument=0):
    return [
        NoteEvent(onset_s=start_s + i * gap_s, duration_s=0.2, instrument=instrument, pitch=40 + i % 40)
        for i in range(n)
    ]


class TestStartStream:
    def test_fresh_context_is_sos_only(self):
        state = dense_stream()
        base, ids = _build_window(state)
        assert (base, ids) == (0, [V.sos_id])

    def test_long_prompt_keeps_last_170(self):
        notes = prompt_notes(200)
        state = start_stream(static_engine(DENSE_TABLE), GenParams(seed=0), prompt=notes)
        assert len(state.window) == 170
        assert state.window[0].onset_step == V.seconds_to_step(notes[30].onset_s)

    def test_generation_follows_prompt(self):
        notes = prompt_notes(10, start_s=7.1)  # ends at 8.0s
        state = start_stream(static_engine(DENSE_TABLE), GenParams(seed=2), prompt=notes)
        chunk = next_chunk(state)
        assert chunk.notes[0].onset_s >= 8.0
        assert chunk.window_notes == 10

    def test_prompt_window_too_wide_rejected(self):
        notes = [
            NoteEvent(onset_s=0.0, duration_s=0.1, instrument=0, pitch=60),
            NoteEvent(onset_s=101.0, duration_s=0.1, instrument=0, pitch=62),
        ]
        with pytest.raises(OnsetOutOfRange):
            start_stream(static_engine(DENSE_TABLE), GenParams(seed=0), prompt=notes)

    def test_unsorted_prompt_is_canonicalized(self):
        notes = list(reversed(prompt_notes(5)))
        state = start_stream(static_engine(DENSE_TABLE), GenParams(seed=0), prompt=notes)
        steps = [g.onset_step for g in state.window]
        assert steps == sorted(steps)


class TestNextChunk:
    def test_first_chunk_is_full(self):
        chunk = next_chunk(dense_stream())
        assert len(chunk.notes) == CHUNK_NOTES
        assert not chunk.rolled_over
        onsets = [n.onset_s for n in chunk.notes]
        assert onsets == sorted(onsets)
        assert chunk.window_notes == 0
        assert chunk.context_tokens == 1 + 3 * CHUNK_NOTES

    def test_generated_notes_carry_default_velocity(self):
        chunk = next_chunk(dense_stream(), max_notes=5)
        assert all(n.velocity == 80 for n in chunk.notes)

    def test_windows_relativize_to_zero(self):
        state = dense_stream()
        next_chunk(state)
        next_chunk(state)
        base, ids = _build_window(state)
        assert ids[1] == V.time_to_id(0)  # first time token of the window
        # pairwise gaps survive relativization exactly
        rel_steps = [V.id_to_time(ids[i]) for i in range(1, len(ids), 3)]
        global_steps = [g.onset_step for g in state.window]
        assert np.array_equal(np.diff(rel_steps), np.diff(global_steps))

    def test_stitching_over_50_chunks_random_engine(self):
        # seeded-noise logits: sparse onsets, heavy rollover traffic
        state = start_stream(ScriptedEngine(seed=3), GenParams(seed=3))
        prev_last = -1.0
        for _ in range(50):
            chunk = next_chunk(state)
            assert chunk.context_tokens <= 1024
            if not chunk.notes:
                continue
            onsets = [n.onset_s for n in chunk.notes]
            assert onsets == sorted(onsets)
            assert onsets[0] >= prev_last
            prev_last = onsets[-1]
            assert len(state.window) <= CHUNK_NOTES

    def test_sparse_scenario_rolls_over_and_continues(self):
        # logits prefer the latest representable onset: every chunk ends early
        table = ramp_logit_table(time_slope=-0.4)
        state = start_stream(static_engine(table), GenParams(seed=5))
        last = -1.0
        for _ in range(5):
            chunk = next_chunk(state)
            assert chunk.rolled_over
            assert 0 < len(chunk.notes) < CHUNK_NOTES
            assert chunk.notes[0].onset_s >= last
            last = chunk.notes[-1].onset_s
        # the window re-relativizes each time, so the stream keeps advancing
        assert state.window[-1].onset_step > ROLLOVER_STEP

    def test_max_notes_truncates(self):
        chunk = next_chunk(dense_stream(), max_notes=12)
        assert len(chunk.notes) == 12

    def test_params_swap_is_chunk_atomic(self):
        state = dense_stream(ensemble={5})
        first = next_chunk(state, max_notes=30)
        state.set_params(state.params.merged({"ensemble": [7]}))
        second = next_chunk(state, max_notes=30)
        assert {n.instrument for n in first.notes} == {5}
        assert {n.instrument for n in second.notes} == {7}


class TestRunStream:
    def test_note_budget_and_chunk_count(self):
        summary = run_stream(dense_stream(), max_notes=1000)
        assert summary.notes == 1000
        assert summary.chunks == math.ceil(1000 / CHUNK_NOTES)
        assert summary.tokens == 3000
        assert summary.tok_s > 0
        assert summary.notes_s == summary.tok_s / 3

    def test_immediate_stop(self):
        stop = threading.Event()
        stop.set()
        summary = run_stream(dense_stream(), max_notes=100, stop=stop)
        assert summary.notes == 0 and summary.chunks == 0

    def test_sink_closed_mid_stream(self):
        got = []

        def sink(note):
            if len(got) >= 50:
                raise SinkClosed
            got.append(note)

        summary = run_stream(dense_stream(), sink=sink, max_notes=500)
        assert summary.notes == 50 and len(got) == 50

    def test_bounded_queue_backpressure_no_drops(self):
        q = queue.Queue(maxsize=10)
        received = []

        def consumer():
            while True:
                item = q.get()
                if item is None:
                    return
                received.append(item)

        t = threading.Thread(target=consumer)
        t.start()
        sent = []

        def sink(note):
            sent.append(note)
            q.put(note)  # blocks when the consumer lags

        summary = run_stream(dense_stream(), sink=sink, max_notes=60)
        q.put(None)
        t.join(timeout=5)
        assert summary.notes == 60
        assert received == sent

    def test_deterministic_for_fixed_seed(self):
        a = []
        b = []
        run_stream(dense_stream(seed=9), sink=a.append, max_notes=300)
        run_stream(dense_stream(seed=9), sink=b.append, max_notes=300)
        assert a == b
        c = []
        run_stream(dense_stream(seed=10), sink=c.append, max_notes=300)
        assert a != c
