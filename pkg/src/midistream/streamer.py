"""Infinite chunk-wise generation.

A stream is an unbounded note sequence produced 170 notes at a time: each
chunk re-encodes the most recent window of notes with onsets relativized to
start at 0, prefills a fresh KV cache, and samples forward.  Global
timestamps come from integer grid-step arithmetic (window base + relative
step), so onset monotonicity across chunk boundaries is exact, never a
float-rounding accident.
"""

import time
from collections import deque
from dataclasses import dataclass, field

from .decoding import ChunkRollover, DecodeState, GenParams, build_pipeline, decode_note_triplet
from .events import DEFAULT_VELOCITY, NoteEvent
from .tokenizer import OnsetOutOfRange, quantize
from .vocab import DEFAULT_VOCAB, VocabSpec

# Chunk size in notes; windows condition on at most this many.
CHUNK_NOTES = 170

# A chunk ends once the previous onset reaches this relative step (99s),
# leaving the tail of the time range for the final triplet instead of
# squeezing generation against the 100s vocabulary ceiling.
ROLLOVER_STEP = 9900


class SinkClosed(Exception):
    """The consumer is gone; the stream should wind down quietly."""


@dataclass(frozen=True)
class GridNote:
    """A note pinned to the vocabulary grid: exact integer bookkeeping."""

    onset_step: int
    dur_steps: int
    instrument: int
    pitch: int
    velocity: int = DEFAULT_VELOCITY

    def to_event(self, vocab: VocabSpec) -> NoteEvent:
        return NoteEvent(
            onset_s=vocab.step_to_seconds(self.onset_step),
            duration_s=vocab.step_to_seconds(self.dur_steps),
            instrument=self.instrument,
            pitch=self.pitch,
            velocity=self.velocity,
        )


@dataclass
class StreamChunk:
    index: int
    notes: "list[NoteEvent]"  # stream-global time
    window_notes: int  # how many notes conditioned this chunk
    context_tokens: int  # prefill + generated tokens, must stay <= 1024
    rolled_over: bool  # ended early because the window's time range ran out


@dataclass
class StreamSummary:
    notes: int
    chunks: int
    tokens: int
    wall_s: float

    @property
    def tok_s(self) -> float:
        return self.tokens / max(self.wall_s, 1e-3)

    @property
    def notes_s(self) -> float:
        return self.tok_s / 3

    def to_dict(self) -> dict:
        return {
            "notes": self.notes,
            "chunks": self.chunks,
            "tokens": self.tokens,
            "wall_s": self.wall_s,
            "tok_s": self.tok_s,
            "notes_s": self.notes_s,
        }


class StreamState:
    """Everything one live stream owns.

    The engine is anything with reset()/prefill(tokens)/step(token); the
    window ring holds the most recent CHUNK_NOTES emitted notes in global
    grid steps.  Parameter swaps happen between chunks only, so a chunk
    never mixes old and new settings.
    """

    def __init__(self, engine, params: GenParams, vocab: VocabSpec = DEFAULT_VOCAB):
        self.engine = engine
        self.vocab = vocab
        self.params = params
        self.window: "deque[GridNote]" = deque(maxlen=CHUNK_NOTES)
        self.decode = DecodeState.fresh(params, vocab)
        self.pipeline = build_pipeline(params, vocab)
        self.chunk_index = 0
        self.total_notes = 0

    def set_params(self, params: GenParams) -> None:
        """Swap sampling parameters; takes effect on the next chunk.

        The RNG is left alone so the stream stays one reproducible draw
        sequence; a changed seed only matters for fresh streams.
        """
        self.params = params
        self.decode.ensemble = params.ensemble
        self.pipeline = build_pipeline(params, self.vocab)


def start_stream(engine, params: GenParams, prompt=None, vocab: VocabSpec = DEFAULT_VOCAB) -> StreamState:
    """From scratch (context = SOS) or conditioned on the tail of a prompt.

    The last <= 170 prompt notes become the first window; generation
    continues after the prompt's final onset.
    """
    state = StreamState(engine, params, vocab)
    if prompt:
        grid = []
        for n in sorted(prompt, key=lambda n: (n.onset_s, n.instrument, n.pitch)):
            q = quantize(n, vocab)
            grid.append(
                GridNote(
                    onset_step=vocab.seconds_to_step(q.onset_s),
                    dur_steps=vocab.seconds_to_step(q.duration_s),
                    instrument=n.instrument,
                    pitch=n.pitch,
                    velocity=n.velocity,
                )
            )
        tail = grid[-CHUNK_NOTES:]
        span = tail[-1].onset_step - tail[0].onset_step
        if span >= vocab.max_time_steps:
            raise OnsetOutOfRange(
                f"prompt window spans {span} grid steps; the time range holds {vocab.max_time_steps}"
            )
        state.window.extend(tail)
    return state


def _build_window(state: StreamState):
    """Relativized context for the next chunk -> (base_step, token ids).

    Keeps the longest window suffix whose span leaves room to generate
    (span < ROLLOVER_STEP), so every chunk can emit at least one note.
    """
    vocab = state.vocab
    if not state.window:
        return 0, [vocab.sos_id]
    notes = list(state.window)
    while notes[-1].onset_step - notes[0].onset_step > ROLLOVER_STEP - 1:
        notes.pop(0)
    base = notes[0].onset_step
    ids = [vocab.sos_id]
    for g in notes:
        ids.append(vocab.time_to_id(g.onset_step - base))
        ids.append(vocab.dur_to_id(g.dur_steps))
        ids.append(vocab.note_to_id(g.instrument, g.pitch))
    return base, ids


def next_chunk(state: StreamState, max_notes: int = CHUNK_NOTES, on_note=None) -> StreamChunk:
    """Generate the next chunk (up to max_notes notes) in global time.

    Rebuilds the relativized window, resets and re-prefills the engine,
    then samples triplets until the chunk is full or the window's time
    range is exhausted (rollover).  on_note, when given, receives each
    NoteEvent the moment it exists — that is the streaming hook.
    """
    vocab = state.vocab
    base, ids = _build_window(state)
    state.decode.rebase(base)
    for tok in ids[1:]:
        state.decode.observe(tok)

    state.engine.reset()
    logits = state.engine.prefill(ids)

    produced: "list[NoteEvent]" = []
    rolled = False
    while len(produced) < max_notes:
        if state.decode.prev_onset_step >= ROLLOVER_STEP:
            rolled = True
            break
        try:
            (t_id, d_id, n_id), logits = decode_note_triplet(
                logits, state.engine.step, state.decode, state.params, state.pipeline
            )
        except ChunkRollover:
            rolled = True
            break
        instrument, pitch = vocab.id_to_note(n_id)
        g = GridNote(
            onset_step=base + vocab.id_to_time(t_id),
            dur_steps=vocab.id_to_dur(d_id),
            instrument=instrument,
            pitch=pitch,
        )
        state.window.append(g)
        state.total_notes += 1
        event = g.to_event(vocab)
        produced.append(event)
        if on_note is not None:
            on_note(event)

    chunk = StreamChunk(
        index=state.chunk_index,
        notes=produced,
        window_notes=(len(ids) - 1) // 3,
        context_tokens=len(ids) + 3 * len(produced),
        rolled_over=rolled,
    )
    state.chunk_index += 1
    return chunk


def run_stream(state: StreamState, sink=None, max_notes=None, stop=None) -> StreamSummary:
    """Drive next_chunk until a stop request or the note budget runs out.

    sink(note) is called per note and may block (bounded-queue
    back-pressure) or raise SinkClosed to end the stream cleanly.
    """
    t0 = time.perf_counter()
    delivered = 0
    chunks = 0

    def push(note: NoteEvent) -> None:
        nonlocal delivered
        if sink is not None:
            sink(note)
        delivered += 1

    try:
        while (stop is None or not stop.is_set()) and (max_notes is None or delivered < max_notes):
            budget = CHUNK_NOTES if max_notes is None else min(CHUNK_NOTES, max_notes - delivered)
            next_chunk(state, max_notes=budget, on_note=push)
            chunks += 1
    except SinkClosed:
        pass
    return StreamSummary(
        notes=delivered,
        chunks=chunks,
        tokens=3 * delivered,
        wall_s=time.perf_counter() - t0,
    )
