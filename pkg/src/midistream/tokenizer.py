"""Note events <-> triplet token sequences.

Encoding quantizes onsets/durations to the vocabulary grid and emits one
(time, duration, note) triplet per note.  Sequences optionally start with
SOS and are capped at ``MAX_SEQ_TOKENS`` ids — 341 notes plus SOS.
"""

from typing import Iterable, Sequence

from .events import DEFAULT_VELOCITY, NoteEvent, sort_notes
from .vocab import DEFAULT_VOCAB, TokenKind, VocabSpec

# Training frame: SOS + 341 triplets.
MAX_SEQ_TOKENS = 1024
MAX_NOTES_PER_SEQ = (MAX_SEQ_TOKENS - 1) // 3


class TokenizerError(ValueError):
    pass


class OnsetOutOfRange(TokenizerError):
    """Quantized onset does not fit the time-token range."""


class KindMismatch(TokenizerError):
    """A token id was used in a slot of the wrong kind."""


class TooLong(TokenizerError):
    """Sequence would exceed the token cap."""


class GrammarViolation(TokenizerError):
    """Token stream broke the Time→Duration→Note cycle."""

    def __init__(self, index: int, expected: TokenKind, found: "TokenKind | None" = None):
        self.index = index
        self.expected = expected
        self.found = found
        what = f"found {found.value}" if found is not None else "sequence ended"
        super().__init__(f"expected {expected.value} token at index {index}, {what}")


def quantize(note: NoteEvent, vocab: VocabSpec = DEFAULT_VOCAB) -> NoteEvent:
    """Snap a note to the vocabulary grid.

    Onset rounds to the nearest time step; duration rounds to the nearest
    step and clamps into [1, max_dur_steps] — a note must sound, and nothing
    outlasts the duration range.
    """
    onset_step = vocab.seconds_to_step(note.onset_s)
    dur_step = min(max(vocab.seconds_to_step(note.duration_s), 1), vocab.max_dur_steps)
    return NoteEvent(
        onset_s=vocab.step_to_seconds(onset_step),
        duration_s=vocab.step_to_seconds(dur_step),
        instrument=note.instrument,
        pitch=note.pitch,
        velocity=note.velocity,
    )


def encode_note(note: NoteEvent, vocab: VocabSpec = DEFAULT_VOCAB) -> tuple[int, int, int]:
    """One note -> (time_id, dur_id, note_id)."""
    onset_step = vocab.seconds_to_step(note.onset_s)
    if not 0 <= onset_step < vocab.max_time_steps:
        raise OnsetOutOfRange(
            f"onset {note.onset_s}s quantizes to step {onset_step}, "
            f"outside [0, {vocab.max_time_steps})"
        )
    dur_step = min(max(vocab.seconds_to_step(note.duration_s), 1), vocab.max_dur_steps)
    return (
        vocab.time_to_id(onset_step),
        vocab.dur_to_id(dur_step),
        vocab.note_to_id(note.instrument, note.pitch),
    )


def decode_note(
    time_id: int, dur_id: int, note_id: int, vocab: VocabSpec = DEFAULT_VOCAB
) -> NoteEvent:
    """(time_id, dur_id, note_id) -> note.  Velocity takes the default."""
    for tid, want in ((time_id, TokenKind.TIME), (dur_id, TokenKind.DURATION), (note_id, TokenKind.NOTE)):
        got = vocab.kind_of(tid)
        if got is not want:
            raise KindMismatch(f"id {tid} is a {got.value} token, expected {want.value}")
    instrument, pitch = vocab.id_to_note(note_id)
    return NoteEvent(
        onset_s=vocab.step_to_seconds(vocab.id_to_time(time_id)),
        duration_s=vocab.step_to_seconds(vocab.id_to_dur(dur_id)),
        instrument=instrument,
        pitch=pitch,
        velocity=DEFAULT_VELOCITY,
    )


def encode_sequence(
    notes: Iterable[NoteEvent],
    vocab: VocabSpec = DEFAULT_VOCAB,
    with_sos: bool = True,
    auto_sort: bool = False,
    max_tokens: "int | None" = MAX_SEQ_TOKENS,
) -> list[int]:
    """Notes -> flat token id list, optionally led by SOS.

    Input must already be in canonical onset order (ties by instrument then
    pitch) unless auto_sort is set.  max_tokens=None lifts the length cap.
    """
    notes = list(notes)
    ordered = sort_notes(notes)
    if notes != ordered:
        if not auto_sort:
            raise TokenizerError("notes not in canonical onset order (pass auto_sort=True to sort)")
        notes = ordered

    total = (1 if with_sos else 0) + 3 * len(notes)
    if max_tokens is not None and total > max_tokens:
        raise TooLong(f"{len(notes)} notes need {total} tokens, cap is {max_tokens}")

    ids: list[int] = [vocab.sos_id] if with_sos else []
    for note in notes:
        ids.extend(encode_note(note, vocab))
    return ids


_CYCLE = (TokenKind.TIME, TokenKind.DURATION, TokenKind.NOTE)


def decode_sequence(seq: Sequence[int], vocab: VocabSpec = DEFAULT_VOCAB) -> list[NoteEvent]:
    """Token ids -> onset-sorted notes.  A single leading SOS is accepted.

    Raises GrammarViolation at the first index whose kind breaks the
    Time→Duration→Note cycle (indices count the SOS if present).
    """
    start = 0
    if seq and vocab.kind_of(seq[0]) is TokenKind.SOS:
        start = 1

    notes = []
    for i in range(start, len(seq)):
        expected = _CYCLE[(i - start) % 3]
        found = vocab.kind_of(seq[i])
        if found is not expected:
            raise GrammarViolation(i, expected, found)
        if expected is TokenKind.NOTE:
            notes.append(decode_note(seq[i - 2], seq[i - 1], seq[i], vocab))

    body = len(seq) - start
    if body % 3 != 0:
        raise GrammarViolation(len(seq), _CYCLE[body % 3])
    return sort_notes(notes)
