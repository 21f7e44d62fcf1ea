"""Token vocabulary for triplet MIDI encoding.

Every note becomes exactly three tokens — time, duration, note — drawn from
three disjoint id ranges laid out back to back:

    [0, max_time_steps)              onset time, 10 ms grid
    [.., +max_dur_steps)             duration, 1..max_dur_steps grid steps
    [.., +instruments*pitches)       (instrument, pitch) pairs
    last id                          start-of-sequence

With the defaults this is 10000 + 1000 + 129*128 + 1 = 27513 ids, SOS = 27512.
"""

import enum
import json
from dataclasses import dataclass


class TokenKind(enum.Enum):
    TIME = "time"
    DURATION = "duration"
    NOTE = "note"
    SOS = "sos"


@dataclass(frozen=True)
class VocabSpec:
    """Vocabulary geometry.  All id arithmetic lives here.

    Defaults give the 27513-token vocabulary used throughout; the fields are
    kept explicit so tests can build tiny vocabularies where exhaustive
    checks are cheap.
    """

    time_resolution_ms: int = 10
    max_time_steps: int = 10000
    max_dur_steps: int = 1000
    num_instruments: int = 129
    num_pitches: int = 128

    # ---- derived layout ----

    @property
    def time_offset(self) -> int:
        return 0

    @property
    def dur_offset(self) -> int:
        return self.max_time_steps

    @property
    def note_offset(self) -> int:
        return self.max_time_steps + self.max_dur_steps

    @property
    def sos_id(self) -> int:
        return self.note_offset + self.num_instruments * self.num_pitches

    @property
    def vocab_size(self) -> int:
        return self.sos_id + 1

    @property
    def time_resolution_s(self) -> float:
        return self.time_resolution_ms / 1000.0

    @property
    def max_onset_s(self) -> float:
        """Largest representable onset, inclusive."""
        return (self.max_time_steps - 1) * self.time_resolution_s

    @property
    def max_duration_s(self) -> float:
        return self.max_dur_steps * self.time_resolution_s

    # ---- id classification ----

    def kind_of(self, token_id: int) -> TokenKind:
        if not 0 <= token_id < self.vocab_size:
            raise ValueError(f"token id {token_id} outside vocabulary of size {self.vocab_size}")
        if token_id < self.dur_offset:
            return TokenKind.TIME
        if token_id < self.note_offset:
            return TokenKind.DURATION
        if token_id < self.sos_id:
            return TokenKind.NOTE
        return TokenKind.SOS

    # ---- time <-> grid ----

    def seconds_to_step(self, seconds: float) -> int:
        """Round seconds to the nearest grid step (half-way rounds up)."""
        # int(x + 0.5) would mis-round negatives, but negatives are rejected
        # by callers before they get here.
        return int(seconds / self.time_resolution_s + 0.5)

    def step_to_seconds(self, step: int) -> float:
        return step * self.time_resolution_s

    # ---- field <-> id ----

    def time_to_id(self, step: int) -> int:
        if not 0 <= step < self.max_time_steps:
            raise ValueError(f"time step {step} outside [0, {self.max_time_steps})")
        return self.time_offset + step

    def id_to_time(self, token_id: int) -> int:
        return token_id - self.time_offset

    def dur_to_id(self, steps: int) -> int:
        """Duration steps are 1-based: 1 grid step is the shortest note."""
        if not 1 <= steps <= self.max_dur_steps:
            raise ValueError(f"duration {steps} steps outside [1, {self.max_dur_steps}]")
        return self.dur_offset + steps - 1

    def id_to_dur(self, token_id: int) -> int:
        return token_id - self.dur_offset + 1

    def note_to_id(self, instrument: int, pitch: int) -> int:
        if not 0 <= instrument < self.num_instruments:
            raise ValueError(f"instrument {instrument} outside [0, {self.num_instruments})")
        if not 0 <= pitch < self.num_pitches:
            raise ValueError(f"pitch {pitch} outside [0, {self.num_pitches})")
        return self.note_offset + instrument * self.num_pitches + pitch

    def id_to_note(self, token_id: int) -> tuple[int, int]:
        rel = token_id - self.note_offset
        return rel // self.num_pitches, rel % self.num_pitches

    def instrument_of_note_id(self, token_id: int) -> int:
        return (token_id - self.note_offset) // self.num_pitches

    # ---- serialization ----

    def to_dict(self) -> dict:
        return {
            "time_resolution_ms": self.time_resolution_ms,
            "max_time_steps": self.max_time_steps,
            "max_dur_steps": self.max_dur_steps,
            "num_instruments": self.num_instruments,
            "num_pitches": self.num_pitches,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VocabSpec":
        obj = json.loads(text)
        return cls(
            time_resolution_ms=int(obj["time_resolution_ms"]),
            max_time_steps=int(obj["max_time_steps"]),
            max_dur_steps=int(obj["max_dur_steps"]),
            num_instruments=int(obj["num_instruments"]),
            num_pitches=int(obj["num_pitches"]),
        )


DEFAULT_VOCAB = VocabSpec()
