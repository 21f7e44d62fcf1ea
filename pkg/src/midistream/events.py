"""Note events: the unit of musical information flowing through the system.

A note is (onset seconds, duration seconds, instrument, pitch).  Velocity is
carried for MIDI I/O only; the token vocabulary has no slot for it.
"""

from dataclasses import dataclass, replace

DEFAULT_VELOCITY = 80

# Instrument ids 0..127 are GM melodic programs; 128 is the drum kit.
DRUM_INSTRUMENT = 128


@dataclass(frozen=True, order=True)
class NoteEvent:
    """One musical note.

    Ordering is (onset, instrument, pitch): the canonical sort used when
    sequencing notes into tokens, so ties at equal onset are deterministic.
    """

    onset_s: float
    instrument: int
    pitch: int
    duration_s: float
    velocity: int = DEFAULT_VELOCITY

    def shifted(self, delta_s: float) -> "NoteEvent":
        """Copy of this note with the onset moved by delta_s seconds."""
        return replace(self, onset_s=self.onset_s + delta_s)

    def to_wire(self) -> dict:
        """The JSON object used on every external surface (stdout, WebSocket)."""
        return {
            "onset_s": self.onset_s,
            "dur_s": self.duration_s,
            "instrument": self.instrument,
            "pitch": self.pitch,
            "velocity": self.velocity,
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "NoteEvent":
        return cls(
            onset_s=float(obj["onset_s"]),
            duration_s=float(obj["dur_s"]),
            instrument=int(obj["instrument"]),
            pitch=int(obj["pitch"]),
            velocity=int(obj.get("velocity", DEFAULT_VELOCITY)),
        )


def sort_notes(notes: list[NoteEvent]) -> list[NoteEvent]:
    """Canonical ordering: onset ascending, ties by (instrument, pitch)."""
    return sorted(notes, key=lambda n: (n.onset_s, n.instrument, n.pitch))
