"""Standard MIDI File reading and writing.

Covers the subset needed to feed prompts in and get streams out: note
on/off, program change, and tempo meta events, in SMF type 0 or 1 files
with PPQ time division.  SysEx, controllers, pitch bend, SMPTE division,
and type 2 files are out of scope; unknown events are skipped on read.

Reading honours the full tempo map of the file.  Writing is deterministic:
type 1, 480 PPQ, a fixed 500000 microseconds per quarter (120 BPM), one
track per instrument.
"""

from __future__ import annotations

import warnings
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field

from .events import DRUM_INSTRUMENT, NoteEvent, sort_notes
from .tokenizer import quantize
from .vocab import DEFAULT_VOCAB, VocabSpec

DEFAULT_TEMPO_US = 500_000  # microseconds per quarter note (120 BPM)
WRITE_PPQ = 480
DRUM_CHANNEL = 9  # zero-based; "channel 10" in MIDI parlance
MAX_MELODIC_CHANNELS = 15


class MidiError(ValueError):
    """Base class for MIDI container problems."""


class MalformedHeader(MidiError):
    """The byte stream is not a well-formed SMF file."""


class UnsupportedFormat(MidiError):
    """Structurally valid SMF, but a flavour this reader does not handle."""


class TooManyInstruments(MidiError):
    """More distinct instruments than MIDI channels can carry."""


class UnmatchedNoteOn(UserWarning):
    """A note on/off pair could not be matched; the file was still read."""


# ---------------------------------------------------------------------------
# Document layer


@dataclass
class ChannelEvent:
    """A resolved channel-voice event at an absolute tick."""

    tick: int
    kind: str  # "on" | "off" | "program"
    channel: int
    data1: int  # pitch or program number
    data2: int = 0  # velocity for note events


@dataclass
class MidiDocument:
    """Parsed SMF with running status resolved and ticks made absolute."""

    format: int
    ticks_per_quarter: int
    tempo_map: list[tuple[int, int]] = field(default_factory=list)
    tracks: list[list[ChannelEvent]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.tempo_map or self.tempo_map[0][0] > 0:
            self.tempo_map = [(0, DEFAULT_TEMPO_US)] + list(self.tempo_map)
        self.tempo_map.sort(key=lambda pair: pair[0])
        # Cumulative seconds at each tempo-change tick, for O(log n) lookups.
        self._tempo_ticks = [tick for tick, _ in self.tempo_map]
        self._tempo_seconds = [0.0]
        for (tick0, us), (tick1, _) in zip(self.tempo_map, self.tempo_map[1:]):
            span = (tick1 - tick0) * us / (self.ticks_per_quarter * 1e6)
            self._tempo_seconds.append(self._tempo_seconds[-1] + span)

    def tick_to_seconds(self, tick: int) -> float:
        i = bisect_right(self._tempo_ticks, tick) - 1
        tick0, us = self.tempo_map[i]
        return self._tempo_seconds[i] + (tick - tick0) * us / (self.ticks_per_quarter * 1e6)


# ---------------------------------------------------------------------------
# Parsing


class _Reader:
    """Cursor over the byte stream; every read checks for truncation."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedHeader("file truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.bytes(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.bytes(2), "big")

    def u32(self) -> int:
        return int.from_bytes(self.bytes(4), "big")

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8()
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MalformedHeader("variable-length quantity over 4 bytes")

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.data)


# Data-byte counts for channel voice messages, keyed by high nibble.
_OPERANDS = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track(reader: _Reader, length: int, tempo_map: list[tuple[int, int]]) -> list[ChannelEvent]:
    end = reader.pos + length
    if end > len(reader.data):
        raise MalformedHeader("track chunk longer than file")
    events: list[ChannelEvent] = []
    tick = 0
    running_status: int | None = None
    while reader.pos < end:
        tick += reader.varlen()
        first = reader.u8()
        if first < 0x80:
            if running_status is None:
                raise MalformedHeader("data byte with no running status")
            status, data1 = running_status, first
        else:
            status = first
            if status == 0xFF:  # meta events cancel running status
                running_status = None
                meta_type = reader.u8()
                payload = reader.bytes(reader.varlen())
                if meta_type == 0x2F:  # end of track: trust the length field
                    reader.pos = end
                    return events
                if meta_type == 0x51:
                    if len(payload) != 3:
                        raise MalformedHeader("tempo event with bad payload length")
                    tempo_map.append((tick, int.from_bytes(payload, "big")))
                continue
            if status in (0xF0, 0xF7):  # SysEx: skip, and kill running status
                reader.bytes(reader.varlen())
                running_status = None
                continue
            if status >= 0xF0:
                raise MalformedHeader(f"unexpected system byte 0x{status:02X} in track")
            data1 = reader.u8()
        running_status = status
        kind_bits = status & 0xF0
        operands = _OPERANDS[kind_bits]
        data2 = reader.u8() if operands == 2 else 0
        if data1 > 0x7F or data2 > 0x7F:
            raise MalformedHeader("channel event with data byte over 0x7F")
        channel = status & 0x0F
        if kind_bits == 0x90 and data2 > 0:
            events.append(ChannelEvent(tick, "on", channel, data1, data2))
        elif kind_bits == 0x80 or kind_bits == 0x90:  # explicit off, or on at velocity 0
            events.append(ChannelEvent(tick, "off", channel, data1))
        elif kind_bits == 0xC0:
            events.append(ChannelEvent(tick, "program", channel, data1))
        # Aftertouch, controllers, and pitch bend are consumed and dropped.
    raise MalformedHeader("track ended without end-of-track event")


def parse_midi(data: bytes) -> MidiDocument:
    """Byte stream -> MidiDocument (header checked, events made absolute)."""
    reader = _Reader(data)
    if reader.bytes(4) != b"MThd":
        raise MalformedHeader("missing MThd chunk")
    if reader.u32() != 6:
        raise MalformedHeader("MThd length must be 6")
    fmt = reader.u16()
    declared_tracks = reader.u16()
    division = reader.u16()
    if fmt not in (0, 1):
        raise UnsupportedFormat(f"SMF type {fmt} is not supported (only 0 and 1)")
    if division & 0x8000:
        raise UnsupportedFormat("SMPTE time division is not supported")
    if division == 0:
        raise MalformedHeader("zero ticks per quarter note")

    tempo_map: list[tuple[int, int]] = []
    tracks: list[list[ChannelEvent]] = []
    while not reader.exhausted:
        tag = reader.bytes(4)
        length = reader.u32()
        if tag == b"MTrk":
            tracks.append(_parse_track(reader, length, tempo_map))
        else:  # per the SMF spec, unknown chunk types are skipped
            reader.bytes(length)
    if not tracks:
        raise MalformedHeader("no MTrk chunks")
    if fmt == 0 and declared_tracks != 1:
        raise MalformedHeader("type 0 file must declare exactly one track")
    return MidiDocument(format=fmt, ticks_per_quarter=division, tempo_map=tempo_map, tracks=tracks)


def extract_notes(doc: MidiDocument) -> tuple[list[NoteEvent], bool]:
    """Match on/off pairs and convert to seconds.

    Returns the notes (unquantized, in file order of matching) and a flag
    that is True when any on/off event had no partner.  Pairs are matched
    first-on first-off per (channel, pitch); the sounding instrument is the
    channel's most recent program change, except channel 10 which is always
    the drum kit.
    """
    merged: list[tuple[int, int, int, ChannelEvent]] = []
    for track_index, track in enumerate(doc.tracks):
        for seq, event in enumerate(track):
            merged.append((event.tick, track_index, seq, event))
    merged.sort(key=lambda item: item[:3])

    program = [0] * 16
    open_notes: dict[tuple[int, int], deque[tuple[int, int, int]]] = {}
    notes: list[tuple[int, int, int, int, int]] = []  # on, off, instr, pitch, vel
    unmatched = False
    for tick, _, _, event in merged:
        if event.kind == "program":
            program[event.channel] = event.data1
        elif event.kind == "on":
            instrument = DRUM_INSTRUMENT if event.channel == DRUM_CHANNEL else program[event.channel]
            key = (event.channel, event.data1)
            open_notes.setdefault(key, deque()).append((tick, event.data2, instrument))
        else:
            queue = open_notes.get((event.channel, event.data1))
            if not queue:
                unmatched = True
                warnings.warn(
                    f"note-off for pitch {event.data1} on channel {event.channel + 1} "
                    "with no sounding note; ignored",
                    UnmatchedNoteOn,
                    stacklevel=3,
                )
                continue
            on_tick, velocity, instrument = queue.popleft()
            notes.append((on_tick, tick, instrument, event.data1, velocity))

    last_tick = merged[-1][0] if merged else 0
    for (channel, pitch), queue in open_notes.items():
        for on_tick, velocity, instrument in queue:
            unmatched = True
            warnings.warn(
                f"note-on for pitch {pitch} on channel {channel + 1} never released; "
                "closed at end of file",
                UnmatchedNoteOn,
                stacklevel=3,
            )
            notes.append((on_tick, max(last_tick, on_tick), instrument, pitch, velocity))

    events = [
        NoteEvent(
            onset_s=doc.tick_to_seconds(on),
            duration_s=doc.tick_to_seconds(off) - doc.tick_to_seconds(on),
            instrument=instrument,
            pitch=pitch,
            velocity=velocity,
        )
        for on, off, instrument, pitch, velocity in notes
    ]
    return events, unmatched


def read_midi(data: bytes, vocab: VocabSpec = DEFAULT_VOCAB) -> list[NoteEvent]:
    """SMF bytes -> onset-sorted notes snapped to the vocabulary grid."""
    raw, _ = extract_notes(parse_midi(data))
    return sort_notes(quantize(note, vocab) for note in raw)


# ---------------------------------------------------------------------------
# Writing


def _encode_varlen(value: int) -> bytes:
    out = bytearray([value & 0x7F])
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(event_bytes: bytes) -> bytes:
    body = event_bytes + b"\x00\xff\x2f\x00"
    return b"MTrk" + len(body).to_bytes(4, "big") + body


def _render_events(timed: list[tuple[int, bytes]]) -> bytes:
    """(absolute tick, message) pairs -> delta-timed byte stream."""
    out = bytearray()
    previous = 0
    for tick, message in timed:
        out += _encode_varlen(tick - previous)
        out += message
        previous = tick
    return bytes(out)


def write_midi(notes: list[NoteEvent]) -> bytes:
    """Notes -> deterministic SMF type 1 bytes.

    One track per instrument (plus a leading tempo track), fixed 120 BPM at
    480 PPQ, program change at tick zero on each track.  Drums take channel
    10; melodic instruments fill the remaining fifteen channels.
    """
    instruments = sorted({note.instrument for note in notes})
    melodic = [i for i in instruments if i != DRUM_INSTRUMENT]
    if len(melodic) > MAX_MELODIC_CHANNELS:
        raise TooManyInstruments(
            f"{len(instruments)} distinct instruments, but one file carries at most "
            f"{MAX_MELODIC_CHANNELS} melodic instruments plus drums; split the notes "
            "into several files or thin the ensemble"
        )
    for note in notes:
        if not 0 <= note.pitch < 128:
            raise ValueError(f"pitch {note.pitch} outside MIDI range")

    free_channels = [c for c in range(16) if c != DRUM_CHANNEL]
    channel_of = {instrument: free_channels[i] for i, instrument in enumerate(melodic)}
    if DRUM_INSTRUMENT in instruments:
        channel_of[DRUM_INSTRUMENT] = DRUM_CHANNEL

    ticks_per_second = WRITE_PPQ * 1e6 / DEFAULT_TEMPO_US

    tempo_track = _render_events([(0, b"\xff\x51\x03" + DEFAULT_TEMPO_US.to_bytes(3, "big"))])
    chunks = [_track_chunk(tempo_track)]
    for instrument in instruments:
        channel = channel_of[instrument]
        program = 0 if instrument == DRUM_INSTRUMENT else instrument
        # sort key: tick, then offs (0) ahead of ons (1) so back-to-back
        # same-pitch notes release before they re-strike
        timed: list[tuple[int, int, bytes]] = [(0, -1, bytes([0xC0 | channel, program]))]
        for note in notes:
            if note.instrument != instrument:
                continue
            on = int(round(note.onset_s * ticks_per_second))
            off = max(int(round((note.onset_s + note.duration_s) * ticks_per_second)), on + 1)
            velocity = min(max(int(note.velocity), 1), 127)
            timed.append((on, 1, bytes([0x90 | channel, note.pitch, velocity])))
            timed.append((off, 0, bytes([0x80 | channel, note.pitch, 0])))
        timed.sort(key=lambda item: item[:2])
        chunks.append(_track_chunk(_render_events([(tick, msg) for tick, _, msg in timed])))

    header = b"MThd" + (6).to_bytes(4, "big")
    header += (1).to_bytes(2, "big") + len(chunks).to_bytes(2, "big") + WRITE_PPQ.to_bytes(2, "big")
    return header + b"".join(chunks)
