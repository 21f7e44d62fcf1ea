"""Streaming multi-instrumental MIDI generation.

Triplet token vocabulary, a numpy GPT-2-style decoder with KV caching,
grammar-constrained sampling, infinite chunked streams, MIDI file I/O,
streamability profiling, and a WebSocket broadcast service.
"""

from .decoding import (
    GREEDY_TEMPERATURE,
    MASK_THRESHOLD,
    MASK_VALUE,
    ChunkRollover,
    DecodeState,
    DensityBias,
    EmptySupport,
    EnsembleMask,
    GenParams,
    GrammarMask,
    apply_pipeline,
    build_pipeline,
    decode_note_triplet,
    nucleus_indices,
    sample,
)
from .events import DEFAULT_VELOCITY, DRUM_INSTRUMENT, NoteEvent, sort_notes
from .midi_io import (
    MalformedHeader,
    MidiError,
    TooManyInstruments,
    UnmatchedNoteOn,
    UnsupportedFormat,
    read_midi,
    write_midi,
)
from .model import (
    PRESETS,
    ContextOverflow,
    CorruptFile,
    KVCache,
    MissingTensor,
    Model,
    ModelConfig,
    ShapeMismatch,
    WeightError,
    WeightStore,
    forward_full,
    forward_step,
    init_random,
    load_weights,
    preset_config,
    save_weights,
)
from .profiler import (
    DensityProfile,
    EmptyInput,
    StreamabilityReport,
    Throughput,
    estimate_density,
    measure_throughput,
    plot_density,
    profile_run,
    streamable_fraction,
    write_report,
)
from .service import StreamService, serve_forever
from .streamer import (
    CHUNK_NOTES,
    ROLLOVER_STEP,
    GridNote,
    SinkClosed,
    StreamChunk,
    StreamState,
    StreamSummary,
    next_chunk,
    run_stream,
    start_stream,
)
from .tokenizer import (
    MAX_NOTES_PER_SEQ,
    MAX_SEQ_TOKENS,
    GrammarViolation,
    KindMismatch,
    OnsetOutOfRange,
    TokenizerError,
    TooLong,
    decode_note,
    decode_sequence,
    encode_note,
    encode_sequence,
    quantize,
)
from .vocab import DEFAULT_VOCAB, TokenKind, VocabSpec

__version__ = "0.1.0"

__all__ = [
    # events
    "DEFAULT_VELOCITY",
    "DRUM_INSTRUMENT",
    "NoteEvent",
    "sort_notes",
    # vocabulary
    "DEFAULT_VOCAB",
    "TokenKind",
    "VocabSpec",
    # tokenizer
    "MAX_NOTES_PER_SEQ",
    "MAX_SEQ_TOKENS",
    "TokenizerError",
    "OnsetOutOfRange",
    "KindMismatch",
    "TooLong",
    "GrammarViolation",
    "quantize",
    "encode_note",
    "decode_note",
    "encode_sequence",
    "decode_sequence",
    # model
    "PRESETS",
    "ModelConfig",
    "preset_config",
    "WeightStore",
    "WeightError",
    "MissingTensor",
    "ShapeMismatch",
    "CorruptFile",
    "ContextOverflow",
    "KVCache",
    "Model",
    "forward_full",
    "forward_step",
    "init_random",
    "save_weights",
    "load_weights",
    # decoding
    "MASK_VALUE",
    "MASK_THRESHOLD",
    "GREEDY_TEMPERATURE",
    "GenParams",
    "DecodeState",
    "GrammarMask",
    "EnsembleMask",
    "DensityBias",
    "EmptySupport",
    "ChunkRollover",
    "build_pipeline",
    "apply_pipeline",
    "nucleus_indices",
    "sample",
    "decode_note_triplet",
    # streamer
    "CHUNK_NOTES",
    "ROLLOVER_STEP",
    "GridNote",
    "StreamChunk",
    "StreamState",
    "StreamSummary",
    "SinkClosed",
    "start_stream",
    "next_chunk",
    "run_stream",
    # midi file io
    "MidiError",
    "MalformedHeader",
    "UnsupportedFormat",
    "UnmatchedNoteOn",
    "TooManyInstruments",
    "read_midi",
    "write_midi",
    # profiler
    "Throughput",
    "DensityProfile",
    "StreamabilityReport",
    "EmptyInput",
    "measure_throughput",
    "estimate_density",
    "streamable_fraction",
    "profile_run",
    "write_report",
    "plot_density",
    # service
    "StreamService",
    "serve_forever",
]
