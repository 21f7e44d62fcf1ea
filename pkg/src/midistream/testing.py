"""Deterministic fixtures: scripted engines, handcrafted weight tables, and
synthetic note sets with known density.

These exist so streaming, profiling, and service behavior can be tested
against *known* musical statistics.  ``scripted_weights`` builds a real
transformer checkpoint whose output logits equal a chosen static table at
every position — zeroed attention/MLP paths keep the residual stream at the
token embedding, every token embeds to the same unit-variance vector, and
untied output rows scaled by the table read it back off.
"""

import numpy as np

from .events import DEFAULT_VELOCITY, NoteEvent
from .model import ModelConfig, WeightStore, preset_config, required_tensors
from .vocab import DEFAULT_VOCAB, VocabSpec


class ScriptedEngine:
    """Stands in for a Model: logits come from a function of position.

    The default emits seeded noise keyed by (seed, position), so identical
    positions replay identical logits — cheap, deterministic, and exercises
    every grammar path without transformer cost.
    """

    def __init__(self, vocab: VocabSpec = DEFAULT_VOCAB, logits_fn=None, seed: int = 0):
        if logits_fn is None:

            def logits_fn(position):
                rng = np.random.default_rng((seed, position))
                return (rng.normal(size=vocab.vocab_size) * 2).astype(np.float32)

        self.vocab = vocab
        self.logits_fn = logits_fn
        self.context_len = 1024
        self.position = 0

    def reset(self) -> None:
        self.position = 0

    def prefill(self, tokens) -> np.ndarray:
        self.position += len(tokens)
        assert self.position <= self.context_len, "context budget exceeded"
        return np.asarray(self.logits_fn(self.position), dtype=np.float32)

    def step(self, token: int) -> np.ndarray:
        self.position += 1
        assert self.position <= self.context_len, "context budget exceeded"
        return np.asarray(self.logits_fn(self.position), dtype=np.float32)


def static_engine(table, vocab: VocabSpec = DEFAULT_VOCAB) -> ScriptedEngine:
    """Engine whose logits are the same vector at every position."""
    table = np.asarray(table, dtype=np.float32)
    return ScriptedEngine(vocab, logits_fn=lambda position: table)


def scripted_weights(logit_table, config: "ModelConfig | None" = None) -> WeightStore:
    """A real WeightStore whose forward logits equal ``logit_table`` for any
    input — static, position-independent output with full model machinery.

    Requires untied embeddings; the default is the toy preset.  Output
    logits match the table up to the final layernorm's epsilon factor
    (a uniform ~5e-6 relative shrink that never reorders anything).
    """
    table = np.asarray(logit_table, dtype=np.float32)
    if config is None:
        config = preset_config("toy", vocab_size=table.size, tie_embeddings=False)
    if config.tie_embeddings:
        raise ValueError("scripted weights need untied embeddings")
    if table.shape != (config.vocab_size,):
        raise ValueError(f"table shape {table.shape} != vocab size {config.vocab_size}")

    d = config.d_model
    v0 = np.tile(np.array([1.0, -1.0], dtype=np.float32), d // 2)  # mean 0, variance 1
    tensors = {}
    for name, shape in required_tensors(config).items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "g":
            tensors[name] = np.ones(shape, dtype=np.float32)
        elif leaf.startswith("b"):
            tensors[name] = np.zeros(shape, dtype=np.float32)
        elif name == "tok_emb":
            tensors[name] = np.tile(v0, (config.vocab_size, 1))
        elif name == "lm_head":
            tensors[name] = np.outer(table, v0 / d)
        else:  # pos_emb and all attention/MLP matrices: inert
            tensors[name] = np.zeros(shape, dtype=np.float32)
    return WeightStore(config, tensors)


def ramp_logit_table(
    vocab: VocabSpec = DEFAULT_VOCAB,
    time_slope: float = 0.4,
    dur_slope: float = 0.1,
    instrument_spread: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Static logit table with controllable note density.

    Time ids fall linearly (-time_slope per step), so given the previous
    onset t the next lands at t+k with probability ~ exp(-time_slope * k):
    geometric gaps with mean ~ 1/time_slope grid steps, independent of t.
    Durations decay from the shortest at dur_slope per step.  A positive
    instrument_spread adds a seeded N(0, spread) offset per instrument
    block — uneven preferences for coverage experiments.
    """
    g = np.zeros(vocab.vocab_size, dtype=np.float32)
    g[: vocab.max_time_steps] = -time_slope * np.arange(vocab.max_time_steps)
    g[vocab.dur_offset : vocab.note_offset] = -dur_slope * np.arange(vocab.max_dur_steps)
    if instrument_spread > 0:
        rng = np.random.default_rng(seed)
        offsets = rng.normal(0.0, instrument_spread, size=vocab.num_instruments)
        per_note = np.repeat(offsets, vocab.num_pitches)
        g[vocab.note_offset : vocab.sos_id] = per_note.astype(np.float32)
    g[vocab.sos_id] = 0.0
    return g


def constant_density_notes(
    notes_per_s: float,
    horizon_s: float,
    instrument: int = 0,
    pitch: int = 60,
    dur_s: float = 0.05,
) -> "list[NoteEvent]":
    """Evenly spaced notes: exactly notes_per_s per second over the horizon."""
    n = int(round(notes_per_s * horizon_s))
    return [
        NoteEvent(
            onset_s=i / notes_per_s,
            duration_s=dur_s,
            instrument=instrument,
            pitch=pitch,
            velocity=DEFAULT_VELOCITY,
        )
        for i in range(n)
    ]
