"""Logit processing and sampling for grammar-constrained triplet decoding.

Processors run in a declared order, each reading shared decode state and
rewriting the logits vector: the grammar mask enforces the Time→Duration→Note
cycle and onset monotonicity, the ensemble mask restricts instruments, and
the density bias pushes probability toward instruments that have been silent.
Masked entries hold ``MASK_VALUE`` (the most negative finite float32) rather
than -inf so downstream softmaxes stay well-defined.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .vocab import DEFAULT_VOCAB, TokenKind, VocabSpec

MASK_VALUE = float(np.finfo(np.float32).min)

# Entries at or below this count as masked-out; comparisons use the midpoint
# so that adding biases to masked entries cannot accidentally resurrect them.
MASK_THRESHOLD = MASK_VALUE / 2

# Below this, temperature scaling is numerically meaningless: go greedy.
GREEDY_TEMPERATURE = 1e-6

_CYCLE_KINDS = (TokenKind.TIME, TokenKind.DURATION, TokenKind.NOTE)


class EmptySupport(RuntimeError):
    """Every candidate token is masked out."""


class ChunkRollover(RuntimeError):
    """The current window cannot continue; re-relativize and start a new chunk."""


@dataclass(frozen=True)
class GenParams:
    """Sampling knobs.  Immutable; shared freely across threads."""

    temperature: float = 1.0
    top_p: float = 0.98
    bias_alpha: float = 0.5  # logits per second of instrument silence
    ensemble: "frozenset[int] | None" = None
    seed: "int | None" = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.bias_alpha < 0:
            raise ValueError(f"bias_alpha must be >= 0, got {self.bias_alpha}")
        if self.ensemble is not None:
            ens = frozenset(int(j) for j in self.ensemble)
            if not ens:
                raise ValueError("ensemble, when set, must be non-empty")
            if any(j < 0 for j in ens):
                raise ValueError("ensemble instrument ids must be non-negative")
            object.__setattr__(self, "ensemble", ens)

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "bias_alpha": self.bias_alpha,
            "ensemble": sorted(self.ensemble) if self.ensemble is not None else None,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "GenParams":
        kwargs = {k: obj[k] for k in ("temperature", "top_p", "bias_alpha", "seed") if k in obj}
        if obj.get("ensemble") is not None:
            kwargs["ensemble"] = frozenset(obj["ensemble"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "GenParams":
        return cls.from_dict(json.loads(text))

    def merged(self, partial: dict) -> "GenParams":
        """New params with the given fields replaced; validates the result."""
        allowed = {"temperature", "top_p", "bias_alpha", "ensemble", "seed"}
        unknown = set(partial) - allowed
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        obj = self.to_dict()
        obj.update(partial)
        return GenParams.from_dict(obj)


@dataclass
class DecodeState:
    """Mutable per-stream decoding state.

    ``cycle`` is the position within the triplet (0 expects a time token);
    onset bookkeeping is split into a chunk-relative part (``prev_onset_step``,
    reset on every window) and a stream-global base so instrument gaps can
    persist across chunk boundaries.
    """

    vocab: VocabSpec
    rng: np.random.Generator
    cycle: int = 0
    prev_onset_step: int = 0
    base_step: int = 0  # stream-global step of the current window's origin
    pending_time_step: "int | None" = None
    pending_dur_steps: "int | None" = None
    last_played_step: "dict[int, int]" = field(default_factory=dict)
    ensemble: "frozenset[int] | None" = None

    @classmethod
    def fresh(cls, params: GenParams, vocab: VocabSpec = DEFAULT_VOCAB) -> "DecodeState":
        return cls(vocab=vocab, rng=np.random.default_rng(params.seed), ensemble=params.ensemble)

    @property
    def expected_kind(self) -> TokenKind:
        return _CYCLE_KINDS[self.cycle]

    @property
    def clock_step(self) -> int:
        """Stream-global step of the note being decoded (or the last onset)."""
        rel = self.pending_time_step if self.pending_time_step is not None else self.prev_onset_step
        return self.base_step + rel

    def gap_seconds(self, instrument: int) -> float:
        """Seconds since the instrument last sounded; stream start counts as 0."""
        last = self.last_played_step.get(instrument, 0)
        return self.vocab.step_to_seconds(self.clock_step - last)

    def observe(self, token_id: int) -> None:
        """Advance the cycle by one emitted (or replayed) token."""
        kind = self.vocab.kind_of(token_id)
        if kind is not self.expected_kind:
            raise ValueError(f"observed {kind.value} token, cycle expects {self.expected_kind.value}")
        if self.cycle == 0:
            step = self.vocab.id_to_time(token_id)
            self.pending_time_step = step
            self.prev_onset_step = step
        elif self.cycle == 1:
            self.pending_dur_steps = self.vocab.id_to_dur(token_id)
        else:
            instrument = self.vocab.instrument_of_note_id(token_id)
            self.last_played_step[instrument] = self.base_step + self.pending_time_step
            self.pending_time_step = None
            self.pending_dur_steps = None
        self.cycle = (self.cycle + 1) % 3

    def rebase(self, new_base_step: int) -> None:
        """Move to a new window origin; gaps keep their stream-global meaning."""
        self.base_step = new_base_step
        self.cycle = 0
        self.prev_onset_step = 0
        self.pending_time_step = None
        self.pending_dur_steps = None


class LogitProcessor:
    """One pipeline stage: reads state, returns a rewritten logits vector."""

    def process(self, logits: np.ndarray, state: DecodeState) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, logits: np.ndarray, state: DecodeState) -> np.ndarray:
        return self.process(logits, state)


class GrammarMask(LogitProcessor):
    """Only tokens of the cycle's kind survive; time tokens additionally may
    not precede the previous onset; SOS never survives."""

    def __init__(self, vocab: VocabSpec = DEFAULT_VOCAB):
        self.vocab = vocab

    def process(self, logits, state):
        v = self.vocab
        if state.cycle == 0:
            lo, hi = v.time_offset + state.prev_onset_step, v.dur_offset
        elif state.cycle == 1:
            lo, hi = v.dur_offset, v.note_offset
        else:
            lo, hi = v.note_offset, v.sos_id
        out = np.full_like(logits, MASK_VALUE)
        out[lo:hi] = logits[lo:hi]
        if lo >= hi or not np.any(out[lo:hi] > MASK_THRESHOLD):
            raise EmptySupport(f"no unmasked candidates at cycle {state.cycle}")
        return out


class EnsembleMask(LogitProcessor):
    """At Note positions, remove note ids whose instrument is outside the
    active ensemble.  Inactive (no ensemble) or non-Note positions pass through."""

    def __init__(self, vocab: VocabSpec = DEFAULT_VOCAB):
        self.vocab = vocab
        self._banned_cache: "dict[frozenset, np.ndarray]" = {}

    def _banned_ids(self, ensemble: frozenset) -> np.ndarray:
        cached = self._banned_cache.get(ensemble)
        if cached is None:
            v = self.vocab
            bad = [j for j in range(v.num_instruments) if j not in ensemble]
            if any(j >= v.num_instruments for j in ensemble):
                raise ValueError(f"ensemble contains instruments outside [0, {v.num_instruments})")
            blocks = [
                np.arange(v.note_offset + j * v.num_pitches, v.note_offset + (j + 1) * v.num_pitches)
                for j in bad
            ]
            cached = np.concatenate(blocks) if blocks else np.empty(0, dtype=np.int64)
            self._banned_cache[ensemble] = cached
        return cached

    def process(self, logits, state):
        if state.ensemble is None or state.cycle != 2:
            return logits
        out = logits.copy()
        out[self._banned_ids(state.ensemble)] = MASK_VALUE
        return out


class DensityBias(LogitProcessor):
    """Add alpha x (seconds since instrument j last played) to every note id
    of each ensemble instrument j.  Active only at Note positions with an
    ensemble; alpha = 0 is an exact no-op."""

    def __init__(self, alpha: float, vocab: VocabSpec = DEFAULT_VOCAB):
        if alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {alpha}")
        self.alpha = float(alpha)
        self.vocab = vocab

    def process(self, logits, state):
        if state.ensemble is None or state.cycle != 2 or self.alpha == 0.0:
            return logits
        v = self.vocab
        out = logits.copy()
        for j in sorted(state.ensemble):
            lo = v.note_offset + j * v.num_pitches
            out[lo : lo + v.num_pitches] += np.float32(self.alpha * state.gap_seconds(j))
        return out


def build_pipeline(params: GenParams, vocab: VocabSpec = DEFAULT_VOCAB) -> "list[LogitProcessor]":
    """The standard stage order: grammar, ensemble restriction, density bias."""
    return [GrammarMask(vocab), EnsembleMask(vocab), DensityBias(params.bias_alpha, vocab)]


def apply_pipeline(logits, pipeline, state) -> np.ndarray:
    for proc in pipeline:
        logits = proc(logits, state)
    return logits


def nucleus_indices(probs: np.ndarray, top_p: float) -> np.ndarray:
    """Indices of the smallest descending-probability prefix with mass >= top_p.

    Never empty: the most probable token is always retained.
    """
    order = np.argsort(-probs)
    csum = np.cumsum(probs[order])
    cut = int(np.searchsorted(csum, top_p, side="left"))
    cut = min(cut, order.size - 1)  # guards the float shortfall at top_p = 1
    return order[: cut + 1]


def sample(logits: np.ndarray, params: GenParams, rng: np.random.Generator) -> int:
    """Temperature + nucleus (top-p) sampling over the unmasked support.

    Keeps the smallest descending-probability prefix whose mass reaches
    top_p (never fewer than one token), renormalizes, draws.  Temperatures
    below GREEDY_TEMPERATURE short-circuit to argmax.
    """
    support = np.flatnonzero(logits > MASK_THRESHOLD)
    if support.size == 0:
        raise EmptySupport("all logits are masked")
    values = logits[support].astype(np.float64)

    if params.temperature < GREEDY_TEMPERATURE:
        return int(support[np.argmax(values)])

    z = values / params.temperature
    z -= z.max()
    probs = np.exp(z)
    probs /= probs.sum()

    kept = nucleus_indices(probs, params.top_p)
    q = probs[kept]
    q /= q.sum()
    pick = int(np.searchsorted(np.cumsum(q), rng.random(), side="right"))
    pick = min(pick, kept.size - 1)
    return int(support[kept[pick]])


def decode_note_triplet(logits, step, state: DecodeState, params: GenParams, pipeline):
    """Sample one (time, dur, note) triplet through the pipeline.

    ``logits`` is the model output at the current position (a Time slot);
    ``step(token) -> logits`` advances the model.  Returns the triplet and
    the logits for the next Time slot.  EmptySupport surfaces as
    ChunkRollover so the streamer can re-window.
    """
    ids = []
    for _ in range(3):
        try:
            processed = apply_pipeline(logits, pipeline, state)
            token = sample(processed, params, state.rng)
        except EmptySupport as err:
            raise ChunkRollover(str(err)) from err
        state.observe(token)
        ids.append(token)
        logits = step(token)
    return (ids[0], ids[1], ids[2]), logits
