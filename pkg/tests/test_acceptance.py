"""End-to-end acceptance gates for the whole package.

Every test here exercises a shipping-level guarantee at its stated
tolerance and records a one-line verdict (see conftest).  These are
deliberately heavier than unit tests — the full run takes a few minutes.
"""

import json
import time

import numpy as np
import pytest

from midistream.decoding import (
    ChunkRollover,
    DecodeState,
    GenParams,
    build_pipeline,
    decode_note_triplet,
)
from midistream.events import NoteEvent, sort_notes
from midistream.midi_io import read_midi, write_midi
from midistream.model import ContextOverflow, Model, forward_full, init_random, preset_config
from midistream.profiler import (
    DensityProfile,
    measure_throughput,
    plot_density,
    profile_run,
    streamable_fraction,
    write_report,
)
from midistream.streamer import CHUNK_NOTES, ROLLOVER_STEP, _build_window, next_chunk, start_stream
from midistream.testing import constant_density_notes, ramp_logit_table, scripted_weights
from midistream.tokenizer import decode_note, decode_sequence, encode_note
from midistream.vocab import DEFAULT_VOCAB, TokenKind


@pytest.fixture(scope="module")
def dense_toy_engine():
    """Real transformer forward (toy architecture) with scripted weights whose
    logits follow a decaying onset ramp.  Randomly initialised weights put
    nearly uniform mass on the 10,000 onset ids, so onsets leap hundreds of
    steps at a time and streams live in the rollover regime (exercised by
    test_sampled_sequences_follow_grammar and the streamer unit tests).
    Full-length 170-note chunks need the controlled-density regime instead.
    """
    return Model(scripted_weights(ramp_logit_table(time_slope=0.4)))


class TestGrammarSoundness:
    def test_sampled_sequences_follow_grammar(self, criterion):
        started = time.perf_counter()
        engine = Model(init_random(preset_config("toy"), seed=42))
        rng = np.random.default_rng(2024)
        kind_cycle = (TokenKind.TIME, TokenKind.DURATION, TokenKind.NOTE)
        runs = 1000
        sound = 0
        total_tokens = 0
        for i in range(runs):
            target = 510 if i % 20 == 0 else 3 * (1 + int(169 * rng.random() ** 4))
            params = GenParams(seed=int(rng.integers(1 << 31)))
            state = DecodeState.fresh(params, DEFAULT_VOCAB)
            pipeline = build_pipeline(params, DEFAULT_VOCAB)
            engine.reset()
            logits = engine.prefill([DEFAULT_VOCAB.sos_id])
            tokens = []
            while len(tokens) + 3 <= target:
                try:
                    triplet, logits = decode_note_triplet(logits, engine.step, state, params, pipeline)
                except ChunkRollover:
                    break
                tokens.extend(triplet)
            total_tokens += len(tokens)
            ok = bool(tokens)
            prev_onset = 0
            for position, token in enumerate(tokens):
                if DEFAULT_VOCAB.kind_of(token) is not kind_cycle[position % 3]:
                    ok = False
                    break
                if position % 3 == 0:
                    if token < prev_onset:
                        ok = False
                        break
                    prev_onset = token
            try:
                decode_sequence([DEFAULT_VOCAB.sos_id] + tokens)
            except Exception:
                ok = False
            sound += ok
        elapsed = time.perf_counter() - started
        criterion(
            "grammar soundness",
            sound == runs and elapsed < 120,
            f"{sound}/{runs} sampled sequences keep the time/duration/note cycle "
            f"with non-decreasing onsets ({total_tokens} tokens, {elapsed:.0f}s < 120s)",
        )


class TestTokenizerRoundTrip:
    def test_every_instrument_pitch_pair_round_trips(self, criterion):
        started = time.perf_counter()
        rng = np.random.default_rng(7)
        onset_steps = rng.integers(0, DEFAULT_VOCAB.max_time_steps, size=50)
        dur_steps = rng.integers(1, DEFAULT_VOCAB.max_dur_steps + 1, size=50)
        grid = [
            (DEFAULT_VOCAB.step_to_seconds(int(t)), DEFAULT_VOCAB.step_to_seconds(int(d)))
            for t, d in zip(onset_steps, dur_steps)
        ]
        trips = 0
        exact = 0
        for instrument in range(DEFAULT_VOCAB.num_instruments):
            for pitch in range(DEFAULT_VOCAB.num_pitches):
                for onset_s, dur_s in grid:
                    note = NoteEvent(onset_s=onset_s, duration_s=dur_s, instrument=instrument, pitch=pitch)
                    trips += 1
                    exact += decode_note(*encode_note(note)) == note
        elapsed = time.perf_counter() - started
        criterion(
            "tokenizer round trip",
            exact == trips and elapsed < 60,
            f"{exact}/{trips} encode→decode round trips exact over all "
            f"{DEFAULT_VOCAB.num_instruments}×{DEFAULT_VOCAB.num_pitches} instrument/pitch pairs "
            f"× 50 grid times/durations ({elapsed:.0f}s < 60s)",
        )


class TestIncrementalDecoding:
    def test_cache_matches_full_forward_on_random_prefixes(self, criterion):
        config = preset_config("toy", context_len=96)
        weights = init_random(config, seed=11)
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(100):
            length = int(rng.integers(1, 65))
            tokens = rng.integers(0, config.vocab_size, size=length)
            full = forward_full(tokens, weights)
            model = Model(weights)
            incremental = np.stack([model.step(int(t)) for t in tokens])
            worst = max(worst, float(np.max(np.abs(full - incremental))))
        criterion(
            "incremental decoding equivalence",
            worst < 1e-4,
            f"100 random prefixes: max |full − cached| logit diff {worst:.2e} < 1e-4",
        )


class TestStreamabilityOracle:
    def test_constant_density_fixtures_match_closed_form(self, criterion):
        horizon = 60.0
        worst = 0.0
        ordering_ok = True
        cases = 0
        for d in (60.0, 100.0, 240.0):
            gen = [constant_density_notes(d / 3, horizon, dur_s=0.02)]
            for R in (50.0, 155.0, 400.0):
                by_buffer = {}
                for b in (0.0, 2.0):
                    measured = streamable_fraction(gen, R=R, b=b, horizon_s=horizon).fraction
                    expected = 1.0 if R >= d else min(1.0, R * b / ((d - R) * horizon))
                    worst = max(worst, abs(measured - expected))
                    by_buffer[b] = measured
                    cases += 1
                ordering_ok = ordering_ok and by_buffer[2.0] >= by_buffer[0.0]
        criterion(
            "streamable fraction oracle",
            worst <= 0.005 and ordering_ok and cases == 18,
            f"18 constant-density fixtures within 0.5% of min(1, R·b/((d−R)·T)) "
            f"(worst {100 * worst:.3f}%); buffered ≥ unbuffered on every fixture",
        )


class TestRateConversion:
    def test_reported_rates_convert_exactly(self, criterion, dense_toy_engine):
        report = profile_run(
            dense_toy_engine,
            GenParams(seed=0),
            n_generations=3,
            notes_per_generation=60,
            rate_override=155.0,
        )
        t = report["throughput"]
        identity = (
            t["notes_s"] == t["tok_s"] / 3
            and report["R_notes_s"] == report["R_tok_s"] / 3
            and measure_throughput(1550, 10.0).notes_s == 155.0 / 3
        )
        published = round(report["R_notes_s"], 1)
        criterion(
            "token/note rate conversion",
            identity and published == 51.7,
            f"notes/s = tok/s ÷ 3 exact in every report; R = 155 tok/s reads as "
            f"{published} notes/s",
        )


class TestChunkStitching:
    def test_ten_thousand_note_stream_stitches(self, criterion, dense_toy_engine):
        started = time.perf_counter()
        state = start_stream(dense_toy_engine, GenParams(seed=0))
        target = 10_000
        collected = 0
        chunks = 0
        overflows = 0
        max_context = 0
        windows_relativized = True
        onsets_monotone = True
        previous_onset = -1.0
        onset_steps: "list[int]" = []  # independent global-step ledger
        while collected < target:
            if onset_steps:
                # Recompute the expected conditioning window from scratch:
                # last <= 170 notes, oldest dropped until the span leaves
                # room to generate, times re-anchored so the window starts
                # at step 0.
                tail = onset_steps[-CHUNK_NOTES:]
                while tail[-1] - tail[0] > ROLLOVER_STEP - 1:
                    tail.pop(0)
                base, ids = _build_window(state)
                got = [DEFAULT_VOCAB.id_to_time(t) for t in ids[1::3]]
                if base != tail[0] or got != [s - tail[0] for s in tail] or got[0] != 0:
                    windows_relativized = False
            try:
                chunk = next_chunk(state, max_notes=min(170, target - collected))
            except ContextOverflow:
                overflows += 1
                break
            chunks += 1
            collected += len(chunk.notes)
            max_context = max(max_context, chunk.context_tokens)
            for note in chunk.notes:
                if note.onset_s < previous_onset:
                    onsets_monotone = False
                previous_onset = note.onset_s
                onset_steps.append(DEFAULT_VOCAB.seconds_to_step(note.onset_s))
        elapsed = time.perf_counter() - started
        criterion(
            "endless stream chunk stitching",
            (
                collected == target
                and onsets_monotone
                and windows_relativized
                and overflows == 0
                and 50 <= chunks <= 70
                and max_context <= 1024
                and elapsed < 300
            ),
            f"{collected} notes over {chunks} chunks: onsets globally non-decreasing, "
            f"every window re-anchored at onset 0, {overflows} context overflows "
            f"(peak context {max_context} tokens, {elapsed:.0f}s < 300s)",
        )


class TestEnsembleCoverage:
    ENSEMBLE = frozenset({0, 17, 53, 128})

    def _coverage(self, engine, alpha, runs=100, notes=40):
        full = 0
        distinct = []
        for i in range(runs):
            params = GenParams(seed=1000 + i, bias_alpha=alpha, ensemble=self.ENSEMBLE)
            state = start_stream(engine, params)
            got = []
            while len(got) < notes:
                got.extend(next_chunk(state, max_notes=notes - len(got)).notes)
            seen = {n.instrument for n in got}
            full += seen == set(self.ENSEMBLE)
            distinct.append(len(seen))
        return full, float(np.mean(distinct))

    def test_density_bias_covers_the_ensemble(self, criterion):
        # Instrument logit offsets are deliberately lopsided (spread 4.0) so
        # unbiased sampling tends to sit on the loudest instrument.
        table = ramp_logit_table(time_slope=0.4, instrument_spread=4.0, seed=5)
        engine = Model(scripted_weights(table))
        full_biased, mean_biased = self._coverage(engine, alpha=10.0)
        full_free, mean_free = self._coverage(engine, alpha=0.0)
        criterion(
            "ensemble coverage under density bias",
            full_biased >= 99 and mean_free < mean_biased,
            f"alpha=10: {full_biased}/100 seeded runs hear all 4 instruments within "
            f"40 notes (mean {mean_biased:.2f}); alpha=0 drops to {full_free}/100 "
            f"(mean {mean_free:.2f} — strictly lower)",
        )


class TestDensityReport:
    def test_profile_many_generations_with_csv_and_plot(self, criterion, dense_toy_engine, tmp_path):
        started = time.perf_counter()
        report = profile_run(
            dense_toy_engine,
            GenParams(seed=123),
            n_generations=500,
            notes_per_generation=170,
            buffers=(0.0, 2.0),
        )
        json_path = tmp_path / "report.json"
        csv_path = tmp_path / "density.csv"
        png_path = tmp_path / "density.png"
        write_report(report, json_path=str(json_path), csv_path=str(csv_path))
        plot_density(report["_density_profile"], str(png_path))
        elapsed = time.perf_counter() - started

        loaded = json.loads(json_path.read_text())
        bins = loaded["density"]["bins"]
        csv_rows = csv_path.read_text().splitlines()
        profile = DensityProfile.from_csv(str(csv_path))
        ok = (
            loaded["n_generations"] == 500
            and len(bins) >= 2
            and all(row["n"] == 500 for row in bins)
            and all("mean_tok_s" in row and "stdev_tok_s" in row for row in bins)
            and csv_rows[0] == "bin_start_s,mean_tok_s,stdev_tok_s,n"
            and len(csv_rows) == 1 + len(bins)
            and profile.n_generations == 500
            and png_path.stat().st_size > 1000
            and len(loaded["streamability"]) == 2
            and elapsed < 900
        )
        criterion(
            "density report procedure",
            ok,
            f"500 generations → {len(bins)} one-second bins of mean ± stdev tok/s, "
            f"CSV + shaded plot emitted ({elapsed:.0f}s < 900s)",
        )


class TestMidiRoundTrip:
    def test_thousand_note_sets_survive(self, criterion):
        rng = np.random.default_rng(99)
        instruments = np.array([0, 9, 24, 32, 48, 64, 80, 127, 128])
        sets = 1000
        survived = 0
        for _ in range(sets):
            count = int(rng.integers(1, 41))
            notes = []
            sounding = {}
            for _ in range(count):
                onset = DEFAULT_VOCAB.step_to_seconds(int(rng.integers(0, 3000)))
                duration = DEFAULT_VOCAB.step_to_seconds(int(rng.integers(1, 1001)))
                key = (int(rng.choice(instruments)), int(rng.integers(0, 128)))
                if onset < sounding.get(key, -1.0):
                    continue  # first-on/first-off can't represent same-pitch overlap
                sounding[key] = onset + duration
                notes.append(
                    NoteEvent(
                        onset_s=onset,
                        duration_s=duration,
                        instrument=key[0],
                        pitch=key[1],
                        velocity=int(rng.integers(1, 128)),
                    )
                )
            notes = sort_notes(notes)
            survived += read_midi(write_midi(notes)) == notes
        criterion(
            "MIDI file round trip",
            survived == sets,
            f"{survived}/{sets} random grid-aligned note sets identical after write→read",
        )
