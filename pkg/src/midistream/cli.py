"""Command-line front end: one-shot generation, live streaming, profiling.

Exit codes: 0 success, 2 bad flags, 3 input/output problems, 4 model or
weight problems, 5 requested port already in use.  Diagnostic messages go
to stderr; stdout carries only note JSON-lines (stream) or the summary
line (profile).
"""

from __future__ import annotations

import argparse
import asyncio
import errno
import json
import signal
import sys
import threading
import time

from .decoding import GenParams
from .midi_io import MidiError, TooManyInstruments, read_midi, write_midi
from .model import ContextOverflow, Model, WeightError, init_random, load_weights, preset_config
from .profiler import plot_density, profile_run, write_report
from .service import StreamService
from .streamer import SinkClosed, run_stream, start_stream
from .vocab import DEFAULT_VOCAB

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_MODEL = 4
EXIT_PORT = 5

# Instruments are GM program numbers 0-127 plus 128 for the drum kit.
# One-shot export defaults to a small band so the result always fits the
# fifteen-melodic-channel MIDI file limit; pass --ensemble to change it.
GENERATE_DEFAULT_ENSEMBLE = "0,24,32,128"

_PARAM_DEFAULTS = GenParams()

_MODEL_FLAGS = {
    "weights": None,
    "config_preset": "toy",
    "seed": 0,
    "temperature": _PARAM_DEFAULTS.temperature,
    "top_p": _PARAM_DEFAULTS.top_p,
    "alpha": _PARAM_DEFAULTS.bias_alpha,
    "ensemble": None,
    "config": None,
}

DEFAULTS = {
    "generate": {**_MODEL_FLAGS, "notes": 170, "prompt": None, "out": "out.mid"},
    "stream": {
        **_MODEL_FLAGS,
        "prompt": None,
        "notes_limit": None,
        "listen": None,
        "buffer_s": 2.0,
        "rate_limit": None,
        "paused": False,
        "quiet": False,
    },
    "profile": {
        **_MODEL_FLAGS,
        "generations": 500,
        "notes": 170,
        "buffers": "0,2",
        "rate_override": None,
        "out": "report.json",
        "csv": "density.csv",
        "plot": None,
    },
}


def _add_model_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--weights", help="saved weight container (omit for seeded random init)")
    cmd.add_argument(
        "--config-preset",
        choices=["toy", "small", "medium"],
        help="architecture preset when initialising random weights (default toy); "
        "ignored when --weights is given, whose stored config wins",
    )
    cmd.add_argument("--seed", type=int, help="seed for weights and sampling (default 0)")
    cmd.add_argument("--temperature", type=float, help=f"sampling temperature (default {_PARAM_DEFAULTS.temperature})")
    cmd.add_argument("--top-p", type=float, help=f"nucleus mass (default {_PARAM_DEFAULTS.top_p})")
    cmd.add_argument("--alpha", type=float, help=f"ensemble density bias in logits per second of silence (default {_PARAM_DEFAULTS.bias_alpha})")
    cmd.add_argument(
        "--ensemble",
        help='comma-separated instrument ids to restrict notes to, e.g. "0,24,32,128" '
        "(GM program numbers 0-127; 128 = drum kit)",
    )
    cmd.add_argument(
        "--config",
        help="JSON file whose keys mirror the long flag names; explicit flags win",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="midistream",
        description="Stream-oriented symbolic music generation.",
    )
    parser.set_defaults(cmd=None, func=None)
    sub = parser.add_subparsers(metavar="{generate,stream,profile}")

    gen = sub.add_parser(
        "generate",
        argument_default=argparse.SUPPRESS,
        help="one-shot generation into a MIDI file",
    )
    _add_model_flags(gen)
    gen.add_argument("--notes", type=int, help="number of notes to generate (default 170)")
    gen.add_argument("--prompt", help="MIDI file to condition on")
    gen.add_argument("--out", help="output MIDI path (default out.mid)")
    gen.set_defaults(cmd="generate", func=cmd_generate)

    stream = sub.add_parser(
        "stream",
        argument_default=argparse.SUPPRESS,
        help="endless generation as JSON-lines and/or a WebSocket service",
    )
    _add_model_flags(stream)
    stream.add_argument("--prompt", help="MIDI file to condition on")
    stream.add_argument("--notes-limit", type=int, help="stop after this many notes (default: endless)")
    stream.add_argument("--listen", metavar="HOST:PORT", help="also serve the WebSocket endpoint")
    stream.add_argument("--buffer-s", type=float, help="playback buffer advertised to clients (default 2.0)")
    stream.add_argument("--rate-limit", type=float, metavar="TOK_S", help="pace note emission to this many tokens per second")
    stream.add_argument("--paused", action="store_true", help="with --listen: start idle and wait for a start control")
    stream.add_argument("--quiet", action="store_true", help="suppress JSON-lines on stdout")
    stream.set_defaults(cmd="stream", func=cmd_stream)

    prof = sub.add_parser(
        "profile",
        argument_default=argparse.SUPPRESS,
        help="measure throughput, density, and streamable fraction",
    )
    _add_model_flags(prof)
    prof.add_argument("--generations", type=int, help="number of generations to profile (default 500)")
    prof.add_argument("--notes", type=int, help="notes per generation (default 170)")
    prof.add_argument("--buffers", help='comma-separated playback buffers in seconds (default "0,2")')
    prof.add_argument("--rate-override", type=float, help="evaluate streamable %% at this generation rate instead of the measured one")
    prof.add_argument("--out", help="report JSON path (default report.json)")
    prof.add_argument("--csv", help="density CSV path (default density.csv)")
    prof.add_argument("--plot", help="optional density plot PNG path")
    prof.set_defaults(cmd="profile", func=cmd_profile)
    return parser


def _merge_flags(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> dict:
    """Defaults, then --config JSON, then explicit flags."""
    explicit = {k: v for k, v in vars(ns).items() if k not in ("cmd", "func")}
    defaults = DEFAULTS[ns.cmd]
    merged = dict(defaults)
    config_path = explicit.get("config", defaults["config"])
    if config_path:
        try:
            with open(config_path) as fh:
                from_file = json.load(fh)
        except json.JSONDecodeError as exc:
            parser.error(f"--config {config_path}: not valid JSON ({exc})")
        if not isinstance(from_file, dict):
            parser.error(f"--config {config_path}: expected a JSON object")
        unknown = set(from_file) - set(defaults)
        if unknown:
            parser.error(f"--config {config_path}: unknown keys {sorted(unknown)}")
        merged.update(from_file)
    merged.update(explicit)
    return merged


def _parse_ensemble(value) -> "frozenset[int] | None":
    if value is None:
        return None
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        value = [int(p) for p in parts]
    ensemble = frozenset(int(v) for v in value)
    bad = [j for j in ensemble if not 0 <= j <= DEFAULT_VOCAB.num_instruments - 1]
    if bad:
        raise ValueError(f"ensemble ids out of range: {sorted(bad)} (valid: 0-128)")
    return ensemble or None


def _build_engine(merged: dict) -> Model:
    if merged["weights"]:
        store = load_weights(merged["weights"])
    else:
        store = init_random(preset_config(merged["config_preset"]), seed=merged["seed"])
    return Model(store)


def _build_params(merged: dict) -> GenParams:
    return GenParams(
        temperature=float(merged["temperature"]),
        top_p=float(merged["top_p"]),
        bias_alpha=float(merged["alpha"]),
        ensemble=_parse_ensemble(merged["ensemble"]),
        seed=int(merged["seed"]),
    )


def _load_prompt(merged: dict):
    if not merged.get("prompt"):
        return None
    with open(merged["prompt"], "rb") as fh:
        return read_midi(fh.read())


# --- subcommands -------------------------------------------------------------


def cmd_generate(merged: dict) -> int:
    if merged["ensemble"] is None:
        merged = {**merged, "ensemble": GENERATE_DEFAULT_ENSEMBLE}
    engine = _build_engine(merged)
    state = start_stream(engine, _build_params(merged), prompt=_load_prompt(merged))
    events = []
    run_stream(state, sink=events.append, max_notes=merged["notes"])
    data = write_midi(events)
    with open(merged["out"], "wb") as fh:
        fh.write(data)
    print(f"wrote {len(events)} notes to {merged['out']}", file=sys.stderr)
    return 0


def _print_summary(summary: dict) -> None:
    print(json.dumps(summary), file=sys.stderr)


def cmd_stream(merged: dict) -> int:
    if merged["paused"] and not merged["listen"]:
        raise ValueError("--paused needs --listen (stdout streaming has no control channel)")
    engine = _build_engine(merged)
    params = _build_params(merged)
    prompt = _load_prompt(merged)
    limit = merged["notes_limit"]

    def echo(event) -> None:
        if merged["quiet"]:
            return
        try:
            print(json.dumps(event.to_wire()), flush=True)
        except BrokenPipeError:
            raise SinkClosed("stdout consumer went away")

    if merged["listen"]:
        host, _, port_text = merged["listen"].rpartition(":")
        try:
            port = int(port_text)
        except ValueError:
            raise ValueError(f"--listen expects HOST:PORT, got {merged['listen']!r}")
        service = StreamService(
            engine,
            params,
            prompt=prompt,
            buffer_s=merged["buffer_s"],
            rate_tok_s=merged["rate_limit"],
            running=not merged["paused"],
            echo=_note_limiter(echo, limit, lambda: service.close()),
        )

        async def _serve() -> None:
            # Announce the bound endpoint once listening — with port 0 the
            # kernel picks the port, so clients need to read it somewhere.
            ready = asyncio.Event()
            run = asyncio.create_task(service.run(host or "127.0.0.1", port, ready=ready))
            bound = asyncio.create_task(ready.wait())
            await asyncio.wait({run, bound}, return_when=asyncio.FIRST_COMPLETED)
            bound.cancel()
            if service.port is not None:
                print(f"serving ws://{host or '127.0.0.1'}:{service.port}", file=sys.stderr, flush=True)
            await run

        try:
            asyncio.run(_serve())
        except KeyboardInterrupt:
            pass
        _print_summary(service.summary())
        return 0

    stop_event = threading.Event()
    previous_handler = signal.signal(signal.SIGINT, lambda *_: stop_event.set())
    try:
        summary = run_stream(
            state=start_stream(engine, params, prompt=prompt),
            sink=_rate_limited(echo, merged["rate_limit"]),
            max_notes=limit,
            stop=stop_event,
        )
    except KeyboardInterrupt:
        return 0
    finally:
        signal.signal(signal.SIGINT, previous_handler)
    _print_summary(summary.to_dict())
    return 0


def _note_limiter(echo, limit, reached):
    if limit is None:
        return echo
    seen = [0]

    def wrapped(event):
        if seen[0] >= limit:
            return
        seen[0] += 1
        echo(event)
        if seen[0] >= limit:
            reached()

    return wrapped


def _rate_limited(sink, rate_tok_s):
    if rate_tok_s is None:
        return sink
    started = time.perf_counter()
    sent = [0]

    def wrapped(event):
        sent[0] += 1
        target = started + 3 * sent[0] / rate_tok_s
        delay = target - time.perf_counter()
        if delay > 0:
            time.sleep(delay)
        sink(event)

    return wrapped


def cmd_profile(merged: dict) -> int:
    engine = _build_engine(merged)
    buffers = tuple(float(p) for p in str(merged["buffers"]).split(",") if p.strip() != "")
    if not buffers:
        raise ValueError('--buffers expects comma-separated seconds, e.g. "0,2"')
    report = profile_run(
        engine,
        _build_params(merged),
        n_generations=merged["generations"],
        notes_per_generation=merged["notes"],
        buffers=buffers,
        rate_override=merged["rate_override"],
    )
    write_report(report, json_path=merged["out"], csv_path=merged["csv"])
    if merged["plot"]:
        plot_density(report["_density_profile"], merged["plot"])
    summary = {
        "tok_s": report["throughput"]["tok_s"],
        "notes_s": report["throughput"]["notes_s"],
        "R_tok_s": report["R_tok_s"],
        "streamable": {str(s["buffer_s"]): s["fraction"] for s in report["streamability"]},
        "report": merged["out"],
        "csv": merged["csv"],
    }
    print(json.dumps(summary))
    return 0


# --- entry point --------------------------------------------------------------


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.func is None:
        parser.print_help(file=sys.stderr)
        return EXIT_USAGE
    merged = _merge_flags(parser, ns)
    try:
        return ns.func(merged)
    except TooManyInstruments as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (WeightError, ContextOverflow, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except MidiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PORT
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
