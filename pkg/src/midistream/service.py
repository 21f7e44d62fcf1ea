"""WebSocket broadcast of a live note stream, with client control.

One generation task feeds every connected client (single-performance
model): notes go out as JSON text frames in stream order, and clients
steer the stream by sending control frames that take effect at the next
chunk boundary — a chunk never mixes old and new parameters.

Wire protocol (all frames JSON objects, discriminated by their keys):

    hello  {"v", "vocab", "params", "buffer_s"}     server -> client, first
    note   {"onset_s", "dur_s", "instrument", "pitch", "velocity"}
    chunk  {"chunk": index}                          marks a chunk boundary
    control {"kind": "start"|"stop"|"set_params", ...partial params}
    ack    {"applied_at_chunk": index}               reply to a control frame
    error  {"code", "message"}                       connection stays open

Slow clients get a bounded send queue; when it overflows the client is
disconnected with close reason "lagged" rather than stalling the stream.
"""

from __future__ import annotations

import asyncio
import json
import time
from collections import deque

from websockets.asyncio.server import serve as _ws_serve
from websockets.exceptions import ConnectionClosed

from .decoding import GenParams
from .streamer import CHUNK_NOTES, next_chunk, start_stream
from .vocab import DEFAULT_VOCAB, VocabSpec

PROTOCOL_VERSION = 1
SEND_QUEUE_FRAMES = 256
LAGGED_CLOSE_CODE = 1013  # "try again later"

ERR_BAD_JSON = "bad-json"
ERR_UNKNOWN_KIND = "unknown-kind"
ERR_BAD_PARAMS = "bad-params"

_CONTROL_KINDS = ("start", "stop", "set_params")


class StreamService:
    """Owns one stream state, one generation task, and the broadcast hub."""

    def __init__(
        self,
        engine,
        params: GenParams,
        vocab: VocabSpec = DEFAULT_VOCAB,
        buffer_s: float = 2.0,
        prompt=None,
        running: bool = True,
        rate_tok_s: float | None = None,
        max_queue: int = SEND_QUEUE_FRAMES,
        echo=None,
    ):
        if rate_tok_s is not None and rate_tok_s <= 0:
            raise ValueError("rate_tok_s must be positive")
        self.state = start_stream(engine, params, prompt=prompt, vocab=vocab)
        self.buffer_s = buffer_s
        self.rate_tok_s = rate_tok_s
        self.max_queue = max_queue
        self.echo = echo
        self.port: int | None = None
        self.notes_sent = 0
        self.chunks_done = 0
        self._running = running
        self._clients: dict = {}  # websocket -> send queue
        self._mailbox: deque = deque()  # (websocket, message) control frames
        self._wake = asyncio.Event()
        self._shutdown = asyncio.Event()
        self._started_at = time.perf_counter()
        # Rate pacing is anchored to the latest idle->running transition so
        # a paused spell never turns into a catch-up burst on resume.
        self._pace_started = self._started_at
        self._pace_base_notes = 0

    # -- summary ------------------------------------------------------------

    def summary(self) -> dict:
        wall = time.perf_counter() - self._started_at
        tokens = 3 * self.notes_sent
        tok_s = tokens / max(wall, 1e-3)
        return {
            "notes": self.notes_sent,
            "chunks": self.chunks_done,
            "tokens": tokens,
            "wall_s": wall,
            "tok_s": tok_s,
            "notes_s": tok_s / 3,
        }

    # -- broadcast hub -------------------------------------------------------

    def _fan_out(self, frame: dict) -> None:
        text = json.dumps(frame)
        for ws, queue in list(self._clients.items()):
            try:
                queue.put_nowait(text)
            except asyncio.QueueFull:
                self._clients.pop(ws, None)
                asyncio.get_running_loop().create_task(
                    ws.close(code=LAGGED_CLOSE_CODE, reason="lagged")
                )

    def _send_to(self, ws, frame: dict) -> None:
        queue = self._clients.get(ws)
        if queue is not None:
            try:
                queue.put_nowait(json.dumps(frame))
            except asyncio.QueueFull:
                pass  # about to be dropped as lagged anyway

    # -- generation task ------------------------------------------------------

    def _emit_note(self, event) -> None:
        self.notes_sent += 1
        if self.echo is not None:
            self.echo(event)
        self._fan_out(event.to_wire())

    def _generate_chunk(self):
        """Runs in a worker thread: one chunk, notes handed to the loop live."""
        loop = self._loop

        def on_note(event):
            if self.rate_tok_s is not None:
                since_start = self.notes_sent - self._pace_base_notes
                target = self._pace_started + 3 * (since_start + 1) / self.rate_tok_s
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
            loop.call_soon_threadsafe(self._emit_note, event)

        return next_chunk(self.state, on_note=on_note)

    def _apply_control(self, ws, message: dict) -> None:
        kind = message["kind"]
        if kind == "set_params":
            partial = {k: v for k, v in message.items() if k != "kind"}
            try:
                new_params = self.state.params.merged(partial)
            except (ValueError, TypeError) as exc:
                self._send_to(ws, {"code": ERR_BAD_PARAMS, "message": str(exc)})
                return
            self.state.set_params(new_params)
        elif kind == "start":
            if not self._running:
                self._running = True
                self._pace_started = time.perf_counter()
                self._pace_base_notes = self.notes_sent
        elif kind == "stop":
            self._running = False
        self._send_to(ws, {"applied_at_chunk": self.state.chunk_index})

    def _drain_mailbox(self) -> None:
        while self._mailbox:
            ws, message = self._mailbox.popleft()
            self._apply_control(ws, message)

    async def _pump(self) -> None:
        self._loop = asyncio.get_running_loop()
        while not self._shutdown.is_set():
            self._drain_mailbox()  # chunk boundary: controls are chunk-atomic
            if not self._running:
                await self._wake.wait()
                self._wake.clear()
                continue
            self._fan_out({"chunk": self.state.chunk_index})
            await self._loop.run_in_executor(None, self._generate_chunk)
            self.chunks_done += 1

    # -- per-client handling ---------------------------------------------------

    async def _writer(self, ws, queue) -> None:
        while True:
            await ws.send(await queue.get())

    async def _handler(self, ws) -> None:
        await ws.send(
            json.dumps(
                {
                    "v": PROTOCOL_VERSION,
                    "vocab": self.state.vocab.to_dict(),
                    "params": self.state.params.to_dict(),
                    "buffer_s": self.buffer_s,
                }
            )
        )
        queue: asyncio.Queue = asyncio.Queue(maxsize=self.max_queue)
        self._clients[ws] = queue
        writer = asyncio.create_task(self._writer(ws, queue))
        try:
            async for raw in ws:
                try:
                    message = json.loads(raw)
                    if not isinstance(message, dict):
                        raise ValueError("frame must be a JSON object")
                except ValueError as exc:
                    self._send_to(ws, {"code": ERR_BAD_JSON, "message": str(exc)})
                    continue
                if message.get("kind") not in _CONTROL_KINDS:
                    self._send_to(
                        ws,
                        {
                            "code": ERR_UNKNOWN_KIND,
                            "message": f"kind must be one of {list(_CONTROL_KINDS)}",
                        },
                    )
                    continue
                self._mailbox.append((ws, message))
                if not self._running:
                    # no chunk boundary will come around; apply right away
                    self._drain_mailbox()
                self._wake.set()
        except ConnectionClosed:
            pass
        finally:
            self._clients.pop(ws, None)
            writer.cancel()

    # -- lifecycle ---------------------------------------------------------------

    def close(self) -> None:
        self._shutdown.set()
        self._wake.set()

    async def run(self, host: str = "127.0.0.1", port: int = 8765, ready=None) -> None:
        """Bind, then pump chunks and serve clients until close() or cancel."""
        async with _ws_serve(self._handler, host, port) as server:
            self.port = server.sockets[0].getsockname()[1]
            self._started_at = time.perf_counter()
            self._pace_started = self._started_at
            if ready is not None:
                ready.set()
            pump = asyncio.create_task(self._pump())
            try:
                await asyncio.wait(
                    [pump, asyncio.create_task(self._shutdown.wait())],
                    return_when=asyncio.FIRST_COMPLETED,
                )
                if pump.done() and pump.exception() is not None:
                    raise pump.exception()
            finally:
                self.close()
                pump.cancel()
                for ws in list(self._clients):
                    await ws.close()


def serve_forever(engine, params: GenParams, host: str, port: int, **kwargs) -> StreamService:
    """Blocking convenience wrapper: serve until interrupted, return the service."""
    service = StreamService(engine, params, **kwargs)
    try:
        asyncio.run(service.run(host, port))
    except KeyboardInterrupt:
        pass
    return service
