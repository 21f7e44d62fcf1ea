"""
A live note feed over WebSocket, steered while it plays
=======================================================

The service broadcasts one infinite stream to every connected client as
JSON frames and accepts control frames back.  Parameter changes are
chunk-atomic: they take effect at the next chunk boundary, never in the
middle of one, and the ack tells you exactly which chunk that is.

This script runs server and client in one asyncio loop: connect, read
the hello, listen to a few notes, swap the ensemble to solo drums, and
watch the feed follow.
"""

import asyncio
import json

from websockets.asyncio.client import connect

from midistream import GenParams, Model, StreamService
from midistream.testing import ramp_logit_table, scripted_weights


async def main():
    engine = Model(scripted_weights(ramp_logit_table(time_slope=0.4)))
    service = StreamService(
        engine,
        GenParams(seed=5, ensemble=frozenset({0, 24, 32})),
        rate_tok_s=600,  # throttle so the console is readable
    )
    ready = asyncio.Event()
    server = asyncio.create_task(service.run("127.0.0.1", 0, ready=ready))
    await ready.wait()

    async with connect(f"ws://127.0.0.1:{service.port}") as ws:
        # First frame is always the hello: protocol version, vocabulary,
        # current parameters, suggested client buffer.
        hello = json.loads(await ws.recv())
        print(f"hello: v{hello['v']}, buffer {hello['buffer_s']}s, "
              f"params {hello['params']}")
        print()

        # Notes arrive in onset order, with chunk markers between chunks.
        print("listening...")
        heard = 0
        while heard < 8:
            frame = json.loads(await ws.recv())
            if "onset_s" in frame:
                heard += 1
                print(f"  note  t={frame['onset_s']:6.2f}s  "
                      f"instrument={frame['instrument']:3d}  pitch={frame['pitch']}")
            elif "chunk" in frame:
                print(f"  ---- chunk {frame['chunk']} ----")

        # Steer the stream: drums only.  The ack names the chunk at which
        # the change lands; frames after that chunk's marker obey it.
        await ws.send(json.dumps({"kind": "set_params", "ensemble": [128]}))
        print()
        print("sent set_params ensemble=[128] ...")
        applied_at = None
        current_chunk = None
        drum_notes = 0
        while drum_notes < 6:
            frame = json.loads(await ws.recv())
            if "applied_at_chunk" in frame:
                applied_at = frame["applied_at_chunk"]
                print(f"  ack: applies from chunk {applied_at}")
            elif "chunk" in frame:
                current_chunk = frame["chunk"]
            elif "onset_s" in frame and applied_at is not None \
                    and current_chunk is not None and current_chunk >= applied_at:
                drum_notes += 1
                print(f"  note  t={frame['onset_s']:6.2f}s  "
                      f"instrument={frame['instrument']:3d}  pitch={frame['pitch']}")
                assert frame["instrument"] == 128, "ensemble change leaked mid-chunk"

    service.close()
    await server
    s = service.summary()
    print()
    print(f"served {s['notes']} notes in {s['wall_s']:.1f}s "
          f"({s['tok_s']:.0f} tok/s); every note after the acked boundary was drums.")


if __name__ == "__main__":
    asyncio.run(main())
