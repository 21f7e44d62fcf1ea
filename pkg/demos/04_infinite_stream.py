"""
Streaming forever from a 1024-token context
===========================================

The model sees at most 1024 tokens, but a stream has no end.  The
streamer squares that circle chunk-wise: after each chunk of up to 170
notes, the most recent notes are re-encoded with their onsets shifted to
start at zero, and generation continues in a fresh context.  Global time
is integer bookkeeping on the 10 ms grid, so onsets never run backwards
— not across one chunk, not across a thousand.

Random weights wander too slowly to show this off, so the engine here is
the real transformer with scripted weights tuned to play around 50
notes/s.
"""

from midistream import GenParams, Model, next_chunk, start_stream
from midistream.testing import ramp_logit_table, scripted_weights

engine = Model(scripted_weights(ramp_logit_table(time_slope=0.4)))
state = start_stream(engine, GenParams(seed=0))

# Pull 2000 notes = a dozen chunks.  Watch the window slide: each chunk
# is conditioned on the previous <= 170 notes, re-anchored at step 0, yet
# the global clock only ever moves forward.
total = 0
last_onset = -1.0
print(f"{'chunk':>5} {'notes':>6} {'window':>7} {'context':>8} {'first onset':>12} {'last onset':>11}")
while total < 2000:
    chunk = next_chunk(state, max_notes=min(170, 2000 - total))
    total += len(chunk.notes)
    first, last = chunk.notes[0].onset_s, chunk.notes[-1].onset_s
    assert first >= last_onset, "time ran backwards across a chunk boundary"
    last_onset = last
    if chunk.index % 3 == 0 or total >= 2000:
        print(f"{chunk.index:>5} {len(chunk.notes):>6} {chunk.window_notes:>7} "
              f"{chunk.context_tokens:>8} {first:>11.2f}s {last:>10.2f}s")

print()
print(f"{total} notes, clock at {last_onset:.1f}s, context never above "
      f"{1 + 3 * 170 * 2} tokens — the stream can keep this up indefinitely.")
