"""
Notes, the token grid, and getting back what you put in
=======================================================

Every note becomes exactly three tokens: when it starts, how long it
lasts, and what it is (instrument x pitch).  This script walks one small
phrase through quantization, encoding, and decoding.
"""

from midistream import DEFAULT_VOCAB, NoteEvent, decode_sequence, encode_sequence, quantize

# A four-note phrase: two piano notes, a bass note, and a kick drum.
# Times are in seconds; instrument 128 is the drum kit.
phrase = [
    NoteEvent(onset_s=0.00, duration_s=0.50, instrument=0, pitch=60),
    NoteEvent(onset_s=0.50, duration_s=0.50, instrument=0, pitch=64),
    NoteEvent(onset_s=0.50, duration_s=1.00, instrument=32, pitch=36),
    NoteEvent(onset_s=1.00, duration_s=0.05, instrument=128, pitch=35),
]

# The vocabulary lives on a 10 ms grid.  An onset of 0.503 s does not
# exist; quantize() snaps it to the nearest grid line and clamps the
# duration into [10 ms, 10 s].
sloppy = NoteEvent(onset_s=0.503, duration_s=0.0004, instrument=0, pitch=72)
print("before quantize:", sloppy)
print("after quantize: ", quantize(sloppy))
print()

# Encoding flattens the phrase into ids.  One leading start-of-sequence
# token, then strict (time, duration, note) triplets.
ids = encode_sequence(phrase)
print(f"{len(phrase)} notes -> {len(ids)} tokens (1 SOS + 3 per note)")
print("ids:", ids)

# The id ranges tell you what each token means without any side table:
#   [0, 10000)      onset step        (10 ms per step)
#   [10000, 11000)  duration steps    (1..1000, stored one-based)
#   [11000, 27512)  instrument*128+pitch
#   27512           SOS
for tok in ids[:7]:
    print(f"  {tok:>6}  {DEFAULT_VOCAB.kind_of(tok).value}")
print()

# Decoding is exact: same onsets, same durations, same instruments.
back = decode_sequence(ids)
assert back == phrase
print("decode(encode(phrase)) == phrase:", back == phrase)
