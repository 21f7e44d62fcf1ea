"""
Will playback stall?  Density profiles and streamable fractions
===============================================================

A stream is playable in real time only while the engine produces tokens
at least as fast as the music consumes them.  The profiler measures the
consumption side — how many tokens per second the *music* demands — and
folds in the supply side R (tokens/s the engine actually generates) and
a pre-roll buffer b to answer: what fraction of listening time is
underrun-free?

For a constant demand d there is a closed form:

    streamable(R, b) = 1                      if R >= d
                     = min(1, R*b/((d-R)*T))  otherwise

The measured fractions land on it to within a quarter percent.
"""

import pathlib

from midistream import GenParams, Model, profile_run, streamable_fraction, write_report
from midistream.profiler import plot_density
from midistream.testing import constant_density_notes, ramp_logit_table, scripted_weights

out_dir = pathlib.Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

# --- closed-form check on synthetic fixtures -------------------------------
# 40 notes/s of demand = 120 tok/s.  An engine at 155 tok/s never stalls;
# one at 100 tok/s stalls unless the buffer hides the deficit.
fixture = [constant_density_notes(40, 60.0, dur_s=0.02)]
for R, b in ((155.0, 0.0), (100.0, 0.0), (100.0, 2.0), (100.0, 6.0)):
    frac = streamable_fraction(fixture, R=R, b=b, horizon_s=60.0).fraction
    closed = 1.0 if R >= 120 else min(1.0, R * b / ((120 - R) * 60.0))
    print(f"R={R:5.0f} tok/s  buffer={b:3.0f}s  streamable {frac:6.1%}  (closed form {closed:6.1%})")
print()

# --- profiling a real engine ------------------------------------------------
# 60 scripted-weight generations of 170 notes each: per one-second bin,
# the mean and spread of demanded tok/s.  This machine generates far
# faster than any browser would, so rate_override pins the supply side
# at a deployment-like 155 tok/s and the fractions get interesting.
engine = Model(scripted_weights(ramp_logit_table(time_slope=0.4)))
report = profile_run(engine, GenParams(seed=99), n_generations=60,
                     notes_per_generation=170, buffers=(0.0, 2.0),
                     rate_override=155.0)

print(f"assumed rate: {report['R_tok_s']:.0f} tok/s = {report['R_notes_s']:.1f} notes/s "
      f"(measured: {report['throughput']['tok_s']:.0f} tok/s)")
for row in report["density"]["bins"]:
    bar = "#" * int(row["mean_tok_s"] / 5)
    print(f"  {row['bin_start_s']:4.0f}s  {row['mean_tok_s']:6.1f} ± {row['stdev_tok_s']:5.1f} tok/s  {bar}")
for entry in report["streamability"]:
    print(f"  buffer {entry['buffer_s']:.0f}s -> {entry['fraction']:.1%} of listening time underrun-free")

# The same numbers as artifacts: JSON + CSV for machines, a shaded
# mean±stdev curve for humans.
write_report(report, json_path=str(out_dir / "profile.json"), csv_path=str(out_dir / "density.csv"))
plot_density(report["_density_profile"], str(out_dir / "density.png"))
print(f"\nwrote {out_dir / 'profile.json'}, density.csv, density.png")
