import { describe, expect, it } from "vitest";
import { defaultView, instrumentHue, layoutNotes, playheadX, RollWindow } from "../src/pianoRoll.js";
import { meterReading } from "../src/bufferMeter.js";
import { pitchToHz, timbreFor, velocityToGain } from "../src/synth.js";
import { GM_NAMES, instrumentName, selectionToEnsemble } from "../src/controls.js";
import type { Note } from "../src/protocol.js";

const note = (onset_s: number, pitch = 60, instrument = 0, dur_s = 0.5): Note => ({
  onset_s,
  dur_s,
  instrument,
  pitch,
  velocity: 80,
});

describe("piano-roll layout", () => {
  it("maps onset seconds to x pixels with the playhead fixed at 70%", () => {
    const view = defaultView(10.0, 1000, 600); // 7s past + 3s future
    expect(playheadX(view)).toBeCloseTo(700, 10);

    const rects = layoutNotes([note(10.0), note(3.0), note(13.0)], view);
    expect(rects).toHaveLength(3);
    expect(rects[0]?.x).toBeCloseTo(700, 6); // at the playhead
    expect(rects[1]?.x).toBeCloseTo(0, 6); // oldest visible edge
    expect(rects[2]?.x).toBeCloseTo(1000, 6); // newest edge
    expect(rects[0]?.sounding).toBe(true);
    expect(rects[2]?.sounding).toBe(false);
  });

  it("culls notes outside the window", () => {
    const view = defaultView(100.0, 1000, 600);
    const rects = layoutNotes([note(80.0), note(104.0), note(95.0)], view);
    expect(rects).toHaveLength(1);
    expect(rects[0]?.x).toBeCloseTo((95 - 93) * 100, 6);
  });

  it("clamps pitches into the visible range and keeps rects at least 2px", () => {
    const view = defaultView(5.0, 1000, 600);
    const rects = layoutNotes([note(5.0, 0), note(5.0, 127), note(5.0, 60, 0, 0.001)], view);
    for (const r of rects) {
      expect(r.y).toBeGreaterThanOrEqual(0);
      expect(r.y).toBeLessThanOrEqual(600);
      expect(r.w).toBeGreaterThanOrEqual(2);
      expect(r.h).toBeGreaterThanOrEqual(2);
    }
  });

  it("gives each instrument family a stable hue and drums no hue", () => {
    expect(instrumentHue(0)).toBe(instrumentHue(7)); // both pianos
    expect(instrumentHue(0)).not.toBe(instrumentHue(40)); // piano vs violin
    expect(instrumentHue(128)).toBe(0);
  });

  it("prunes old notes from the rolling window", () => {
    const w = new RollWindow();
    w.add(note(1.0));
    w.add(note(5.0));
    w.add(note(9.0));
    w.prune(6.0);
    expect(w.all().map((n) => n.onset_s)).toEqual([9.0]);
    w.clear();
    expect(w.all()).toHaveLength(0);
  });
});

describe("buffer meter", () => {
  it("turns seconds-ahead into a bounded reading with health colors", () => {
    expect(meterReading(3.0, 4.0)).toEqual({ fill: 0.75, color: "green", label: "3.0s buffered" });
    expect(meterReading(0.5, 4.0).color).toBe("amber");
    expect(meterReading(0, 4.0)).toMatchObject({ fill: 0, color: "red" });
    expect(meterReading(99, 4.0).fill).toBe(1);
  });
});

describe("synth mapping", () => {
  it("tunes A4 to 440 Hz and octaves by powers of two", () => {
    expect(pitchToHz(69)).toBeCloseTo(440, 10);
    expect(pitchToHz(81)).toBeCloseTo(880, 10);
    expect(pitchToHz(57)).toBeCloseTo(220, 10);
  });

  it("keeps velocity gain in [0, 1] and monotone", () => {
    expect(velocityToGain(0)).toBe(0);
    expect(velocityToGain(127)).toBe(1);
    expect(velocityToGain(64)).toBeGreaterThan(velocityToGain(32));
    expect(velocityToGain(200)).toBe(1); // clamped
  });

  it("gives every instrument a recipe, families distinct", () => {
    for (let program = 0; program <= 128; program++) {
      const t = timbreFor(program);
      expect(t.gain).toBeGreaterThan(0);
      expect(t.decayS).toBeGreaterThan(0);
    }
    expect(timbreFor(0).wave).not.toBe(timbreFor(32).wave); // piano vs bass
  });
});

describe("instrument palette", () => {
  it("names all 128 GM programs plus the drum kit", () => {
    expect(GM_NAMES).toHaveLength(128);
    expect(instrumentName(0)).toBe("Acoustic Grand Piano");
    expect(instrumentName(40)).toBe("Violin");
    expect(instrumentName(128)).toBe("Drum Kit");
  });

  it("maps an empty selection to the full palette (null)", () => {
    expect(selectionToEnsemble([])).toBeNull();
    expect(selectionToEnsemble([128, 0, 24])).toEqual([0, 24, 128]);
  });
});
