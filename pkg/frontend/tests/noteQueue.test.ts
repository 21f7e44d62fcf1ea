import { describe, expect, it } from "vitest";
import { NoteQueue } from "../src/noteQueue.js";
import type { Note } from "../src/protocol.js";

const note = (onset_s: number, pitch = 60): Note => ({
  onset_s,
  dur_s: 0.1,
  instrument: 0,
  pitch,
  velocity: 80,
});

describe("NoteQueue", () => {
  it("drains in onset order up to the given time", () => {
    const q = new NoteQueue();
    for (const t of [0.0, 0.5, 1.0, 1.5, 2.0]) q.push(note(t));
    expect(q.popDue(1.0).map((n) => n.onset_s)).toEqual([0.0, 0.5, 1.0]);
    expect(q.size).toBe(2);
    expect(q.popDue(0.1)).toEqual([]);
    expect(q.popDue(Infinity).map((n) => n.onset_s)).toEqual([1.5, 2.0]);
    expect(q.size).toBe(0);
  });

  it("tolerates slightly out-of-order arrivals", () => {
    const q = new NoteQueue();
    q.push(note(1.0));
    q.push(note(1.2));
    q.push(note(1.1)); // late delivery of an earlier note
    expect(q.popDue(Infinity).map((n) => n.onset_s)).toEqual([1.0, 1.1, 1.2]);
  });

  it("tracks the highest onset ever queued", () => {
    const q = new NoteQueue();
    expect(q.maxQueuedOnset).toBe(0);
    q.push(note(3.0));
    q.push(note(2.5));
    expect(q.maxQueuedOnset).toBe(3.0);
    q.popDue(Infinity);
    expect(q.maxQueuedOnset).toBe(3.0); // popping does not lower it
    q.clear();
    expect(q.maxQueuedOnset).toBe(0);
  });

  it("stays correct across the internal compaction threshold", () => {
    const q = new NoteQueue();
    for (let i = 0; i < 600; i++) q.push(note(i * 0.01, i % 128));
    const first = q.popDue(2.995); // 300 notes, past the compaction point
    expect(first).toHaveLength(300);
    q.push(note(6.0));
    const rest = q.popDue(Infinity);
    expect(rest).toHaveLength(301);
    expect(rest[rest.length - 1]?.onset_s).toBe(6.0);
    const onsets = [...first, ...rest].map((n) => n.onset_s);
    expect([...onsets].sort((a, b) => a - b)).toEqual(onsets);
  });
});
