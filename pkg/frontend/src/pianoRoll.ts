/**
 * Scrolling piano-roll view of the stream.
 *
 * Layout is a pure function from (notes, view window, canvas size) to
 * rectangles, so it can be tested headless; the canvas painter below it
 * just fills what the layout returns.  Time runs left to right with the
 * playhead fixed at 70% of the width: the past scrolls away on the
 * left, the buffered future is visible on the right — watching notes
 * pile up to the right of the playhead *is* the buffer meter, visually.
 */

import type { Note } from "./protocol.js";
import { DRUM_INSTRUMENT } from "./protocol.js";

export interface RollRect {
  x: number;
  y: number;
  w: number;
  h: number;
  /** Hue bucket, stable per instrument. */
  hue: number;
  drum: boolean;
  /** True when the playhead is inside the note right now. */
  sounding: boolean;
}

export interface RollView {
  /** Stream time at the playhead, seconds. */
  now: number;
  /** Seconds of past shown left of the playhead. */
  pastS: number;
  /** Seconds of future shown right of it. */
  futureS: number;
  width: number;
  height: number;
  pitchLo: number;
  pitchHi: number;
}

export const defaultView = (now: number, width: number, height: number): RollView => ({
  now,
  pastS: 7,
  futureS: 3,
  width,
  height,
  pitchLo: 21, // A0
  pitchHi: 108, // C8
});

export const instrumentHue = (instrument: number): number =>
  instrument === DRUM_INSTRUMENT ? 0 : (Math.floor(instrument / 8) * 137.5) % 360;

export const playheadX = (view: RollView): number =>
  (view.pastS / (view.pastS + view.futureS)) * view.width;

export function layoutNotes(notes: Iterable<Note>, view: RollView): RollRect[] {
  const span = view.pastS + view.futureS;
  const pxPerS = view.width / span;
  const left = view.now - view.pastS;
  const lanes = view.pitchHi - view.pitchLo + 1;
  const laneH = view.height / lanes;
  const out: RollRect[] = [];
  for (const note of notes) {
    const endS = note.onset_s + Math.max(note.dur_s, 0.05);
    if (endS < left || note.onset_s > left + span) continue;
    const pitch = Math.max(view.pitchLo, Math.min(view.pitchHi, note.pitch));
    out.push({
      x: (note.onset_s - left) * pxPerS,
      y: view.height - (pitch - view.pitchLo + 1) * laneH,
      w: Math.max(2, (endS - note.onset_s) * pxPerS),
      h: Math.max(2, laneH - 1),
      hue: instrumentHue(note.instrument),
      drum: note.instrument === DRUM_INSTRUMENT,
      sounding: note.onset_s <= view.now && view.now < endS,
    });
  }
  return out;
}

/** Keeps the last few seconds of notes; older ones fall off the left edge. */
export class RollWindow {
  private notes: Note[] = [];

  add(note: Note): void {
    this.notes.push(note);
  }

  prune(olderThan: number): void {
    if (this.notes.length === 0) return;
    let keepFrom = 0;
    while (keepFrom < this.notes.length) {
      const n = this.notes[keepFrom]!;
      if (n.onset_s + n.dur_s >= olderThan) break;
      keepFrom++;
    }
    if (keepFrom > 0) this.notes = this.notes.slice(keepFrom);
  }

  all(): readonly Note[] {
    return this.notes;
  }

  clear(): void {
    this.notes = [];
  }
}

export function drawRoll(canvas: HTMLCanvasElement, window: RollWindow, now: number): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const view = defaultView(now, canvas.width, canvas.height);
  window.prune(now - view.pastS - 1);

  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, view.width, view.height);

  // octave guides
  ctx.fillStyle = "#1d2028";
  const lanes = view.pitchHi - view.pitchLo + 1;
  const laneH = view.height / lanes;
  for (let pitch = view.pitchLo; pitch <= view.pitchHi; pitch++) {
    if (pitch % 12 === 0) {
      ctx.fillRect(0, view.height - (pitch - view.pitchLo + 1) * laneH, view.width, 1);
    }
  }

  for (const r of layoutNotes(window.all(), view)) {
    const light = r.sounding ? 72 : 55;
    ctx.fillStyle = r.drum
      ? `hsl(0, 0%, ${r.sounding ? 92 : 65}%)`
      : `hsl(${r.hue}, 70%, ${light}%)`;
    ctx.fillRect(r.x, r.y, r.w, r.h);
  }

  const px = playheadX(view);
  ctx.fillStyle = "#e8524a";
  ctx.fillRect(px, 0, 2, view.height);
}
