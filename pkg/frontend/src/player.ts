/**
 * Buffered playback against a local clock.
 *
 * Lifecycle: notes are enqueued as they arrive; playback starts exactly
 * when `bufferS` seconds of *musical* time is queued ahead; from then on
 * each note is scheduled at `startClock + (onset − musicBase)` on the
 * injected clock (the audio context clock in the browser — wall time
 * drifts, the audio clock is what the speakers obey).
 *
 * A note that arrives after its slot has passed plays immediately and
 * is counted as late: the stream does not rewind.  Underruns therefore
 * appear as silent gaps, surfaced live through `bufferSeconds()` (the
 * meter value, clamped at zero) and recorded exactly as merged
 * music-time intervals during which the next due note had not yet
 * arrived — the same measure-of-late-time the throughput profiler
 * computes on the server side, so the two are directly comparable.
 */

import { NoteQueue } from "./noteQueue.js";
import type { Note } from "./protocol.js";

export interface Clock {
  /** Seconds, monotonic. In the browser: the AudioContext clock. */
  now(): number;
}

export interface NoteSink {
  /** Sound a note at clock time `when` (already past = play now). */
  play(note: Note, when: number): void;
  /** Silence and forget everything scheduled. */
  cancelAll(): void;
}

export interface PlayerStats {
  received: number;
  played: number;
  late: number;
  /** Merged [from, to) stream-time intervals that were underrun. */
  underrunIntervals: Array<[number, number]>;
  underrunSeconds: number;
}

export class Player {
  readonly queue = new NoteQueue();
  private started = false;
  private stopped = false;
  private startClock = 0;
  private musicBase = 0;
  // A client can join (or rejoin) a broadcast that has been running for
  // hours, so the first note heard always defines the local origin.
  private rebaseOnNextNote = true;

  private received = 0;
  private played = 0;
  private late = 0;
  private intervals: Array<[number, number]> = [];
  private cover = -Infinity; // highest stream time already marked underrun

  constructor(
    private clock: Clock,
    private sink: NoteSink,
    readonly bufferS: number,
  ) {}

  get isStarted(): boolean {
    return this.started;
  }

  /** Current playback position in stream time; musicBase until started. */
  musicTime(): number {
    if (!this.started) return this.musicBase;
    return this.musicBase + (this.clock.now() - this.startClock);
  }

  /** The buffer-health meter value: queued musical time ahead, >= 0. */
  bufferSeconds(): number {
    return Math.max(0, this.queue.maxQueuedOnset - this.musicTime());
  }

  /** Live underrun: playback has caught up with everything queued. */
  isUnderrun(): boolean {
    return this.started && !this.stopped && this.bufferSeconds() === 0;
  }

  enqueue(note: Note): void {
    if (this.stopped) return;
    this.received++;
    if (this.rebaseOnNextNote) {
      // resume-from-now: the first note after a reconnect defines the
      // new origin; the gap we missed is not replayed.
      this.musicBase = note.onset_s;
      this.rebaseOnNextNote = false;
    }
    this.queue.push(note);

    if (!this.started) {
      if (this.queue.maxQueuedOnset - this.musicBase >= this.bufferS) {
        this.start();
      }
      return;
    }
    this.accountArrival(note.onset_s);
    this.dispatch(note);
  }

  private start(): void {
    this.started = true;
    this.startClock = this.clock.now();
    for (const note of this.queue.popDue(Infinity)) {
      this.dispatch(note);
    }
  }

  private dispatch(note: Note): void {
    const when = this.startClock + (note.onset_s - this.musicBase);
    const now = this.clock.now();
    this.played++;
    if (when < now) {
      this.late++;
      this.sink.play(note, now);
    } else {
      this.sink.play(note, when);
    }
  }

  /** Record [onset, availableAt) as underrun, merged with earlier intervals. */
  private accountArrival(onset: number): void {
    const availableAt = this.musicBase + (this.clock.now() - this.startClock);
    const from = Math.max(onset, this.cover);
    if (availableAt > from) {
      const last = this.intervals[this.intervals.length - 1];
      if (last !== undefined && from <= last[1]) {
        last[1] = availableAt;
      } else {
        this.intervals.push([from, availableAt]);
      }
      this.cover = availableAt;
    }
  }

  /** Stop playback; everything scheduled is cancelled immediately. */
  stop(): void {
    this.stopped = true;
    this.sink.cancelAll();
  }

  /** After a reconnect: drop the stale queue, rebuffer, skip the gap. */
  resumeFromNext(): void {
    this.queue.clear();
    this.started = false;
    this.rebaseOnNextNote = true;
  }

  stats(): PlayerStats {
    return {
      received: this.received,
      played: this.played,
      late: this.late,
      underrunIntervals: this.intervals.map((iv) => [...iv] as [number, number]),
      underrunSeconds: this.intervals.reduce((s, [a, b]) => s + (b - a), 0),
    };
  }

  /**
   * Fraction of the stream window [0, horizon) that played without
   * waiting on the network — the client-side counterpart of the
   * profiler's streamable fraction for the same rate and buffer.
   */
  streamableFraction(horizon: number): number {
    let underrun = 0;
    for (const [a, b] of this.intervals) {
      underrun += Math.max(0, Math.min(b, horizon) - Math.max(a, 0));
    }
    return Math.max(0, Math.min(1, 1 - underrun / horizon));
  }
}
