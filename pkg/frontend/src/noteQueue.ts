/**
 * The buffer between the network and the audio scheduler.
 *
 * Notes arrive from one stream in onset order (ties unordered), get
 * queued here, and are drained by playback time.  The queue also owns
 * the two numbers the UI cares about: how much musical time is queued
 * ahead (`maxQueuedOnset`) and how many notes are waiting.
 */

import type { Note } from "./protocol.js";

export class NoteQueue {
  private notes: Note[] = [];
  private head = 0;
  private _maxQueuedOnset = 0;

  get size(): number {
    return this.notes.length - this.head;
  }

  /** Highest onset ever queued, in stream time; 0 before any note. */
  get maxQueuedOnset(): number {
    return this._maxQueuedOnset;
  }

  push(note: Note): void {
    // The stream promises non-decreasing onsets; tolerate tiny disorder
    // (reconnect seams) by insertion instead of trusting blindly.
    const last = this.notes[this.notes.length - 1];
    if (last !== undefined && note.onset_s < last.onset_s) {
      let i = this.notes.length - 1;
      while (i > this.head && this.notes[i - 1]!.onset_s > note.onset_s) i--;
      this.notes.splice(i, 0, note);
    } else {
      this.notes.push(note);
    }
    if (note.onset_s > this._maxQueuedOnset) this._maxQueuedOnset = note.onset_s;
  }

  /** Remove and return every queued note with onset <= time. */
  popDue(time: number): Note[] {
    const due: Note[] = [];
    while (this.head < this.notes.length && this.notes[this.head]!.onset_s <= time) {
      due.push(this.notes[this.head]!);
      this.head++;
    }
    if (this.head > 256) {
      this.notes = this.notes.slice(this.head);
      this.head = 0;
    }
    return due;
  }

  clear(): void {
    this.notes = [];
    this.head = 0;
    this._maxQueuedOnset = 0;
  }
}
