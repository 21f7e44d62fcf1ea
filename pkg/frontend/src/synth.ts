/**
 * A small additive synth behind the player's NoteSink interface.
 *
 * The instrument → sound mapping is a pure function (testable without a
 * browser); the Web Audio wiring is kept to the thin class below.  One
 * oscillator + gain envelope per note, a filtered noise burst for the
 * drum channel.  Everything plays through a single master gain, so
 * cancelAll() can silence the whole graph instantly by swapping it out.
 */

import type { Note } from "./protocol.js";
import type { Clock, NoteSink } from "./player.js";
import { DRUM_INSTRUMENT } from "./protocol.js";

export interface Timbre {
  wave: "sine" | "triangle" | "sawtooth" | "square";
  /** Family loudness relative to piano. */
  gain: number;
  /** Envelope decay in seconds (capped by the note's duration). */
  decayS: number;
}

/** Map a General MIDI program (or 128 = drums) to an oscillator recipe. */
export function timbreFor(instrument: number): Timbre {
  if (instrument === DRUM_INSTRUMENT) return { wave: "square", gain: 0.5, decayS: 0.12 };
  const family = Math.floor(instrument / 8);
  switch (family) {
    case 0: // pianos
      return { wave: "triangle", gain: 1.0, decayS: 0.9 };
    case 1: // chromatic percussion
      return { wave: "sine", gain: 0.9, decayS: 0.5 };
    case 2: // organs
      return { wave: "square", gain: 0.45, decayS: 1.6 };
    case 3: // guitars
      return { wave: "triangle", gain: 0.85, decayS: 0.7 };
    case 4: // basses
      return { wave: "sawtooth", gain: 0.7, decayS: 0.6 };
    case 5: // strings
    case 6: // ensembles
      return { wave: "sawtooth", gain: 0.4, decayS: 1.8 };
    case 7: // brass
      return { wave: "square", gain: 0.5, decayS: 1.0 };
    case 8: // reeds
    case 9: // pipes
      return { wave: "sine", gain: 0.8, decayS: 1.0 };
    case 10: // synth leads
      return { wave: "sawtooth", gain: 0.55, decayS: 0.8 };
    case 11: // synth pads
      return { wave: "triangle", gain: 0.5, decayS: 2.2 };
    default: // effects, ethnic, percussive, sound effects
      return { wave: "triangle", gain: 0.6, decayS: 0.5 };
  }
}

export const pitchToHz = (pitch: number): number => 440 * 2 ** ((pitch - 69) / 12);

/** Perceptual-ish velocity curve: 127 → 1, soft notes fall off faster. */
export const velocityToGain = (velocity: number): number =>
  (Math.max(0, Math.min(127, velocity)) / 127) ** 1.5;

export class WebAudioSink implements NoteSink {
  private master: GainNode;
  private live = new Set<AudioScheduledSourceNode>();

  constructor(private ctx: AudioContext) {
    this.master = this.freshMaster();
  }

  private freshMaster(): GainNode {
    const g = this.ctx.createGain();
    g.gain.value = 0.3; // headroom for dense polyphony
    g.connect(this.ctx.destination);
    return g;
  }

  play(note: Note, when: number): void {
    const at = Math.max(when, this.ctx.currentTime);
    if (note.instrument === DRUM_INSTRUMENT) {
      this.playDrum(note, at);
    } else {
      this.playTone(note, at);
    }
  }

  private playTone(note: Note, at: number): void {
    const timbre = timbreFor(note.instrument);
    const osc = this.ctx.createOscillator();
    osc.type = timbre.wave;
    osc.frequency.value = pitchToHz(note.pitch);

    const env = this.ctx.createGain();
    const peak = timbre.gain * velocityToGain(note.velocity);
    const dur = Math.max(0.02, Math.min(note.dur_s, timbre.decayS));
    env.gain.setValueAtTime(0, at);
    env.gain.linearRampToValueAtTime(peak, at + 0.005);
    env.gain.exponentialRampToValueAtTime(Math.max(1e-4, peak * 1e-3), at + dur);

    osc.connect(env).connect(this.master);
    osc.start(at);
    osc.stop(at + dur + 0.05);
    this.track(osc);
  }

  private playDrum(note: Note, at: number): void {
    // White-noise burst through a band-pass tuned by the drum's pitch:
    // low pitches thud (kick), high pitches hiss (hats, cymbals).
    const seconds = timbreFor(DRUM_INSTRUMENT).decayS;
    const frames = Math.ceil(seconds * this.ctx.sampleRate);
    const buffer = this.ctx.createBuffer(1, frames, this.ctx.sampleRate);
    const data = buffer.getChannelData(0);
    for (let i = 0; i < frames; i++) {
      data[i] = (Math.random() * 2 - 1) * (1 - i / frames) ** 2;
    }
    const src = this.ctx.createBufferSource();
    src.buffer = buffer;

    const filter = this.ctx.createBiquadFilter();
    filter.type = "bandpass";
    filter.frequency.value = 80 + (note.pitch / 127) * 7000;
    filter.Q.value = note.pitch < 50 ? 1.2 : 0.7;

    const env = this.ctx.createGain();
    env.gain.value = velocityToGain(note.velocity) * 0.9;

    src.connect(filter).connect(env).connect(this.master);
    src.start(at);
    this.track(src);
  }

  private track(node: AudioScheduledSourceNode): void {
    this.live.add(node);
    node.onended = () => this.live.delete(node);
  }

  cancelAll(): void {
    // Swapping the master out mutes instantly even if a source's stop()
    // is still a tick away; then stop every live source to free it.
    this.master.disconnect();
    this.master = this.freshMaster();
    for (const node of this.live) {
      try {
        node.stop();
      } catch {
        /* never started or already stopped */
      }
    }
    this.live.clear();
  }
}

/** The player's clock should be the one the speakers obey. */
export const audioClock = (ctx: AudioContext): Clock => ({ now: () => ctx.currentTime });
