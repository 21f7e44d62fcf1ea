/**
 * Control panel: instrument palette, creativity knobs, transport.
 *
 * Every change sends exactly one set_params control frame; the service
 * applies it at the next chunk boundary and acks with the chunk index,
 * which we surface next to the control so the bounded latency of a
 * tweak is visible rather than mysterious.
 */

import type { ParamChange, StreamParams } from "./protocol.js";
import { DRUM_INSTRUMENT } from "./protocol.js";

// General MIDI level 1 program names, 0-127.
export const GM_NAMES: readonly string[] = [
  "Acoustic Grand Piano", "Bright Acoustic Piano", "Electric Grand Piano", "Honky-tonk Piano",
  "Electric Piano 1", "Electric Piano 2", "Harpsichord", "Clavinet",
  "Celesta", "Glockenspiel", "Music Box", "Vibraphone",
  "Marimba", "Xylophone", "Tubular Bells", "Dulcimer",
  "Drawbar Organ", "Percussive Organ", "Rock Organ", "Church Organ",
  "Reed Organ", "Accordion", "Harmonica", "Tango Accordion",
  "Acoustic Guitar (nylon)", "Acoustic Guitar (steel)", "Electric Guitar (jazz)", "Electric Guitar (clean)",
  "Electric Guitar (muted)", "Overdriven Guitar", "Distortion Guitar", "Guitar Harmonics",
  "Acoustic Bass", "Electric Bass (finger)", "Electric Bass (pick)", "Fretless Bass",
  "Slap Bass 1", "Slap Bass 2", "Synth Bass 1", "Synth Bass 2",
  "Violin", "Viola", "Cello", "Contrabass",
  "Tremolo Strings", "Pizzicato Strings", "Orchestral Harp", "Timpani",
  "String Ensemble 1", "String Ensemble 2", "Synth Strings 1", "Synth Strings 2",
  "Choir Aahs", "Voice Oohs", "Synth Voice", "Orchestra Hit",
  "Trumpet", "Trombone", "Tuba", "Muted Trumpet",
  "French Horn", "Brass Section", "Synth Brass 1", "Synth Brass 2",
  "Soprano Sax", "Alto Sax", "Tenor Sax", "Baritone Sax",
  "Oboe", "English Horn", "Bassoon", "Clarinet",
  "Piccolo", "Flute", "Recorder", "Pan Flute",
  "Blown Bottle", "Shakuhachi", "Whistle", "Ocarina",
  "Lead 1 (square)", "Lead 2 (sawtooth)", "Lead 3 (calliope)", "Lead 4 (chiff)",
  "Lead 5 (charang)", "Lead 6 (voice)", "Lead 7 (fifths)", "Lead 8 (bass + lead)",
  "Pad 1 (new age)", "Pad 2 (warm)", "Pad 3 (polysynth)", "Pad 4 (choir)",
  "Pad 5 (bowed)", "Pad 6 (metallic)", "Pad 7 (halo)", "Pad 8 (sweep)",
  "FX 1 (rain)", "FX 2 (soundtrack)", "FX 3 (crystal)", "FX 4 (atmosphere)",
  "FX 5 (brightness)", "FX 6 (goblins)", "FX 7 (echoes)", "FX 8 (sci-fi)",
  "Sitar", "Banjo", "Shamisen", "Koto",
  "Kalimba", "Bag pipe", "Fiddle", "Shanai",
  "Tinkle Bell", "Agogo", "Steel Drums", "Woodblock",
  "Taiko Drum", "Melodic Tom", "Synth Drum", "Reverse Cymbal",
  "Guitar Fret Noise", "Breath Noise", "Seashore", "Bird Tweet",
  "Telephone Ring", "Helicopter", "Applause", "Gunshot",
];

export const GM_FAMILIES: readonly string[] = [
  "Piano", "Chromatic Percussion", "Organ", "Guitar", "Bass", "Strings", "Ensemble",
  "Brass", "Reed", "Pipe", "Synth Lead", "Synth Pad", "Synth FX", "Ethnic",
  "Percussive", "Sound Effects",
];

export function instrumentName(instrument: number): string {
  if (instrument === DRUM_INSTRUMENT) return "Drum Kit";
  return GM_NAMES[instrument] ?? `Program ${instrument}`;
}

/** Multi-select semantics: nothing selected means the full palette. */
export function selectionToEnsemble(selected: number[]): number[] | null {
  return selected.length === 0 ? null : [...selected].sort((a, b) => a - b);
}

export interface ControlsCallbacks {
  onChange(change: ParamChange): void;
  onStart(): void;
  onStop(): void;
}

export interface ControlsHandle {
  /** Reflect the service's negotiated params into the widgets. */
  showParams(params: StreamParams): void;
  /** Surface the chunk index a control change was applied at. */
  showAck(chunk: number): void;
  showStatus(text: string): void;
}

function slider(
  label: string,
  min: number,
  max: number,
  step: number,
  value: number,
  onCommit: (v: number) => void,
): { root: HTMLElement; set(v: number): void } {
  const wrap = document.createElement("label");
  wrap.className = "knob";
  const text = document.createElement("span");
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  input.value = String(value);
  const show = () => (text.textContent = `${label}: ${Number(input.value)}`);
  input.addEventListener("input", show);
  input.addEventListener("change", () => onCommit(Number(input.value)));
  show();
  wrap.append(text, input);
  return {
    root: wrap,
    set(v: number) {
      input.value = String(v);
      show();
    },
  };
}

export function buildControls(root: HTMLElement, cb: ControlsCallbacks): ControlsHandle {
  const temperature = slider("temperature", 0.5, 2.0, 0.05, 1.0, (v) =>
    cb.onChange({ temperature: v }),
  );
  const topP = slider("top p", 0.5, 1.0, 0.01, 0.95, (v) => cb.onChange({ top_p: v }));
  const alpha = slider("density bias", 0, 10, 0.5, 0, (v) => cb.onChange({ bias_alpha: v }));

  const palette = document.createElement("select");
  palette.multiple = true;
  palette.size = 12;
  palette.title = "Instrument palette — empty selection lets everything play";
  for (let family = 0; family < 16; family++) {
    const group = document.createElement("optgroup");
    group.label = GM_FAMILIES[family] ?? "";
    for (let program = family * 8; program < family * 8 + 8; program++) {
      const opt = document.createElement("option");
      opt.value = String(program);
      opt.textContent = instrumentName(program);
      group.append(opt);
    }
    palette.append(group);
  }
  const drumOpt = document.createElement("option");
  drumOpt.value = String(DRUM_INSTRUMENT);
  drumOpt.textContent = instrumentName(DRUM_INSTRUMENT);
  palette.append(drumOpt);
  palette.addEventListener("change", () => {
    const picked = [...palette.selectedOptions].map((o) => Number(o.value));
    cb.onChange({ ensemble: selectionToEnsemble(picked) });
  });

  const start = document.createElement("button");
  start.textContent = "▶ start";
  start.addEventListener("click", () => cb.onStart());
  const stop = document.createElement("button");
  stop.textContent = "■ stop";
  stop.addEventListener("click", () => cb.onStop());

  const ack = document.createElement("div");
  ack.className = "ack";
  const status = document.createElement("div");
  status.className = "status";

  const knobs = document.createElement("div");
  knobs.className = "knobs";
  knobs.append(temperature.root, topP.root, alpha.root, start, stop, ack, status);
  root.append(knobs, palette);

  return {
    showParams(params: StreamParams): void {
      temperature.set(params.temperature);
      topP.set(params.top_p);
      alpha.set(params.bias_alpha);
      const chosen = new Set(params.ensemble ?? []);
      for (const opt of palette.options) {
        opt.selected = chosen.has(Number(opt.value));
      }
    },
    showAck(chunk: number): void {
      ack.textContent = `change applied at chunk ${chunk}`;
    },
    showStatus(text: string): void {
      status.textContent = text;
    },
  };
}
