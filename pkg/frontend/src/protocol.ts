/**
 * The WebSocket wire protocol, client side.
 *
 * Frames are JSON objects discriminated by their keys, not a type tag:
 * the first frame is always a hello; afterwards notes, chunk markers,
 * acks, and errors interleave.  Everything leaving this module is a
 * tagged union so the rest of the client never touches raw objects.
 */

export interface Note {
  onset_s: number;
  dur_s: number;
  instrument: number; // 0-127 GM program, 128 = drum kit
  pitch: number;
  velocity: number;
}

export interface StreamParams {
  temperature: number;
  top_p: number;
  bias_alpha: number;
  ensemble: number[] | null;
  seed: number | null;
}

export interface VocabInfo {
  time_resolution_ms: number;
  max_time_steps: number;
  max_dur_steps: number;
  num_instruments: number;
  num_pitches: number;
}

export type ServerFrame =
  | { type: "hello"; v: number; vocab: VocabInfo; params: StreamParams; buffer_s: number }
  | { type: "note"; note: Note }
  | { type: "chunk"; index: number }
  | { type: "ack"; appliedAtChunk: number }
  | { type: "error"; code: string; message: string };

const isFiniteNumber = (x: unknown): x is number => typeof x === "number" && Number.isFinite(x);

function asNote(obj: Record<string, unknown>): Note | null {
  if (
    !isFiniteNumber(obj.onset_s) ||
    !isFiniteNumber(obj.dur_s) ||
    !isFiniteNumber(obj.instrument) ||
    !isFiniteNumber(obj.pitch)
  ) {
    return null;
  }
  return {
    onset_s: obj.onset_s,
    dur_s: obj.dur_s,
    instrument: obj.instrument,
    pitch: obj.pitch,
    velocity: isFiniteNumber(obj.velocity) ? obj.velocity : 80,
  };
}

/**
 * Parse one incoming text frame.  Returns null for frames this client
 * does not understand — the protocol allows new frame types to appear,
 * and an old client must keep playing through them.
 */
export function parseServerFrame(text: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) return null;
  const rec = obj as Record<string, unknown>;

  if ("v" in rec && "vocab" in rec && "params" in rec) {
    return {
      type: "hello",
      v: rec.v as number,
      vocab: rec.vocab as VocabInfo,
      params: rec.params as StreamParams,
      buffer_s: isFiniteNumber(rec.buffer_s) ? rec.buffer_s : 2.0,
    };
  }
  if ("onset_s" in rec) {
    const note = asNote(rec);
    return note ? { type: "note", note } : null;
  }
  if ("chunk" in rec && isFiniteNumber(rec.chunk)) {
    return { type: "chunk", index: rec.chunk };
  }
  if ("applied_at_chunk" in rec && isFiniteNumber(rec.applied_at_chunk)) {
    return { type: "ack", appliedAtChunk: rec.applied_at_chunk };
  }
  if ("code" in rec) {
    return { type: "error", code: String(rec.code), message: String(rec.message ?? "") };
  }
  return null;
}

/** Fields a set_params control frame may carry; all optional. */
export interface ParamChange {
  temperature?: number;
  top_p?: number;
  bias_alpha?: number;
  ensemble?: number[] | null;
  seed?: number;
}

export function setParamsFrame(change: ParamChange): string {
  return JSON.stringify({ kind: "set_params", ...change });
}

export const startFrame = (): string => JSON.stringify({ kind: "start" });
export const stopFrame = (): string => JSON.stringify({ kind: "stop" });

export const DRUM_INSTRUMENT = 128;
