/**
 * Browser entry point: wires the stream session to the audio player,
 * the piano roll, the buffer meter, and the control panel.
 *
 * The audio context is created on the connect click (autoplay policy
 * requires a user gesture), and its clock drives the player — speakers
 * obey the audio clock, not Date.now().
 */

import { StreamSession, type SessionStatus } from "./session.js";
import { Player } from "./player.js";
import { WebAudioSink, audioClock } from "./synth.js";
import { RollWindow, drawRoll } from "./pianoRoll.js";
import { drawMeter } from "./bufferMeter.js";
import { buildControls, type ControlsHandle } from "./controls.js";

function defaultUrl(): string {
  const query = new URLSearchParams(location.search).get("ws");
  if (query) return query;
  return `ws://${location.hostname || "127.0.0.1"}:8765`;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const rollCanvas = el<HTMLCanvasElement>("roll");
const meterCanvas = el<HTMLCanvasElement>("meter");
const connectBtn = el<HTMLButtonElement>("connect");
const statsLine = el<HTMLElement>("stats");

let session: StreamSession | null = null;
let player: Player | null = null;
let controls: ControlsHandle | null = null;
let bufferS = 2;
const roll = new RollWindow();

function connect(): void {
  const ctx = new AudioContext();
  void ctx.resume();
  const sink = new WebAudioSink(ctx);
  const clock = audioClock(ctx);
  let wasDropped = false;

  // created lazily so a local stop can tear playback down completely
  const ensurePlayer = (): Player => {
    if (!player) player = new Player(clock, sink, bufferS);
    return player;
  };

  session = new StreamSession(defaultUrl(), (url) => new WebSocket(url), {
    onHello(_vocab, params, helloBufferS) {
      bufferS = helloBufferS;
      controls?.showParams(params);
    },
    onNote(note) {
      ensurePlayer().enqueue(note);
      roll.add(note);
    },
    onAck(chunk) {
      controls?.showAck(chunk);
    },
    onProtocolError(code, message) {
      controls?.showStatus(`service refused: ${code} — ${message}`);
    },
    onStatus(status: SessionStatus) {
      controls?.showStatus(status);
      if (status === "reconnecting") {
        wasDropped = true;
      } else if (status === "connected" && wasDropped) {
        wasDropped = false;
        // the stream moved on while we were gone: skip the gap
        player?.resumeFromNext();
        roll.clear();
      }
    },
  });
  session.connect();

  controls = buildControls(el("controls"), {
    onChange(change) {
      session?.setParams(change);
    },
    onStart() {
      session?.sendStart();
    },
    onStop() {
      session?.sendStop();
      player?.stop(); // silence locally too — queued notes included
      player = null; // the next note rebuilds playback from scratch
    },
  });

  connectBtn.disabled = true;
  connectBtn.textContent = "connected";

  function frame(): void {
    const now = player?.musicTime() ?? 0;
    drawRoll(rollCanvas, roll, now);
    drawMeter(meterCanvas, player?.bufferSeconds() ?? 0, 2 * (player?.bufferS ?? 2));
    if (player) {
      const s = player.stats();
      statsLine.textContent =
        `${s.received} received · ${s.played} played · ${s.late} late · ` +
        `${s.underrunSeconds.toFixed(1)}s underrun`;
    }
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

connectBtn.addEventListener("click", connect);
