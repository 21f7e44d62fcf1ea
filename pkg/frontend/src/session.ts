/**
 * One live connection to the stream service, with reconnect.
 *
 * The session owns the socket and the protocol state (current chunk,
 * last ack, negotiated params) and forwards typed events to whoever is
 * listening — the player, the piano roll, the control panel.  On an
 * unexpected close it reconnects with backoff; the stream meanwhile
 * kept playing on the server, so resumption is from *now*: listeners
 * get a `reconnected` status and should skip the gap, not replay it.
 */

import {
  parseServerFrame,
  setParamsFrame,
  startFrame,
  stopFrame,
  type Note,
  type ParamChange,
  type ServerFrame,
  type StreamParams,
  type VocabInfo,
} from "./protocol.js";

/**
 * The part of a WebSocket this client uses.  Event params are `any` so
 * that the browser's WebSocket and the `ws` package (whose event types
 * differ) both satisfy the interface without adapters.
 */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  /* eslint-disable @typescript-eslint/no-explicit-any */
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
  /* eslint-enable @typescript-eslint/no-explicit-any */
}

export type SocketFactory = (url: string) => SocketLike;

export type SessionStatus = "connecting" | "connected" | "reconnecting" | "closed";

export interface SessionEvents {
  onHello?(vocab: VocabInfo, params: StreamParams, bufferS: number): void;
  onNote?(note: Note, chunkIndex: number): void;
  onChunk?(index: number): void;
  onAck?(appliedAtChunk: number): void;
  onProtocolError?(code: string, message: string): void;
  onStatus?(status: SessionStatus): void;
}

export class StreamSession {
  private socket: SocketLike | null = null;
  private closedByUs = false;
  private reconnectDelayMs = 250;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  /** Index of the chunk whose notes are currently arriving. */
  currentChunk = 0;
  /** Last acknowledged control application point, if any. */
  lastAckChunk: number | null = null;
  params: StreamParams | null = null;
  status: SessionStatus = "closed";

  constructor(
    private url: string,
    private factory: SocketFactory,
    private events: SessionEvents = {},
  ) {}

  connect(): void {
    this.closedByUs = false;
    this.setStatus(this.status === "closed" ? "connecting" : "reconnecting");
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectDelayMs = 250;
      this.setStatus("connected");
    };
    socket.onmessage = (ev) => this.handleFrame(String(ev.data));
    socket.onerror = () => {
      /* the close handler decides what happens next */
    };
    socket.onclose = () => {
      if (this.socket !== socket) return; // superseded
      this.socket = null;
      if (this.closedByUs) {
        this.setStatus("closed");
        return;
      }
      this.setStatus("reconnecting");
      this.reconnectTimer = setTimeout(() => this.connect(), this.reconnectDelayMs);
      this.reconnectDelayMs = Math.min(this.reconnectDelayMs * 2, 5000);
    };
  }

  close(): void {
    this.closedByUs = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.reconnectTimer = null;
    this.socket?.close();
    this.socket = null;
    this.setStatus("closed");
  }

  setParams(change: ParamChange): void {
    this.socket?.send(setParamsFrame(change));
  }

  sendStart(): void {
    this.socket?.send(startFrame());
  }

  sendStop(): void {
    this.socket?.send(stopFrame());
  }

  private setStatus(status: SessionStatus): void {
    this.status = status;
    this.events.onStatus?.(status);
  }

  private handleFrame(text: string): void {
    const frame: ServerFrame | null = parseServerFrame(text);
    if (frame === null) return; // unknown frames are skipped, not fatal
    switch (frame.type) {
      case "hello":
        this.params = frame.params;
        this.events.onHello?.(frame.vocab, frame.params, frame.buffer_s);
        break;
      case "note":
        this.events.onNote?.(frame.note, this.currentChunk);
        break;
      case "chunk":
        this.currentChunk = frame.index;
        this.events.onChunk?.(frame.index);
        break;
      case "ack":
        this.lastAckChunk = frame.appliedAtChunk;
        this.events.onAck?.(frame.appliedAtChunk);
        break;
      case "error":
        this.events.onProtocolError?.(frame.code, frame.message);
        break;
    }
  }
}
