// Socket wiring: a thin adapter so the protocol logic is testable with a
// fake socket and the browser build uses the real WebSocket.

import { parseServerMsg, type ClientCmd, type ServerMsg } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: ((ev: unknown) => void) | null;
}

export class SteerClient {
  private socket: SocketLike;
  onMessage: (msg: ServerMsg) => void = () => {};
  onOpen: () => void = () => {};
  onClose: () => void = () => {};

  constructor(socket: SocketLike) {
    this.socket = socket;
    socket.onmessage = (ev) => {
      const msg = parseServerMsg(ev.data);
      if (msg) this.onMessage(msg);
    };
    socket.onopen = () => this.onOpen();
    socket.onclose = () => this.onClose();
    socket.onerror = () => this.onClose();
  }

  send(cmd: ClientCmd): void {
    this.socket.send(JSON.stringify(cmd));
  }

  close(): void {
    this.socket.close();
  }
}

export function connect(url: string): SteerClient {
  return new SteerClient(new WebSocket(url) as unknown as SocketLike);
}
