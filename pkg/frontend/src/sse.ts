// Server-sent events client on top of fetch streaming, so the same code
// runs in the browser and under node tests. Reconnects automatically; the
// owner sees "live" / "reconnecting" status flips.

export type StreamStatus = "idle" | "live" | "reconnecting" | "stopped";

export interface SseHandlers {
  onEvent: (data: unknown) => void;
  onStatus?: (status: StreamStatus) => void;
}

// Incremental parser for one SSE frame boundary; returns the unconsumed tail.
export function parseSseBuffer(buffer: string, emit: (data: string) => void): string {
  let rest = buffer;
  for (;;) {
    const cut = rest.indexOf("\n\n");
    if (cut < 0) {
      return rest;
    }
    const frame = rest.slice(0, cut);
    rest = rest.slice(cut + 2);
    const dataLines: string[] = [];
    for (const line of frame.split("\n")) {
      if (line.startsWith("data:")) {
        dataLines.push(line.slice(5).trimStart());
      }
      // comments (":") and fields like "retry:" need no handling here
    }
    if (dataLines.length > 0) {
      emit(dataLines.join("\n"));
    }
  }
}

export class StreamClient {
  private stopped = false;
  private controller: AbortController | null = null;
  private retryMs = 500;

  constructor(
    private url: string,
    private handlers: SseHandlers,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  start(): void {
    this.stopped = false;
    void this.run();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.handlers.onStatus?.("stopped");
  }

  private async run(): Promise<void> {
    while (!this.stopped) {
      this.controller = new AbortController();
      try {
        const response = await this.fetchImpl(this.url, {
          signal: this.controller.signal,
          headers: { accept: "text/event-stream" },
        });
        if (!response.ok || !response.body) {
          throw new Error(`stream rejected: ${response.status}`);
        }
        this.handlers.onStatus?.("live");
        this.retryMs = 500;
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) {
            break;
          }
          buffer = parseSseBuffer(buffer + decoder.decode(value, { stream: true }), (data) => {
            try {
              this.handlers.onEvent(JSON.parse(data));
            } catch {
              // ignore undecodable frames
            }
          });
        }
      } catch {
        // fall through to the reconnect path
      }
      if (this.stopped) {
        return;
      }
      this.handlers.onStatus?.("reconnecting");
      await new Promise((resolve) => setTimeout(resolve, this.retryMs));
      this.retryMs = Math.min(this.retryMs * 2, 10_000);
    }
  }
}
