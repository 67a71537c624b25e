/** Environment session client: spawns `escapesim serve --ipc stdio` (or
 * dials a TCP address) and exposes the record stream as an async queue. */

import { ChildProcess, spawn } from "child_process";
import * as net from "net";
import { EnvRecord, LineFramer, parseRecord } from "./protocol";

export interface ServeOptions {
  scenario: string; // file, directory, or glob
  episodes: number;
  seed?: number;
  maxSteps?: number;
  trainMode?: boolean;
  stage?: "fixed" | "random";
  python?: string;
  timeout?: number;
}

export class EnvSession {
  private queue: EnvRecord[] = [];
  private waiters: ((r: EnvRecord | null) => void)[] = [];
  private closed = false;
  private framer = new LineFramer();
  private child?: ChildProcess;
  private sock?: net.Socket;
  stderr = "";

  static spawnServe(opts: ServeOptions): EnvSession {
    const s = new EnvSession();
    const args = [
      "-m",
      "escapesim.cli",
      "serve",
      "--ipc",
      "stdio",
      "--scenario",
      opts.scenario,
      "--episodes",
      String(opts.episodes),
      "--seed",
      String(opts.seed ?? 0),
      "--max-steps",
      String(opts.maxSteps ?? 100),
      "--timeout",
      String(opts.timeout ?? 60),
    ];
    if (opts.trainMode) args.push("--train-mode");
    if (opts.stage) args.push("--stage", opts.stage);
    const child = spawn(opts.python ?? "python3", args, {
      stdio: ["pipe", "pipe", "pipe"],
    });
    s.child = child;
    child.stdout!.on("data", (chunk) => s.feed(chunk));
    child.stderr!.on("data", (chunk) => (s.stderr += chunk.toString()));
    child.on("close", () => s.finish());
    return s;
  }

  static connect(host: string, port: number): Promise<EnvSession> {
    return new Promise((resolve, reject) => {
      const s = new EnvSession();
      const sock = net.createConnection({ host, port }, () => resolve(s));
      s.sock = sock;
      sock.on("data", (chunk) => s.feed(chunk));
      sock.on("close", () => s.finish());
      sock.on("error", reject);
    });
  }

  private feed(chunk: Buffer): void {
    for (const line of this.framer.push(chunk)) {
      let rec: EnvRecord;
      try {
        rec = parseRecord(line);
      } catch {
        continue;
      }
      const w = this.waiters.shift();
      if (w) w(rec);
      else this.queue.push(rec);
    }
  }

  private finish(): void {
    this.closed = true;
    while (this.waiters.length) this.waiters.shift()!(null);
  }

  send(line: string): void {
    if (this.child) this.child.stdin!.write(line + "\n");
    else if (this.sock) this.sock.write(line + "\n");
  }

  next(timeoutMs = 120_000): Promise<EnvRecord | null> {
    if (this.queue.length) return Promise.resolve(this.queue.shift()!);
    if (this.closed) return Promise.resolve(null);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("environment silent past timeout")),
        timeoutMs
      );
      this.waiters.push((r) => {
        clearTimeout(timer);
        resolve(r);
      });
    });
  }

  close(): void {
    this.child?.kill();
    this.sock?.destroy();
    this.finish();
  }
}
