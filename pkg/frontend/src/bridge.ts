/**
 * Client for the taxisim engine's `serve` subcommand.
 *
 * The engine is a subprocess speaking newline-delimited JSON over
 * stdin/stdout: one request line in, exactly one reply line out. This client
 * owns the subprocess, serializes requests, and surfaces engine-side errors
 * and stalls as typed exceptions. See PROTOCOL.md for the wire format.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import readline from "node:readline";

export const PROTOCOL_VERSION = 1;

/** The engine replied with an error, or the session was used out of order. */
export class ProtocolError extends Error {}

/** The engine subprocess died, could not start, or stopped responding. */
export class EngineError extends Error {}

export interface SpaceSpec {
  shape: number[];
  low: number[];
  high: number[];
}

export interface EnvSpec {
  observationSpace: SpaceSpec;
  actionSpace: SpaceSpec;
  dtS: number;
  observationMode: string;
}

export interface StepResult {
  observation: number[];
  reward: number;
  done: boolean;
  info: { t: number };
}

export interface BridgeOptions {
  /** Path to the engine experiment config (JSON). */
  configPath: string;
  /** Engine invocation; appended with `serve --config <path>`. */
  command?: string[];
  /** Config overrides forwarded as `--override key=value`. */
  overrides?: string[];
  /** Per-request reply timeout. */
  timeoutMs?: number;
}

interface Pending {
  resolve: (reply: Record<string, unknown>) => void;
  reject: (err: Error) => void;
  timer: NodeJS.Timeout;
}

export class TaxisEnv {
  private proc: ChildProcessWithoutNullStreams;
  private pending: Pending[] = [];
  private closed = false;
  private procError: Error | null = null;
  private readonly timeoutMs: number;

  constructor(options: BridgeOptions) {
    const command = options.command ?? ["taxisim"];
    const args = [...command.slice(1), "serve", "--config", options.configPath];
    for (const ov of options.overrides ?? []) {
      args.push("--override", ov);
    }
    this.timeoutMs = options.timeoutMs ?? 10_000;

    this.proc = spawn(command[0], args, { stdio: ["pipe", "pipe", "pipe"] });
    this.proc.on("error", (err) => {
      this.failAll(new EngineError(`engine process failed to start: ${err.message}`));
    });
    this.proc.on("exit", (code) => {
      if (!this.closed) {
        this.failAll(new EngineError(`engine process exited with code ${code}`));
      }
    });
    // EPIPE on a dead engine's stdin; the exit handler already reports it
    this.proc.stdin.on("error", () => {});

    const rl = readline.createInterface({ input: this.proc.stdout });
    rl.on("line", (line) => {
      const waiter = this.pending.shift();
      if (!waiter) return; // unsolicited line; nothing is waiting on it
      clearTimeout(waiter.timer);
      try {
        waiter.resolve(JSON.parse(line));
      } catch {
        waiter.reject(new ProtocolError(`engine sent unparseable reply: ${line}`));
      }
    });
  }

  private failAll(err: Error) {
    this.procError = err;
    for (const waiter of this.pending.splice(0)) {
      clearTimeout(waiter.timer);
      waiter.reject(err);
    }
  }

  /**
   * Send one raw protocol message and await its single reply line.
   * Exposed for protocol-level testing and debugging; normal use goes
   * through spec/reset/step/close.
   */
  request(msg: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.closed) {
      return Promise.reject(new ProtocolError("session closed; start a new TaxisEnv"));
    }
    if (this.procError) {
      return Promise.reject(this.procError);
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const i = this.pending.findIndex((w) => w.timer === timer);
        if (i >= 0) this.pending.splice(i, 1);
        reject(new EngineError(`engine did not reply within ${this.timeoutMs} ms`));
      }, this.timeoutMs);
      this.pending.push({ resolve, reject, timer });
      this.proc.stdin.write(JSON.stringify(msg) + "\n", (err) => {
        if (err) {
          const i = this.pending.findIndex((w) => w.timer === timer);
          if (i >= 0) this.pending.splice(i, 1);
          clearTimeout(timer);
          reject(new EngineError(`cannot write to engine: ${err.message}`));
        }
      });
    });
  }

  private async rpc(msg: Record<string, unknown>): Promise<Record<string, unknown>> {
    const reply = await this.request({ v: PROTOCOL_VERSION, ...msg });
    if (typeof reply.error === "string") {
      throw new ProtocolError(reply.error);
    }
    return reply;
  }

  /** Observation/action space shapes and bounds for the served config. */
  async spec(): Promise<EnvSpec> {
    const reply = await this.rpc({ op: "spec" });
    return {
      observationSpace: reply.observation_space as SpaceSpec,
      actionSpace: reply.action_space as SpaceSpec,
      dtS: reply.dt_s as number,
      observationMode: reply.observation_mode as string,
    };
  }

  /** Start an episode; returns the initial observation. */
  async reset(seed: number): Promise<number[]> {
    if (!Number.isInteger(seed)) {
      throw new ProtocolError(`seed must be an integer, got ${seed}`);
    }
    const reply = await this.rpc({ op: "reset", seed });
    return reply.observation as number[];
  }

  /** Advance one step with [linear_accel, angular_accel]. */
  async step(action: [number, number]): Promise<StepResult> {
    if (action.length !== 2 || !action.every(Number.isFinite)) {
      // rejected locally; a non-finite action never reaches the engine
      throw new ProtocolError(`action must be two finite numbers, got ${JSON.stringify(action)}`);
    }
    const reply = await this.rpc({ op: "step", action });
    return {
      observation: reply.observation as number[],
      reward: reply.reward as number,
      done: reply.done as boolean,
      info: reply.info as { t: number },
    };
  }

  /** End the session; the engine process exits and the client locks. */
  async close(): Promise<void> {
    await this.rpc({ op: "close" });
    this.closed = true;
    await new Promise<void>((resolve) => {
      if (this.proc.exitCode !== null) return resolve();
      this.proc.on("exit", () => resolve());
    });
  }

  /** Force-kill the subprocess without the close handshake (cleanup path). */
  dispose(): void {
    this.closed = true;
    if (this.proc.exitCode === null) {
      this.proc.kill();
    }
  }
}
