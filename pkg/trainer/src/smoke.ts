/** Corridor smoke test: masked discrete SAC with hybrid guidance must beat
 * the random baseline by >= 40 success-rate points on held-out seeds, and
 * disabling guidance must give a strictly slower learning curve (AUC).
 *
 * The hybrid and no-guidance runs train in parallel child processes (each
 * with its own tfjs engine and environment session).
 * SMOKE_EPISODES overrides the 2000-episode default for quick runs.
 */

import { execFile, execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { setupBackend } from "./backend";
import { SacAgent } from "./sac";
import { evaluateAgent, runBench } from "./evaluate";

const PY = process.env.PYTHON ?? "python3";

function gen(dir: string, count: number, seed: number): void {
  execFileSync(PY, [
    "-m", "escapesim.cli", "gen", "--out", dir, "--kind", "corridor",
    "--count", String(count), "--length", "2.0", "--seed", String(seed),
  ]);
}

function trainChild(args: string[]): Promise<void> {
  return new Promise((resolve, reject) => {
    const child = execFile(
      process.execPath,
      [path.join(__dirname, "train.js"), ...args],
      { timeout: 3 * 3600 * 1000, maxBuffer: 64 * 1024 * 1024 },
      (err) => (err ? reject(err) : resolve())
    );
    child.stderr?.on("data", (d) => process.stderr.write(d));
  });
}

interface LogLine {
  episode: number;
  success: boolean;
}

function readLog(p: string): LogLine[] {
  return fs
    .readFileSync(p, "utf-8")
    .trim()
    .split("\n")
    .map((l) => JSON.parse(l));
}

function successCurve(logs: LogLine[], window = 50): number[] {
  const out: number[] = [];
  let acc = 0;
  const q: number[] = [];
  for (const l of logs) {
    q.push(l.success ? 1 : 0);
    acc += q[q.length - 1];
    if (q.length > window) acc -= q.shift()!;
    out.push(acc / q.length);
  }
  return out;
}

function auc(curve: number[]): number {
  return curve.reduce((a, b) => a + b, 0) / Math.max(1, curve.length);
}

async function main(): Promise<void> {
  const backend = await setupBackend();
  const episodes = parseInt(process.env.SMOKE_EPISODES ?? "2000", 10);
  const work = fs.mkdtempSync(path.join(os.tmpdir(), "escapesim-smoke-"));
  const trainDir = path.join(work, "train");
  const evalDir = path.join(work, "eval");
  const switchAt = Math.floor(episodes * 0.5);
  console.error(`backend=${backend} episodes=${episodes} work=${work}`);

  gen(trainDir, 20, 0);
  gen(evalDir, 20, 10_000); // held-out seeds

  const t0 = Date.now();
  const random = await runBench(
    evalDir, "random", path.join(work, "report_random.json"), 7
  );
  console.error(`random baseline: ${random.total_success_rate.toFixed(3)}`);

  const hybridLog = path.join(work, "log_hybrid.jsonl");
  const ablateLog = path.join(work, "log_noguidance.jsonl");
  const ckptPath = path.join(work, "checkpoint_hybrid.json");
  await Promise.all([
    trainChild([
      "--scenario", trainDir, "--episodes", String(episodes), "--seed", "1",
      "--max-steps", "80", "--log", hybridLog, "--checkpoint", ckptPath,
      "--curriculum-switch", String(switchAt),
    ]),
    trainChild([
      "--scenario", trainDir, "--episodes", String(episodes), "--seed", "1",
      "--max-steps", "80", "--log", ablateLog, "--no-guidance",
      "--curriculum-switch", String(switchAt),
    ]),
  ]);

  const agent = new SacAgent();
  agent.restore(JSON.parse(fs.readFileSync(ckptPath, "utf-8")));
  const trained = await evaluateAgent(
    agent, evalDir, path.join(work, "report_trained.json"), 18931, 7
  );
  console.error(`trained policy:  ${trained.total_success_rate.toFixed(3)}`);

  const hybridCurve = successCurve(readLog(hybridLog));
  const ablateCurve = successCurve(readLog(ablateLog));
  const improvement = trained.total_success_rate - random.total_success_rate;
  const verdict = {
    episodes,
    random_success: random.total_success_rate,
    trained_success: trained.total_success_rate,
    improvement_points: Math.round(improvement * 1000) / 10,
    improvement_ok: improvement >= 0.4,
    auc_hybrid: auc(hybridCurve),
    auc_no_guidance: auc(ablateCurve),
    ablation_ok: auc(hybridCurve) > auc(ablateCurve),
    minutes: Math.round((Date.now() - t0) / 6000) / 10,
  };
  console.log(JSON.stringify(verdict, null, 2));
  fs.writeFileSync(path.join(work, "verdict.json"), JSON.stringify(verdict, null, 2));
  process.exit(verdict.improvement_ok && verdict.ablation_ok ? 0 : 1);
}

main().catch((e) => {
  console.error(e);
  process.exit(2);
});
