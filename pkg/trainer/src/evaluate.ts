/** Evaluation plumbing: expose a trained (or fresh) agent as a policy
 * server speaking the IPC protocol, and run the primary CLI's benchmark
 * against it so reports come from the same surface as every other policy. */

import { execFile } from "child_process";
import * as fs from "fs";
import * as net from "net";
import { LineFramer, PROTOCOL_VERSION, actByIndex, obsToVector } from "./protocol";
import { SacAgent } from "./sac";

export function servePolicy(agent: SacAgent, port: number): Promise<net.Server> {
  return new Promise((resolve) => {
    const server = net.createServer((sock) => {
      const framer = new LineFramer();
      sock.on("data", (chunk) => {
        for (const line of framer.push(chunk)) {
          let rec: any;
          try {
            rec = JSON.parse(line);
          } catch {
            continue;
          }
          if (rec.type === "hello") {
            sock.write(
              JSON.stringify({ type: "hello_ack", version: PROTOCOL_VERSION }) + "\n"
            );
          } else if (rec.type === "obs") {
            const action = agent.act(obsToVector(rec), true);
            sock.write(actByIndex(action) + "\n");
          } else if (rec.type === "end") {
            sock.end();
          }
        }
      });
      sock.on("error", () => sock.destroy());
    });
    server.listen(port, "127.0.0.1", () => resolve(server));
  });
}

export interface BenchResult {
  total_success_rate: number;
  episodes: number;
  successes: number;
  collisions: number;
}

export function runBench(
  scenarioDir: string,
  policy: string,
  reportPath: string,
  seed = 0,
  maxSteps = 100,
  python = "python3"
): Promise<BenchResult> {
  return new Promise((resolve, reject) => {
    execFile(
      python,
      [
        "-m",
        "escapesim.cli",
        "bench",
        "--scenarios",
        scenarioDir,
        "--policy",
        policy,
        "--seed",
        String(seed),
        "--max-steps",
        String(maxSteps),
        "--report",
        reportPath,
      ],
      { timeout: 30 * 60 * 1000 },
      (err, _stdout, stderr) => {
        if (err) return reject(new Error(`bench failed: ${stderr || err.message}`));
        const report = JSON.parse(fs.readFileSync(reportPath, "utf-8"));
        resolve(report.overall as BenchResult);
      }
    );
  });
}

/** Evaluate an agent on a scenario directory through the primary CLI. */
export async function evaluateAgent(
  agent: SacAgent,
  scenarioDir: string,
  reportPath: string,
  port: number,
  seed = 0
): Promise<BenchResult> {
  const server = await servePolicy(agent, port);
  try {
    return await runBench(
      scenarioDir,
      `external:tcp:127.0.0.1:${port}`,
      reportPath,
      seed
    );
  } finally {
    server.close();
  }
}
