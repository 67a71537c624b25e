/** End-to-end against the real Python environment over stdio: handshake,
 * episodes, transition storage, curriculum switch, and evaluation via the
 * primary CLI's external-policy benchmark. */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";
import { setupBackend } from "../src/backend";
import { EnvSession } from "../src/env";
import { helloAck, actByIndex, ObsRecord } from "../src/protocol";
import { SacAgent, defaultSacConfig } from "../src/sac";
import { defaultEncoderConfig } from "../src/net";
import { train } from "../src/trainer";
import { evaluateAgent } from "../src/evaluate";

const PY = process.env.PYTHON ?? "python3";
const tiny = {
  ...defaultEncoderConfig,
  scanHidden: 32,
  tokenDim: 16,
  ffnDim: 32,
  headHidden: 32,
};

let corridorDir: string;

beforeAll(async () => {
  await setupBackend();
  corridorDir = fs.mkdtempSync(path.join(os.tmpdir(), "corridors-"));
  execFileSync(PY, [
    "-m",
    "escapesim.cli",
    "gen",
    "--out",
    corridorDir,
    "--kind",
    "corridor",
    "--count",
    "2",
    "--seed",
    "50",
  ]);
}, 120_000);

describe("environment session", () => {
  it("handshakes and runs an episode with a fixed action", async () => {
    const env = EnvSession.spawnServe({
      scenario: corridorDir,
      episodes: 1,
      seed: 0,
      maxSteps: 10,
    });
    const hello: any = await env.next();
    expect(hello.type).toBe("hello");
    expect(hello.actions).toHaveLength(42);
    expect(hello.ray_count).toBe(500);
    env.send(helloAck());
    let steps = 0;
    for (;;) {
      const rec: any = await env.next();
      if (rec === null || rec.type === "end") break;
      if (rec.type === "obs") {
        env.send(actByIndex(38)); // large-radius forward
      } else if (rec.type === "step") {
        steps += 1;
        expect(rec.executed.source).toBe("policy");
      }
    }
    env.close();
    expect(steps).toBeGreaterThan(0);
  }, 120_000);

  it("reports guidance-sourced actions in train mode", async () => {
    const env = EnvSession.spawnServe({
      scenario: corridorDir,
      episodes: 1,
      seed: 0,
      maxSteps: 60,
      trainMode: true,
    });
    const hello: any = await env.next();
    env.send(helloAck());
    const sources = new Set<string>();
    for (;;) {
      const rec: any = await env.next();
      if (rec === null || rec.type === "end") break;
      if (rec.type === "obs") env.send(actByIndex(0));
      if (rec.type === "step") sources.add(rec.executed.source);
    }
    env.close();
    expect(sources.has("guidance")).toBe(true); // corridor is planner-feasible
  }, 120_000);
});

describe("training loop", () => {
  it("stores transitions, logs episodes, and switches curriculum", async () => {
    const cfg = {
      ...defaultSacConfig,
      warmup: 100000, // no updates: mechanics only
      curriculumSwitch: 2,
    };
    const agent = new SacAgent(cfg, tiny);
    const logPath = path.join(os.tmpdir(), `trainlog-${Date.now()}.jsonl`);
    const result = await train(
      agent,
      { scenario: corridorDir, episodes: 4, seed: 3, maxSteps: 40, trainMode: true },
      cfg,
      logPath
    );
    expect(result.episodes).toBe(4);
    const lines = fs
      .readFileSync(logPath, "utf-8")
      .trim()
      .split("\n")
      .map((l) => JSON.parse(l));
    // curriculum: fixed goals before the switch episode, randomized after
    expect(lines[0].stage).toContain("fixed");
    expect(lines[1].stage).toContain("fixed");
    expect(lines[2].stage).toContain("random");
    expect(lines[3].stage).toContain("random");
    expect(lines.some((l) => l.guidance_fraction > 0)).toBe(true);
  }, 240_000);
});

describe("evaluation through the primary CLI", () => {
  it("produces a benchmark report for an untrained policy", async () => {
    const agent = new SacAgent(defaultSacConfig, tiny);
    const report = path.join(os.tmpdir(), `report-${Date.now()}.json`);
    const res = await evaluateAgent(agent, corridorDir, report, 18741, 5);
    expect(res.episodes).toBe(2);
    expect(res.total_success_rate).toBeGreaterThanOrEqual(0);
    const full = JSON.parse(fs.readFileSync(report, "utf-8"));
    expect(full.policy).toContain("external");
  }, 240_000);
});
