/** CLI: train a masked discrete SAC agent against a scenario set.
 *
 * node dist/train.js --scenario DIR --episodes N [--no-guidance]
 *   [--seed S] [--max-steps M] [--log PATH] [--checkpoint PATH]
 *   [--curriculum-switch E]
 */

import * as fs from "fs";
import { setupBackend } from "./backend";
import { SacAgent, defaultSacConfig } from "./sac";
import { train } from "./trainer";

function arg(name: string, fallback?: string): string | undefined {
  const i = process.argv.indexOf(`--${name}`);
  if (i >= 0 && i + 1 < process.argv.length) return process.argv[i + 1];
  return fallback;
}

function flag(name: string): boolean {
  return process.argv.includes(`--${name}`);
}

async function main(): Promise<void> {
  await setupBackend();
  const scenario = arg("scenario");
  if (!scenario) {
    console.error("usage: train --scenario DIR --episodes N [options]");
    process.exit(1);
  }
  const episodes = parseInt(arg("episodes", "500")!, 10);
  const seed = parseInt(arg("seed", "0")!, 10);
  const cfg = {
    ...defaultSacConfig,
    guidance: !flag("no-guidance"),
    curriculumSwitch: parseInt(
      arg("curriculum-switch", String(Math.floor(episodes * 0.4)))!,
      10
    ),
  };
  const agent = new SacAgent(cfg);
  const restore = arg("restore");
  if (restore) {
    agent.restore(JSON.parse(fs.readFileSync(restore, "utf-8")));
    console.error(`restored checkpoint ${restore}`);
  }
  const ckpt = arg("checkpoint");
  const t0 = Date.now();
  const result = await train(
    agent,
    {
      scenario,
      episodes,
      seed,
      maxSteps: parseInt(arg("max-steps", "80")!, 10),
      trainMode: cfg.guidance,
    },
    cfg,
    arg("log"),
    (log) => {
      if (log.episode % 50 === 0) {
        console.error(
          `ep ${log.episode}  return ${log.return.toFixed(2)}  ` +
            `success ${log.success}  guid ${(log.guidance_fraction * 100).toFixed(0)}%  ` +
            `alpha ${log.alpha.toFixed(3)}  replay ${log.replay}`
        );
      }
    },
    { checkpointPath: ckpt ?? undefined }
  );
  if (ckpt) fs.writeFileSync(ckpt, JSON.stringify(agent.checkpoint()));
  console.error(
    `trained ${result.episodes} episodes (${result.successes} successes) in ` +
      `${((Date.now() - t0) / 1000).toFixed(0)}s`
  );
}

main().catch((e) => {
  console.error(e);
  process.exit(2);
});
