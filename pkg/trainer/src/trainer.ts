/** The training loop: drives one environment session, stores executed
 * transitions (guidance or policy, tagged by source), and optimizes the
 * SAC objective. Emits one JSONL log line per episode. */

import * as fs from "fs";
import { EnvSession, ServeOptions } from "./env";
import {
  EpisodeRecord,
  ObsRecord,
  StepRecord,
  helloAck,
  actByIndex,
  obsToVector,
  OBS_DIM,
} from "./protocol";
import { Replay } from "./replay";
import { SacAgent, SacConfig } from "./sac";

export interface EpisodeLog {
  episode: number;
  steps: number;
  return: number;
  success: boolean;
  cause: string | null;
  stage: string;
  guidance_fraction: number;
  alpha: number;
  entropy: number;
  replay: number;
  rejected: number;
}

export interface TrainResult {
  episodes: number;
  successes: number;
  logs: EpisodeLog[];
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface TrainExtras {
  checkpointPath?: string;
  checkpointEvery?: number; // episodes between periodic checkpoint writes
}

export async function train(
  agent: SacAgent,
  serveOpts: ServeOptions,
  cfg: SacConfig,
  logPath?: string,
  onEpisode?: (log: EpisodeLog) => void,
  extras: TrainExtras = {}
): Promise<TrainResult> {
  const env = EnvSession.spawnServe(serveOpts);
  const replay = new Replay(cfg.replayCapacity);
  const rand = mulberry32((serveOpts.seed ?? 0) + 1);
  const logFh = logPath ? fs.createWriteStream(logPath) : undefined;
  const zero = new Float32Array(OBS_DIM);
  const logs: EpisodeLog[] = [];

  let entropy = Math.log(42);
  let stage = "fixed";
  let epReturn = 0;
  let epSteps = 0;
  let guidanceSteps = 0;
  let episode = 0;
  let successes = 0;
  let globalSteps = 0;
  let prevObs: Float32Array | null = null;
  let pending: { obs: Float32Array; action: number; reward: number } | null = null;

  const hello = await env.next();
  if (!hello || hello.type !== "hello") {
    env.close();
    throw new Error(`expected hello, got ${hello?.type}; stderr: ${env.stderr}`);
  }
  env.send(helloAck(cfg.guidance ? cfg.curriculumSwitch : undefined));

  const checkpointEvery = extras.checkpointEvery ?? 250;
  const flushEpisode = (cause: string | null) => {
    const log: EpisodeLog = {
      episode,
      steps: epSteps,
      return: epReturn,
      success: cause === "success",
      cause,
      stage,
      guidance_fraction: epSteps ? guidanceSteps / epSteps : 0,
      alpha: agent.alpha,
      entropy,
      replay: replay.size,
      rejected: replay.rejectedInvalid,
    };
    logs.push(log);
    logFh?.write(JSON.stringify(log) + "\n");
    onEpisode?.(log);
    if (cause === "success") successes += 1;
    if (
      extras.checkpointPath &&
      logs.length % checkpointEvery === 0
    ) {
      fs.writeFileSync(extras.checkpointPath, JSON.stringify(agent.checkpoint()));
    }
  };

  for (;;) {
    const rec = await env.next();
    if (rec === null) break;
    if (rec.type === "episode") {
      const e = rec as EpisodeRecord;
      episode = e.episode;
      stage = e.stage;
      epReturn = 0;
      epSteps = 0;
      guidanceSteps = 0;
      prevObs = null;
      pending = null;
    } else if (rec.type === "obs") {
      const vec = obsToVector(rec as ObsRecord);
      if (pending) {
        replay.push(pending.obs, pending.action, pending.reward, vec, false);
        pending = null;
      }
      prevObs = vec;
      const action = agent.act(vec, false, rand);
      env.send(actByIndex(action));
    } else if (rec.type === "step") {
      const s = rec as StepRecord;
      const reward = s.reward?.total ?? 0;
      epReturn += reward;
      epSteps += 1;
      globalSteps += 1;
      if (s.executed?.source === "guidance") guidanceSteps += 1;
      const executed = s.executed?.index ?? -1;
      if (s.cause === "protocol_error") {
        pending = null;
        prevObs = null;
        flushEpisode(s.cause);
        continue;
      }
      if (prevObs) {
        if (s.terminal) {
          replay.push(prevObs, executed, reward, zero, true);
        } else {
          pending = { obs: prevObs, action: executed, reward };
        }
      }
      if (
        replay.size >= cfg.warmup &&
        globalSteps % cfg.updateEvery === 0
      ) {
        const stats = agent.trainStep(replay.sample(cfg.batchSize, rand));
        entropy = stats.entropy;
      }
      if (s.terminal) flushEpisode(s.cause);
    } else if (rec.type === "end") {
      break;
    }
  }
  env.close();
  logFh?.end();
  return { episodes: logs.length, successes, logs };
}
