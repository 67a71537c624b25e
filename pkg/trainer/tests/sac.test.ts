import { beforeAll, describe, expect, it } from "vitest";
import { setupBackend } from "../src/backend";
import { OBS_DIM, SCAN_DIM, TARGET_DIM, MASK_DIM } from "../src/protocol";
import { Replay } from "../src/replay";
import { SacAgent, defaultSacConfig } from "../src/sac";
import { defaultEncoderConfig } from "../src/net";

const tiny = {
  ...defaultEncoderConfig,
  scanHidden: 32,
  tokenDim: 16,
  ffnDim: 32,
  headHidden: 32,
};

function obsWithMask(valid: number[]): Float32Array {
  const v = new Float32Array(OBS_DIM);
  for (let i = 0; i < SCAN_DIM; i++) v[i] = 1.0;
  for (const a of valid) v[SCAN_DIM + TARGET_DIM + a] = 1;
  return v;
}

beforeAll(async () => {
  await setupBackend();
});

describe("masked policy", () => {
  it("yields (near) zero probability on invalid actions", () => {
    const agent = new SacAgent(defaultSacConfig, tiny);
    const obs = obsWithMask([3, 17, 40]);
    const p = agent.probs(obs);
    let validMass = 0;
    for (const a of [3, 17, 40]) validMass += p[a];
    expect(validMass).toBeGreaterThan(0.999999);
    for (let a = 0; a < MASK_DIM; a++) {
      if (![3, 17, 40].includes(a)) expect(p[a]).toBeLessThan(1e-9);
    }
  });

  it("samples only valid actions", () => {
    const agent = new SacAgent(defaultSacConfig, tiny);
    const obs = obsWithMask([5, 6]);
    for (let k = 0; k < 200; k++) {
      expect([5, 6]).toContain(agent.act(obs));
    }
  });
});

describe("replay invariant", () => {
  it("never stores a masked-invalid action", () => {
    const r = new Replay(64);
    const obs = obsWithMask([1, 2]);
    expect(r.push(obs, 1, 0.5, obs, false)).toBe(true);
    expect(r.push(obs, 3, 0.5, obs, false)).toBe(false); // invalid: dropped
    expect(r.size).toBe(1);
    expect(r.rejectedInvalid).toBe(1);
    expect(r.allStoredValid()).toBe(true);
  });
});

describe("sac updates", () => {
  it("keeps entropy non-negative and learns a bandit preference", { timeout: 60_000 }, () => {
    const agent = new SacAgent(
      { ...defaultSacConfig, warmup: 0, batchSize: 32, lr: 3e-3 },
      tiny
    );
    const r = new Replay(512);
    const obs = obsWithMask([0, 1]);
    // action 1 pays, action 0 does not; terminal bandit
    for (let i = 0; i < 256; i++) {
      const a = i % 2;
      r.push(obs, a, a === 1 ? 1.0 : -1.0, new Float32Array(OBS_DIM), true);
    }
    let entropy = Infinity;
    for (let step = 0; step < 60; step++) {
      const stats = agent.trainStep(r.sample(32, () => (step * 37 + 11) % 256 / 256));
      entropy = stats.entropy;
      expect(stats.entropy).toBeGreaterThanOrEqual(0);
      expect(Number.isFinite(stats.criticLoss)).toBe(true);
    }
    const p = agent.probs(obs);
    expect(p[1]).toBeGreaterThan(p[0]);
  });

  it("tunes the temperature toward the entropy target", { timeout: 60_000 }, () => {
    const r = new Replay(256);
    const obs = obsWithMask([0, 1, 2, 3]);
    for (let i = 0; i < 128; i++) {
      r.push(obs, i % 4, 0.0, new Float32Array(OBS_DIM), true);
    }
    // fresh policy entropy ~ log(4) = 1.39; a tiny target should shrink alpha
    const hot = new SacAgent({ ...defaultSacConfig, warmup: 0, alphaLr: 3e-2 }, tiny);
    hot.targetEntropy = 0.01;
    const a0 = hot.alpha;
    for (let i = 0; i < 20; i++) hot.trainStep(r.sample(32));
    expect(hot.alpha).toBeLessThan(a0);
    // an unattainably high target should grow alpha
    const cold = new SacAgent({ ...defaultSacConfig, warmup: 0, alphaLr: 3e-2 }, tiny);
    cold.targetEntropy = 5.0;
    const b0 = cold.alpha;
    for (let i = 0; i < 20; i++) cold.trainStep(r.sample(32));
    expect(cold.alpha).toBeGreaterThan(b0);
  });

  it("checkpoint round-trips", () => {
    const a = new SacAgent(defaultSacConfig, tiny);
    const obs = obsWithMask([2, 9]);
    const before = a.probs(obs);
    const ckpt = a.checkpoint();
    const b = new SacAgent(defaultSacConfig, tiny);
    b.restore(JSON.parse(JSON.stringify(ckpt)));
    const after = b.probs(obs);
    for (let i = 0; i < before.length; i++) {
      expect(after[i]).toBeCloseTo(before[i], 6);
    }
  });
});
