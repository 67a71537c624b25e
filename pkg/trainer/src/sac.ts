/**
 * Discrete soft actor-critic with masked actions.
 *
 * The policy maximizes expected soft value: Q under the policy plus the
 * entropy bonus weighted by a temperature that is auto-tuned toward a
 * target entropy. Invalid actions get a -1e9 logit push before the
 * softmax, so their probability underflows to exactly zero and they are
 * never sampled or counted in the entropy.
 */

import * as tf from "@tensorflow/tfjs";
import { EncoderConfig, PolicyNet, TwinCritic, defaultEncoderConfig } from "./net";
import { MASK_DIM, OBS_DIM, SCAN_DIM, TARGET_DIM } from "./protocol";
import { Batch } from "./replay";

const NEG_BIG = -1e9;

export interface SacConfig {
  gamma: number;
  tau: number;
  lr: number;
  alphaLr: number;
  batchSize: number;
  replayCapacity: number;
  warmup: number;
  updateEvery: number;
  targetEntropyRatio: number; // target H = ratio * log(|A|)
  curriculumSwitch: number; // episode index of fixed->randomized goals
  guidance: boolean;
}

export const defaultSacConfig: SacConfig = {
  gamma: 0.99,
  tau: 0.005,
  lr: 3e-4,
  alphaLr: 3e-4,
  batchSize: 64,
  replayCapacity: 100_000,
  warmup: 600,
  updateEvery: 4,
  targetEntropyRatio: 0.5,
  curriculumSwitch: 400,
  guidance: true,
};

function maskedLogits(logits: tf.Tensor2D, mask: tf.Tensor2D): tf.Tensor2D {
  return tf.add(logits, tf.mul(tf.sub(1, mask), NEG_BIG)) as tf.Tensor2D;
}

function maskFrom(obs: tf.Tensor2D): tf.Tensor2D {
  return obs.slice([0, SCAN_DIM + TARGET_DIM], [-1, MASK_DIM]) as tf.Tensor2D;
}

export class SacAgent {
  actor: PolicyNet;
  critic: TwinCritic;
  target: TwinCritic;
  logAlpha: tf.Variable;
  actorOpt: tf.Optimizer;
  criticOpt: tf.Optimizer;
  alphaOpt: tf.Optimizer;
  targetEntropy: number;
  cfg: SacConfig;
  updates = 0;

  private static counter = 0;

  constructor(cfg: SacConfig = defaultSacConfig, enc: EncoderConfig = defaultEncoderConfig) {
    this.cfg = cfg;
    this.actor = new PolicyNet(enc, MASK_DIM, "actor");
    this.critic = new TwinCritic(enc, MASK_DIM, "critic");
    this.target = new TwinCritic(enc, MASK_DIM, "target");
    this.target.copyFrom(this.critic, 1.0);
    this.logAlpha = tf.variable(
      tf.scalar(Math.log(0.2)),
      true,
      `logAlpha${SacAgent.counter++}`
    );
    this.actorOpt = tf.train.adam(cfg.lr);
    this.criticOpt = tf.train.adam(cfg.lr);
    this.alphaOpt = tf.train.adam(cfg.alphaLr);
    this.targetEntropy = cfg.targetEntropyRatio * Math.log(MASK_DIM);
  }

  get alpha(): number {
    return Math.exp(this.logAlpha.dataSync()[0]);
  }

  /** Masked policy distribution for one observation vector. */
  probs(obs: Float32Array): Float32Array {
    return tf.tidy(() => {
      const o = tf.tensor2d(obs, [1, OBS_DIM]);
      const logits = maskedLogits(this.actor.forward(o), maskFrom(o));
      return tf.softmax(logits).dataSync() as Float32Array;
    });
  }

  /** Sample a masked action; greedy=true takes the argmax instead. */
  act(obs: Float32Array, greedy = false, rand: () => number = Math.random): number {
    const p = this.probs(obs);
    if (greedy) {
      let best = 0;
      for (let i = 1; i < p.length; i++) if (p[i] > p[best]) best = i;
      return best;
    }
    let u = rand();
    for (let i = 0; i < p.length; i++) {
      u -= p[i];
      if (u <= 0) return i;
    }
    return p.length - 1;
  }

  /** One gradient step on critics, actor, and temperature. */
  trainStep(batch: Batch): { criticLoss: number; actorLoss: number; entropy: number } {
    const { n } = batch;
    const obs = tf.tensor2d(batch.obs, [n, OBS_DIM]);
    const nextObs = tf.tensor2d(batch.nextObs, [n, OBS_DIM]);
    const action = tf.tensor1d(batch.action, "int32");
    const reward = tf.tensor1d(batch.reward);
    const done = tf.tensor1d(batch.done);
    const alpha = this.alpha;
    const { gamma } = this.cfg;

    // bootstrap target from the masked next-state policy
    const y = tf.tidy(() => {
      const nextMask = maskFrom(nextObs);
      const logits = maskedLogits(this.actor.forward(nextObs), nextMask);
      const logp = tf.logSoftmax(logits);
      const p = tf.softmax(logits);
      const q1 = this.target.q1.forward(nextObs);
      const q2 = this.target.q2.forward(nextObs);
      const qmin = tf.minimum(q1, q2);
      const soft = tf.sum(tf.mul(p, tf.sub(qmin, tf.mul(logp, alpha))), 1);
      return tf.add(reward, tf.mul(tf.mul(tf.sub(1, done), gamma), soft));
    });

    const oneHot = tf.oneHot(action, MASK_DIM);
    const criticLoss = this.criticOpt.minimize(
      () => {
        const q1 = tf.sum(tf.mul(this.critic.q1.forward(obs), oneHot), 1);
        const q2 = tf.sum(tf.mul(this.critic.q2.forward(obs), oneHot), 1);
        return tf.add(
          tf.mean(tf.squaredDifference(q1, y)),
          tf.mean(tf.squaredDifference(q2, y))
        ) as tf.Scalar;
      },
      true,
      this.critic.trainables() as unknown as tf.Variable[]
    )!;

    // actor: maximize soft value under the current critics (detached)
    const qDetached = tf.tidy(() =>
      tf.minimum(this.critic.q1.forward(obs), this.critic.q2.forward(obs))
    );
    let entropyVal = 0;
    const actorLoss = this.actorOpt.minimize(
      () => {
        const mask = maskFrom(obs);
        const logits = maskedLogits(this.actor.forward(obs), mask);
        const p = tf.softmax(logits);
        const logp = tf.logSoftmax(logits);
        const inner = tf.sum(tf.mul(p, tf.sub(tf.mul(logp, alpha), qDetached)), 1);
        const ent = tf.neg(tf.mean(tf.sum(tf.mul(p, logp), 1)));
        entropyVal = ent.dataSync()[0];
        return tf.mean(inner) as tf.Scalar;
      },
      true,
      this.actor.trainables() as unknown as tf.Variable[]
    )!;

    // temperature toward the entropy target: pressure shrinks alpha while
    // entropy sits above target and grows it when the policy over-sharpens
    this.alphaOpt.minimize(
      () =>
        tf.mul(
          tf.exp(this.logAlpha),
          entropyVal - this.targetEntropy
        ) as tf.Scalar,
      false,
      [this.logAlpha]
    );

    this.target.copyFrom(this.critic, this.cfg.tau);
    this.updates += 1;

    const out = {
      criticLoss: criticLoss.dataSync()[0],
      actorLoss: actorLoss.dataSync()[0],
      entropy: entropyVal,
    };
    tf.dispose([
      obs, nextObs, action, reward, done, y, oneHot, qDetached, criticLoss, actorLoss,
    ]);
    return out;
  }

  checkpoint(): Record<string, unknown> {
    return {
      format: "escapesim-trainer-v1",
      actor: this.actor.weights(),
      critic: this.critic.weights(),
      logAlpha: this.logAlpha.dataSync()[0],
    };
  }

  restore(ckpt: Record<string, any>): void {
    if (ckpt.format !== "escapesim-trainer-v1") {
      throw new Error(`unknown checkpoint format ${ckpt.format}`);
    }
    this.actor.load(ckpt.actor);
    this.critic.load(ckpt.critic);
    this.target.copyFrom(this.critic, 1.0);
    this.logAlpha.assign(tf.scalar(ckpt.logAlpha));
  }
}
