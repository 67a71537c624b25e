/**
 * Networks: three per-stream MLP embeddings (scan, target, mask) fused by a
 * single-block transformer encoder, then actor (42 logits) or twin critic
 * (42 Q-values) heads. Built from explicit tf.Variables (tfjs 4.x has no
 * multi-head attention layer) so checkpointing is a plain weight map.
 */

import * as tf from "@tensorflow/tfjs";
import { MASK_DIM, OBS_DIM, SCAN_DIM, TARGET_DIM } from "./protocol";

export interface EncoderConfig {
  scanHidden: number;
  targetHidden: number;
  maskHidden: number;
  tokenDim: number;
  heads: number;
  ffnDim: number;
  headHidden: number;
}

export const defaultEncoderConfig: EncoderConfig = {
  scanHidden: 64,
  targetHidden: 24,
  maskHidden: 24,
  tokenDim: 32,
  heads: 2,
  ffnDim: 64,
  headHidden: 48,
};

function glorot(shape: number[], name: string): tf.Variable {
  const fanIn = shape.length > 1 ? shape[0] : 1;
  const fanOut = shape[shape.length - 1];
  const limit = Math.sqrt(6 / (fanIn + fanOut));
  return tf.variable(tf.randomUniform(shape, -limit, limit), true, name);
}

function zeros(shape: number[], name: string): tf.Variable {
  return tf.variable(tf.zeros(shape), true, name);
}

// tf registers variable names globally; namespace them per module instance
let moduleCounter = 0;

export class Module {
  vars = new Map<string, tf.Variable>();
  private uid = `m${moduleCounter++}`;

  dense(name: string, inDim: number, outDim: number): void {
    this.vars.set(`${name}/w`, glorot([inDim, outDim], `${this.uid}/${name}/w`));
    this.vars.set(`${name}/b`, zeros([outDim], `${this.uid}/${name}/b`));
  }

  norm(name: string, dim: number): void {
    this.vars.set(
      `${name}/g`,
      tf.variable(tf.ones([dim]), true, `${this.uid}/${name}/g`)
    );
    this.vars.set(`${name}/b`, zeros([dim], `${this.uid}/${name}/b`));
  }

  fwdDense(name: string, x: tf.Tensor, relu = false): tf.Tensor {
    const y = tf.add(tf.matMul(x, this.vars.get(`${name}/w`)!), this.vars.get(`${name}/b`)!);
    return relu ? tf.relu(y) : y;
  }

  fwdNorm(name: string, x: tf.Tensor): tf.Tensor {
    const mean = tf.mean(x, -1, true);
    const variance = tf.mean(tf.square(tf.sub(x, mean)), -1, true);
    const normed = tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, 1e-5)));
    return tf.add(tf.mul(normed, this.vars.get(`${name}/g`)!), this.vars.get(`${name}/b`)!);
  }

  trainables(): tf.Variable[] {
    return [...this.vars.values()];
  }

  weights(): Record<string, { shape: number[]; data: number[] }> {
    const out: Record<string, { shape: number[]; data: number[] }> = {};
    for (const [k, v] of this.vars) {
      out[k] = { shape: v.shape.slice(), data: Array.from(v.dataSync()) };
    }
    return out;
  }

  load(weights: Record<string, { shape: number[]; data: number[] }>): void {
    for (const [k, v] of this.vars) {
      const w = weights[k];
      if (!w) throw new Error(`checkpoint missing variable ${k}`);
      v.assign(tf.tensor(w.data, w.shape as number[]));
    }
  }

  copyFrom(other: Module, tau = 1.0): void {
    for (const [k, v] of this.vars) {
      const src = other.vars.get(k)!;
      if (tau >= 1.0) {
        v.assign(src);
      } else {
        tf.tidy(() => {
          v.assign(tf.add(tf.mul(src, tau), tf.mul(v, 1 - tau)));
        });
      }
    }
  }

  dispose(): void {
    for (const v of this.vars.values()) v.dispose();
  }
}

/** Encoder + one output head producing `outDim` values per observation. */
export class PolicyNet extends Module {
  constructor(public cfg: EncoderConfig, public outDim: number, prefix: string) {
    super();
    const d = cfg.tokenDim;
    this.dense("scan1", SCAN_DIM, cfg.scanHidden);
    this.dense("scan2", cfg.scanHidden, d);
    this.dense("tgt1", TARGET_DIM, cfg.targetHidden);
    this.dense("tgt2", cfg.targetHidden, d);
    this.dense("mask1", MASK_DIM, cfg.maskHidden);
    this.dense("mask2", cfg.maskHidden, d);
    this.norm("ln1", d);
    this.dense("q", d, d);
    this.dense("k", d, d);
    this.dense("v", d, d);
    this.dense("attnOut", d, d);
    this.norm("ln2", d);
    this.dense("ffn1", d, cfg.ffnDim);
    this.dense("ffn2", cfg.ffnDim, d);
    this.dense("head1", d, cfg.headHidden);
    this.dense("head2", cfg.headHidden, outDim);
  }

  /** obs: (B, OBS_DIM) -> (B, outDim) */
  forward(obs: tf.Tensor2D): tf.Tensor2D {
    return tf.tidy(() => {
      const scan = obs.slice([0, 0], [-1, SCAN_DIM]);
      const tgt = obs.slice([0, SCAN_DIM], [-1, TARGET_DIM]);
      const mask = obs.slice([0, SCAN_DIM + TARGET_DIM], [-1, MASK_DIM]);
      const e1 = this.fwdDense("scan2", this.fwdDense("scan1", scan, true));
      const e2 = this.fwdDense("tgt2", this.fwdDense("tgt1", tgt, true));
      const e3 = this.fwdDense("mask2", this.fwdDense("mask1", mask, true));
      const d = this.cfg.tokenDim;
      const b = obs.shape[0];
      // (B, 3, D) token stack
      let tokens = tf.stack([e1, e2, e3], 1) as tf.Tensor3D;
      const x = this.fwdNorm("ln1", tokens);
      const flat = x.reshape([b * 3, d]) as tf.Tensor2D;
      const heads = this.cfg.heads;
      const dh = d / heads;
      const toHeads = (t: tf.Tensor) =>
        t.reshape([b, 3, heads, dh]).transpose([0, 2, 1, 3]); // (B,H,3,dh)
      const q = toHeads(this.fwdDense("q", flat));
      const k = toHeads(this.fwdDense("k", flat));
      const v = toHeads(this.fwdDense("v", flat));
      const scores = tf.mul(
        tf.matMul(q, k, false, true),
        1 / Math.sqrt(dh)
      ); // (B,H,3,3)
      const attn = tf.softmax(scores, -1);
      const ctx = tf
        .matMul(attn, v) // (B,H,3,dh)
        .transpose([0, 2, 1, 3])
        .reshape([b * 3, d]) as tf.Tensor2D;
      const attnOut = this.fwdDense("attnOut", ctx).reshape([b, 3, d]);
      tokens = tf.add(tokens, attnOut) as tf.Tensor3D;
      const y = this.fwdNorm("ln2", tokens);
      const ffn = this.fwdDense(
        "ffn2",
        this.fwdDense("ffn1", y.reshape([b * 3, d]) as tf.Tensor2D, true)
      ).reshape([b, 3, d]);
      tokens = tf.add(tokens, ffn) as tf.Tensor3D;
      const pooled = tf.mean(tokens, 1) as tf.Tensor2D; // (B, D)
      const h = this.fwdDense("head1", pooled, true);
      return this.fwdDense("head2", h) as tf.Tensor2D;
    });
  }
}

/** Twin Q critic: one shared encoder body per critic, 42 outputs each. */
export class TwinCritic {
  q1: PolicyNet;
  q2: PolicyNet;

  constructor(cfg: EncoderConfig, outDim: number, prefix: string) {
    this.q1 = new PolicyNet(cfg, outDim, `${prefix}/q1`);
    this.q2 = new PolicyNet(cfg, outDim, `${prefix}/q2`);
  }

  trainables(): tf.Variable[] {
    return [...this.q1.trainables(), ...this.q2.trainables()];
  }

  copyFrom(other: TwinCritic, tau = 1.0): void {
    this.q1.copyFrom(other.q1, tau);
    this.q2.copyFrom(other.q2, tau);
  }

  weights() {
    return { q1: this.q1.weights(), q2: this.q2.weights() };
  }

  load(w: { q1: any; q2: any }) {
    this.q1.load(w.q1);
    this.q2.load(w.q2);
  }

  dispose(): void {
    this.q1.dispose();
    this.q2.dispose();
  }
}
