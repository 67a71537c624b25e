/** Ring-buffer replay. Transitions whose action is masked invalid in their
 * observation are rejected (guidance commands are quantized to the nearest
 * discrete index and occasionally land on a masked action; those are
 * dropped rather than poisoning the masked policy). */

import { MASK_DIM, OBS_DIM, SCAN_DIM, TARGET_DIM } from "./protocol";

export interface Batch {
  obs: Float32Array; // (n, OBS_DIM) flattened
  action: Int32Array;
  reward: Float32Array;
  nextObs: Float32Array;
  done: Float32Array;
  n: number;
}

export class Replay {
  readonly capacity: number;
  private obs: Float32Array;
  private nextObs: Float32Array;
  private action: Int32Array;
  private reward: Float32Array;
  private done: Float32Array;
  size = 0;
  private head = 0;
  rejectedInvalid = 0;

  constructor(capacity: number) {
    this.capacity = capacity;
    this.obs = new Float32Array(capacity * OBS_DIM);
    this.nextObs = new Float32Array(capacity * OBS_DIM);
    this.action = new Int32Array(capacity);
    this.reward = new Float32Array(capacity);
    this.done = new Float32Array(capacity);
  }

  static actionValid(obs: Float32Array, action: number): boolean {
    return obs[SCAN_DIM + TARGET_DIM + action] > 0.5;
  }

  push(
    obs: Float32Array,
    action: number,
    reward: number,
    nextObs: Float32Array,
    done: boolean
  ): boolean {
    if (action < 0 || action >= MASK_DIM || !Replay.actionValid(obs, action)) {
      this.rejectedInvalid += 1;
      return false;
    }
    const i = this.head;
    this.obs.set(obs, i * OBS_DIM);
    this.nextObs.set(nextObs, i * OBS_DIM);
    this.action[i] = action;
    this.reward[i] = reward;
    this.done[i] = done ? 1 : 0;
    this.head = (this.head + 1) % this.capacity;
    this.size = Math.min(this.size + 1, this.capacity);
    return true;
  }

  sample(n: number, rand: () => number = Math.random): Batch {
    const obs = new Float32Array(n * OBS_DIM);
    const nextObs = new Float32Array(n * OBS_DIM);
    const action = new Int32Array(n);
    const reward = new Float32Array(n);
    const done = new Float32Array(n);
    for (let k = 0; k < n; k++) {
      const i = Math.floor(rand() * this.size);
      obs.set(this.obs.subarray(i * OBS_DIM, (i + 1) * OBS_DIM), k * OBS_DIM);
      nextObs.set(this.nextObs.subarray(i * OBS_DIM, (i + 1) * OBS_DIM), k * OBS_DIM);
      action[k] = this.action[i];
      reward[k] = this.reward[i];
      done[k] = this.done[i];
    }
    return { obs, action, reward, nextObs, done, n };
  }

  /** Test hook: true iff every stored transition's action was mask-valid. */
  allStoredValid(): boolean {
    for (let i = 0; i < this.size; i++) {
      const o = this.obs.subarray(i * OBS_DIM, (i + 1) * OBS_DIM);
      if (!Replay.actionValid(o as Float32Array, this.action[i])) return false;
    }
    return true;
  }
}
