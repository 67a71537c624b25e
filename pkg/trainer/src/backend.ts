/** Prefer the wasm backend (SIMD matmuls); fall back to the JS cpu backend. */

import * as tf from "@tensorflow/tfjs";

export async function setupBackend(): Promise<string> {
  try {
    require("@tensorflow/tfjs-backend-wasm");
    if (await tf.setBackend("wasm")) return "wasm";
  } catch {
    // wasm package unavailable; cpu works everywhere
  }
  await tf.setBackend("cpu");
  return "cpu";
}
