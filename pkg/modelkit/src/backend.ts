/** tfjs backend selection: the WASM backend when available (roughly an
 * order of magnitude faster for training here), plain CPU otherwise.
 * Call once before any model work. */

import * as tf from "@tensorflow/tfjs";

let initialized: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  if (!initialized) {
    initialized = (async () => {
      if (process.env.MODELKIT_CPU_BACKEND) {
        await tf.setBackend("cpu");
        await tf.ready();
        return tf.getBackend();
      }
      try {
        const wasm = await import("@tensorflow/tfjs-backend-wasm");
        const { fileURLToPath } = await import("node:url");
        const path = await import("node:path");
        const wasmDir = path.dirname(
          fileURLToPath(import.meta.resolve("@tensorflow/tfjs-backend-wasm")),
        );
        wasm.setWasmPaths(wasmDir + "/");
        await tf.setBackend("wasm");
        await tf.ready();
      } catch {
        await tf.setBackend("cpu");
        await tf.ready();
      }
      return tf.getBackend();
    })();
  }
  return initialized;
}
