/** Embedding lookup with a hand-rolled gradient.
 *
 * tf.gather's gradient routes through UnsortedSegmentSum, which the
 * wasm backend lacks and the cpu backend implements in O(segments x
 * input) tensor ops (seconds per batch at our sizes). The backward
 * scatter here is a plain typed-array loop: exact same math, microseconds.
 */

import * as tf from "@tensorflow/tfjs";

export function embedRows(table: tf.Variable<tf.Rank.R2>, ids: tf.Tensor1D): tf.Tensor2D {
  const [rows, dim] = table.shape;
  const lookup = tf.customGrad((e, save) => {
    (save as tf.GradSaveFunc)([ids]);
    const value = tf.gather(e as tf.Tensor2D, ids);
    const gradFunc = (dy: tf.Tensor, saved: tf.Tensor[]) => {
      const idArr = saved[0].dataSync();
      const dyArr = dy.dataSync();
      const acc = new Float32Array(rows * dim);
      for (let n = 0; n < idArr.length; n++) {
        const base = idArr[n] * dim;
        const dbase = n * dim;
        for (let d = 0; d < dim; d++) acc[base + d] += dyArr[dbase + d];
      }
      return [tf.tensor2d(acc, [rows, dim])];
    };
    return { value, gradFunc };
  });
  return lookup(table) as tf.Tensor2D;
}
