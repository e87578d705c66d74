/** Span extractor: a learned scorer over the serialized candidate block.
 *
 * Each block token gets hashed-embedding + neighbor + question-summary
 * features; two heads produce start/end position distributions. The
 * training loss is the span prediction objective: mean over samples of
 * -(log P(start) + log P(end)) under the position softmaxes, minimized
 * by Adam. Decoding is constrained to a single candidate so the served
 * span always slices verbatim out of one context.
 */

import * as tf from "@tensorflow/tfjs";

import { ExtractorSample, candidateText } from "./data.js";
import { embedRows } from "./tfops.js";
import { Rng } from "./rng.js";
import { bucketOf, joinSpan, normToken, tokens } from "./tokenize.js";

export interface ExtractorConfig {
  vocabBuckets: number;
  embedDim: number;
  hiddenDim: number;
  maxSpanLen: number;
  seed: number;
}

export const EXTRACTOR_DEFAULTS: ExtractorConfig = {
  vocabBuckets: 2048,
  embedDim: 24,
  hiddenDim: 64,
  maxSpanLen: 6,
  seed: 7,
};

const N_FEATS = 6;

export interface SpanPrediction {
  answer: string;
  context_index: number;
  start: number;
  end: number;
  score: number;
}

interface Encoded {
  ids: number[];
  prev: number[];
  next: number[];
  feats: number[][];
  qIds: number[];
  candidateOf: number[]; // token -> candidate index
  isMarker: boolean[];
  blockTokens: string[];
  offsets: number[];
}

function encodeBlock(question: string, contexts: string[], vocab: number): Encoded {
  const blockTokens: number[][] = [];
  const offsets: number[] = [];
  const toks: string[] = [];
  let cursor = 0;
  for (const context of contexts) {
    offsets.push(cursor);
    const ct = tokens(context);
    cursor += ct.length;
    toks.push(...ct);
  }
  const qSet = new Set(tokens(question).map(normToken).filter(Boolean));
  const L = toks.length;
  const pad = vocab; // reserved row
  const ids = toks.map((t) => bucketOf(t, vocab));
  const prev = ids.map((_, i) => (i > 0 ? ids[i - 1] : pad));
  const next = ids.map((_, i) => (i + 1 < L ? ids[i + 1] : pad));
  const feats: number[][] = [];
  const candidateOf: number[] = [];
  const isMarker: boolean[] = [];
  let candidate = -1;
  let afterAnswer = false;
  for (let i = 0; i < L; i++) {
    const raw = toks[i];
    if (raw === "Q:") {
      candidate++;
      afterAnswer = false;
    }
    // candidate boundaries also come from the serialization offsets in
    // case a context does not start with "Q:"
    while (candidate + 1 < offsets.length && i >= offsets[candidate + 1]) {
      candidate++;
      afterAnswer = false;
    }
    if (raw === "A:") afterAnswer = true;
    const marker = raw === "Q:" || raw === "A:";
    const norm = normToken(raw);
    feats.push([
      qSet.has(norm) ? 1 : 0,
      afterAnswer && !marker ? 1 : 0,
      marker ? 1 : 0,
      /^\d{4}$/.test(norm) ? 1 : 0,
      /^[A-Z]/.test(raw) ? 1 : 0,
      L > 1 ? i / (L - 1) : 0,
    ]);
    candidateOf.push(Math.max(candidate, 0));
    isMarker.push(marker);
  }
  const qIds = tokens(question).map((t) => bucketOf(t, vocab));
  return { ids, prev, next, feats, qIds, candidateOf, isMarker, blockTokens: toks, offsets };
}

function initMatrix(rng: Rng, rows: number, cols: number, scale: number): tf.Tensor2D {
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = rng.uniform(-scale, scale);
  return tf.tensor2d(data, [rows, cols]);
}

export interface TrainStats {
  epochLosses: number[];
  firstEpochBatchLosses: number[];
}

export class ExtractorModel {
  readonly config: ExtractorConfig;
  private E: tf.Variable<tf.Rank.R2>;
  private W1: tf.Variable<tf.Rank.R2>;
  private b1: tf.Variable<tf.Rank.R1>;
  private ws: tf.Variable<tf.Rank.R2>;
  private we: tf.Variable<tf.Rank.R2>;
  version = "extractor-1";

  constructor(config: ExtractorConfig = EXTRACTOR_DEFAULTS) {
    this.config = config;
    const rng = new Rng(config.seed);
    const inDim = config.embedDim * 4 + N_FEATS;
    const xavier = Math.sqrt(6 / (inDim + config.hiddenDim));
    this.E = tf.variable(initMatrix(rng, config.vocabBuckets + 1, config.embedDim, 0.05));
    this.W1 = tf.variable(initMatrix(rng, inDim, config.hiddenDim, xavier));
    this.b1 = tf.variable(tf.zeros([config.hiddenDim]));
    this.ws = tf.variable(initMatrix(rng, config.hiddenDim, 1, 0.1));
    this.we = tf.variable(initMatrix(rng, config.hiddenDim, 1, 0.1));
  }

  private variables(): tf.Variable[] {
    return [this.E, this.W1, this.b1, this.ws, this.we];
  }

  /** Forward pass over a padded batch; returns masked start/end logits. */
  private logits(
    ids: tf.Tensor2D,
    prev: tf.Tensor2D,
    next: tf.Tensor2D,
    feats: tf.Tensor3D,
    qIds: tf.Tensor2D,
    qMask: tf.Tensor2D,
    mask: tf.Tensor2D,
  ): { s: tf.Tensor2D; e: tf.Tensor2D } {
    const [B, L] = ids.shape;
    const embed = (t: tf.Tensor2D) => embedRows(this.E, t.flatten()).reshape([B, L, -1]);
    const tokE = embed(ids);
    const prevE = embed(prev);
    const nextE = embed(next);
    const qEmb = embedRows(this.E, qIds.flatten()).reshape([B, qIds.shape[1], -1]);
    const qSumRaw = qEmb.mul(qMask.expandDims(2)).sum(1);
    const qLen = qMask.sum(1, true).maximum(1);
    const qMean = qSumRaw.div(qLen); // [B, D]
    const qTiled = qMean.expandDims(1).tile([1, L, 1]);
    const x = tf.concat([tokE, prevE, nextE, qTiled, feats], 2); // [B,L,4D+F]
    const h = x
      .reshape([B * L, -1])
      .matMul(this.W1)
      .add(this.b1)
      .relu();
    const penalty = mask.sub(1).mul(1e9); // -1e9 on padding
    const s = h.matMul(this.ws).reshape([B, L]).add(penalty) as tf.Tensor2D;
    const e = h.matMul(this.we).reshape([B, L]).add(penalty) as tf.Tensor2D;
    return { s, e };
  }

  private batchTensors(encoded: Encoded[], L: number, Lq: number) {
    const pad = this.config.vocabBuckets;
    const take = (get: (enc: Encoded) => number[], fill: number, len: number) =>
      encoded.map((enc) => {
        const row = get(enc).slice(0, len);
        while (row.length < len) row.push(fill);
        return row;
      });
    const ids = tf.tensor2d(take((s) => s.ids, pad, L), [encoded.length, L], "int32");
    const prev = tf.tensor2d(take((s) => s.prev, pad, L), [encoded.length, L], "int32");
    const next = tf.tensor2d(take((s) => s.next, pad, L), [encoded.length, L], "int32");
    const feats = tf.tensor3d(
      encoded.map((enc) => {
        const rows = enc.feats.slice(0, L).map((r) => [...r]);
        while (rows.length < L) rows.push(new Array(N_FEATS).fill(0));
        return rows;
      }),
    );
    const mask = tf.tensor2d(
      encoded.map((enc) => {
        const row = new Array(L).fill(0);
        for (let i = 0; i < Math.min(enc.ids.length, L); i++) row[i] = 1;
        return row;
      }),
    );
    const qIds = tf.tensor2d(take((s) => s.qIds, pad, Lq), [encoded.length, Lq], "int32");
    const qMask = tf.tensor2d(
      encoded.map((enc) => {
        const row = new Array(Lq).fill(0);
        for (let i = 0; i < Math.min(enc.qIds.length, Lq); i++) row[i] = 1;
        return row;
      }),
    );
    return { ids, prev, next, feats, mask, qIds, qMask };
  }

  private encodeSample(sample: ExtractorSample): Encoded {
    const contexts = sample.candidates.map(candidateText);
    return encodeBlock(sample.subQuestion, contexts, this.config.vocabBuckets);
  }

  train(
    samples: ExtractorSample[],
    epochs: number,
    batchSize = 64,
    learningRate = 0.01,
  ): TrainStats {
    const encoded = samples.map((s) => this.encodeSample(s));
    const golds = samples.map((s) => [s.start, s.end]);
    const optimizer = tf.train.adam(learningRate);
    const epochLosses: number[] = [];
    const firstEpochBatchLosses: number[] = [];
    const order = samples.map((_, i) => i);
    for (let epoch = 0; epoch < epochs; epoch++) {
      new Rng(this.config.seed + 1000 + epoch).shuffle(order);
      let epochLoss = 0;
      let nBatches = 0;
      for (let at = 0; at < order.length; at += batchSize) {
        const batchIdx = order.slice(at, at + batchSize);
        const batch = batchIdx.map((i) => encoded[i]);
        const L = Math.max(...batch.map((b) => b.ids.length));
        const Lq = Math.max(...batch.map((b) => b.qIds.length));
        const tensors = this.batchTensors(batch, L, Lq);
        const sGold = tf.tensor1d(batchIdx.map((i) => golds[i][0]), "int32");
        const eGold = tf.tensor1d(batchIdx.map((i) => golds[i][1]), "int32");
        const lossT = optimizer.minimize(
          () => {
            const { s, e } = this.logits(
              tensors.ids, tensors.prev, tensors.next, tensors.feats,
              tensors.qIds, tensors.qMask, tensors.mask,
            );
            const nllS = tf.losses.softmaxCrossEntropy(tf.oneHot(sGold, L), s);
            const nllE = tf.losses.softmaxCrossEntropy(tf.oneHot(eGold, L), e);
            return nllS.add(nllE) as tf.Scalar;
          },
          true,
          this.variables(),
        ) as tf.Scalar;
        const loss = lossT.dataSync()[0];
        lossT.dispose();
        Object.values(tensors).forEach((t) => t.dispose());
        sGold.dispose();
        eGold.dispose();
        if (Number.isNaN(loss)) {
          throw new Error("extractor training loss became NaN, aborting");
        }
        if (epoch === 0) firstEpochBatchLosses.push(loss);
        epochLoss += loss;
        nBatches++;
      }
      epochLosses.push(epochLoss / Math.max(nBatches, 1));
    }
    optimizer.dispose();
    return { epochLosses, firstEpochBatchLosses };
  }

  /** Greedy constrained decode of one encoded block. */
  private decode(enc: Encoded): SpanPrediction {
    const { sProbs, eProbs } = tf.tidy(() => {
      const tensors = this.batchTensors([enc], enc.ids.length, Math.max(enc.qIds.length, 1));
      const { s, e } = this.logits(
        tensors.ids, tensors.prev, tensors.next, tensors.feats,
        tensors.qIds, tensors.qMask, tensors.mask,
      );
      return {
        sProbs: s.softmax().squeeze([0]).arraySync() as number[],
        eProbs: e.softmax().squeeze([0]).arraySync() as number[],
      };
    });
    const L = enc.ids.length;
    let best = { score: -1, s: 0, e: 0 };
    for (let s = 0; s < L; s++) {
      if (enc.isMarker[s]) continue;
      const limit = Math.min(L - 1, s + this.config.maxSpanLen - 1);
      for (let e = s; e <= limit; e++) {
        if (enc.isMarker[e] || enc.candidateOf[e] !== enc.candidateOf[s]) break;
        const score = sProbs[s] * eProbs[e];
        if (score > best.score) best = { score, s, e };
      }
    }
    const contextIndex = enc.candidateOf[best.s];
    const localStart = best.s - enc.offsets[contextIndex];
    const localEnd = best.e - enc.offsets[contextIndex];
    return {
      answer: joinSpan(enc.blockTokens, best.s, best.e),
      context_index: contextIndex,
      start: localStart,
      end: localEnd,
      score: Math.min(1, Math.max(0, best.score)),
    };
  }

  predict(question: string, contexts: string[]): SpanPrediction {
    if (contexts.length === 0) {
      throw new Error("contexts must be non-empty");
    }
    return this.decode(encodeBlock(question, contexts, this.config.vocabBuckets));
  }

  /** Exact span accuracy: both endpoints must match the gold indices. */
  evaluate(samples: ExtractorSample[]): number {
    let hits = 0;
    for (const sample of samples) {
      const enc = this.encodeSample(sample);
      const pred = this.decode(enc);
      const blockStart = enc.offsets[pred.context_index] + pred.start;
      const blockEnd = enc.offsets[pred.context_index] + pred.end;
      if (blockStart === sample.start && blockEnd === sample.end) hits++;
    }
    return samples.length ? hits / samples.length : 0;
  }

  toJSON(): object {
    const dump = (v: tf.Variable) => ({
      shape: v.shape,
      data: Array.from(v.dataSync()),
    });
    return {
      version: this.version,
      config: this.config,
      weights: {
        E: dump(this.E), W1: dump(this.W1), b1: dump(this.b1),
        ws: dump(this.ws), we: dump(this.we),
      },
    };
  }

  static fromJSON(raw: any): ExtractorModel {
    const model = new ExtractorModel(raw.config);
    const load = (v: tf.Variable, entry: { shape: number[]; data: number[] }) =>
      v.assign(tf.tensor(entry.data, entry.shape as any) as any);
    load(model.E, raw.weights.E);
    load(model.W1, raw.weights.W1);
    load(model.b1, raw.weights.b1);
    load(model.ws, raw.weights.ws);
    load(model.we, raw.weights.we);
    return model;
  }
}
