/** Sub-question rewriter: a pointer decoder over the input tokens.
 *
 * Input is "[ambiguous question] <sep> [entity] <eos>"; the decoder
 * GRU attends over encoded input positions and the output distribution
 * at each step is the attention mass aggregated per surface token
 * (every target token is present in the input by construction of the
 * task). Training is token-level cross-entropy with teacher forcing:
 * the gold prefix feeds each step. Greedy decoding stops at <eos>.
 */

import * as tf from "@tensorflow/tfjs";

import { RewriterSample } from "./data.js";
import { embedRows } from "./tfops.js";
import { Rng } from "./rng.js";
import { bucketOf, tokens } from "./tokenize.js";

export interface RewriterConfig {
  vocabBuckets: number;
  embedDim: number;
  hiddenDim: number;
  posDim: number;
  maxLen: number;
  seed: number;
}

export const REWRITER_DEFAULTS: RewriterConfig = {
  vocabBuckets: 2048,
  embedDim: 32,
  hiddenDim: 64,
  posDim: 16,
  maxLen: 40,
  seed: 11,
};

const SEP = "<sep>";
const EOS = "<eos>";
const BOS = "<bos>";

/** Rewriter-level tokenization splits trailing punctuation into its own
 * token so targets like "Labs?" decompose into copyable pieces. */
export function rewriteTokens(text: string): string[] {
  const out: string[] = [];
  for (const raw of tokens(text)) {
    const m = raw.match(/^(.*?)([?.!,]+)$/);
    if (m && m[1]) {
      out.push(m[1], m[2]);
    } else {
      out.push(raw);
    }
  }
  return out;
}

export function detokenize(toks: string[]): string {
  return toks.join(" ").replace(/ ([?.!,]+)(?=( |$))/g, "$1");
}

interface EncodedPair {
  inputTokens: string[]; // question + <sep> + entity + <eos>
  inputIds: number[];
  flags: number[][]; // per position: [isEntityRegion, isSep, isEos]
  targetTokens: string[]; // rewritten + <eos>
  targetPositions: number[][]; // per step: input positions holding the gold token
  teacherIds: number[]; // <bos> + rewritten (decoder inputs)
}

function corruptEntityIds(pair: EncodedPair, rng: Rng, buckets: number): EncodedPair {
  const remap = new Map<string, number>();
  const sepAt = pair.inputTokens.indexOf(SEP);
  pair.inputTokens.forEach((tok, j) => {
    if (sepAt >= 0 && j > sepAt && tok !== EOS && !/^[?.!,]+$/.test(tok)) {
      if (!remap.has(tok)) remap.set(tok, rng.int(buckets));
    }
  });
  const inputIds = pair.inputTokens.map((tok, j) =>
    remap.has(tok) ? remap.get(tok)! : pair.inputIds[j],
  );
  const teacherTokens = ["<bos>", ...pair.targetTokens.slice(0, -1)];
  const teacherIds = pair.teacherIds.map((id, t) =>
    remap.has(teacherTokens[t]) ? remap.get(teacherTokens[t])! : id,
  );
  return { ...pair, inputIds, teacherIds };
}

function structuralFlags(inputTokens: string[]): number[][] {
  const sepAt = inputTokens.indexOf(SEP);
  return inputTokens.map((tok, j) => [
    sepAt >= 0 && j > sepAt && tok !== EOS ? 1 : 0,
    tok === SEP ? 1 : 0,
    tok === EOS ? 1 : 0,
  ]);
}

function initMatrix(rng: Rng, rows: number, cols: number, scale: number): tf.Tensor2D {
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) data[i] = rng.uniform(-scale, scale);
  return tf.tensor2d(data, [rows, cols]);
}

export interface RewriterTrainStats {
  epochLosses: number[];
  firstEpochBatchLosses: number[];
}

export class RewriterModel {
  readonly config: RewriterConfig;
  version = "rewriter-1";
  private sepId: number;
  private eosId: number;
  private bosId: number;
  private E: tf.Variable<tf.Rank.R2>; // token embeddings [V+3, D]
  private P: tf.Variable<tf.Rank.R2>; // positional embeddings [maxLen, posDim]
  private Wenc: tf.Variable<tf.Rank.R2>; // [D+posDim, H]
  private benc: tf.Variable<tf.Rank.R1>;
  private Wz: tf.Variable<tf.Rank.R2>;
  private Uz: tf.Variable<tf.Rank.R2>;
  private bz: tf.Variable<tf.Rank.R1>;
  private Wr: tf.Variable<tf.Rank.R2>;
  private Ur: tf.Variable<tf.Rank.R2>;
  private br: tf.Variable<tf.Rank.R1>;
  private Wn: tf.Variable<tf.Rank.R2>;
  private Un: tf.Variable<tf.Rank.R2>;
  private bn: tf.Variable<tf.Rank.R1>;
  private Wa: tf.Variable<tf.Rank.R2>; // attention projection [H, H]
  private W0: tf.Variable<tf.Rank.R2>; // initial state [H, H]

  constructor(config: RewriterConfig = REWRITER_DEFAULTS) {
    this.config = config;
    this.sepId = config.vocabBuckets;
    this.eosId = config.vocabBuckets + 1;
    this.bosId = config.vocabBuckets + 2;
    const rng = new Rng(config.seed);
    const { embedDim: D, hiddenDim: H, posDim } = config;
    const xIn = D + H; // decoder input: embedding + attention context
    const g = (rows: number, cols: number) =>
      initMatrix(rng, rows, cols, Math.sqrt(6 / (rows + cols)));
    this.E = tf.variable(initMatrix(rng, config.vocabBuckets + 3, D, 0.08));
    this.P = tf.variable(initMatrix(rng, config.maxLen, posDim, 0.08));
    this.Wenc = tf.variable(g(D + posDim + 3, H));
    this.benc = tf.variable(tf.zeros([H]));
    this.Wz = tf.variable(g(xIn, H));
    this.Uz = tf.variable(g(H, H));
    this.bz = tf.variable(tf.zeros([H]));
    this.Wr = tf.variable(g(xIn, H));
    this.Ur = tf.variable(g(H, H));
    this.br = tf.variable(tf.zeros([H]));
    this.Wn = tf.variable(g(xIn, H));
    this.Un = tf.variable(g(H, H));
    this.bn = tf.variable(tf.zeros([H]));
    this.Wa = tf.variable(g(H, H));
    this.W0 = tf.variable(g(H, H));
  }

  private variables(): tf.Variable[] {
    return [
      this.E, this.P, this.Wenc, this.benc,
      this.Wz, this.Uz, this.bz,
      this.Wr, this.Ur, this.br,
      this.Wn, this.Un, this.bn,
      this.Wa, this.W0,
    ];
  }

  private tokenId(token: string): number {
    if (token === SEP) return this.sepId;
    if (token === EOS) return this.eosId;
    if (token === BOS) return this.bosId;
    return bucketOf(token, this.config.vocabBuckets);
  }

  inputTokensFor(ambiguous: string, entity: string): string[] {
    return [...rewriteTokens(ambiguous), SEP, ...rewriteTokens(entity), EOS];
  }

  private encodePair(sample: RewriterSample): EncodedPair | null {
    const inputTokens = this.inputTokensFor(sample.ambiguous, sample.entity);
    const targetTokens = [...rewriteTokens(sample.rewritten), EOS];
    if (inputTokens.length > this.config.maxLen || targetTokens.length > this.config.maxLen) {
      return null;
    }
    const targetPositions: number[][] = [];
    for (const gold of targetTokens) {
      const positions: number[] = [];
      inputTokens.forEach((tok, j) => {
        if (tok === gold) positions.push(j);
      });
      if (positions.length === 0) return null; // target token must be copyable
      targetPositions.push(positions);
    }
    const teacherIds = [BOS, ...rewriteTokens(sample.rewritten)].map((t) => this.tokenId(t));
    return {
      inputTokens,
      inputIds: inputTokens.map((t) => this.tokenId(t)),
      flags: structuralFlags(inputTokens),
      targetTokens,
      targetPositions,
      teacherIds,
    };
  }

  /** Encoder states for a padded batch: [B, L, H]. */
  private encode(inputIds: tf.Tensor2D, flags: tf.Tensor3D, L: number): tf.Tensor3D {
    const [B] = [inputIds.shape[0]];
    const emb = embedRows(this.E, inputIds.flatten()).reshape([B, L, -1]);
    const pos = this.P.slice([0, 0], [L, this.config.posDim]).expandDims(0).tile([B, 1, 1]);
    const x = tf.concat([emb, pos, flags], 2);
    return x
      .reshape([B * L, -1])
      .matMul(this.Wenc)
      .add(this.benc)
      .tanh()
      .reshape([B, L, this.config.hiddenDim]) as tf.Tensor3D;
  }

  private gruStep(x: tf.Tensor2D, h: tf.Tensor2D): tf.Tensor2D {
    const z = x.matMul(this.Wz).add(h.matMul(this.Uz)).add(this.bz).sigmoid();
    const r = x.matMul(this.Wr).add(h.matMul(this.Ur)).add(this.br).sigmoid();
    const n = x.matMul(this.Wn).add(r.mul(h).matMul(this.Un)).add(this.bn).tanh();
    return tf.onesLike(z).sub(z).mul(n).add(z.mul(h)) as tf.Tensor2D;
  }

  /** Attention over encoder states; returns (weights [B,L], context [B,H]). */
  private attend(
    states: tf.Tensor3D,
    h: tf.Tensor2D,
    mask: tf.Tensor2D,
  ): { alpha: tf.Tensor2D; context: tf.Tensor2D } {
    const query = h.matMul(this.Wa); // [B,H]
    const scores = states.matMul(query.expandDims(2)).squeeze([2]) as tf.Tensor2D; // [B,L]
    const masked = scores.add(mask.sub(1).mul(1e9)) as tf.Tensor2D;
    const alpha = masked.softmax() as tf.Tensor2D;
    const context = alpha.expandDims(1).matMul(states).squeeze([1]) as tf.Tensor2D; // [B,H]
    return { alpha, context };
  }

  train(
    samples: RewriterSample[],
    epochs: number,
    batchSize = 64,
    learningRate = 0.01,
  ): RewriterTrainStats {
    const originals = samples
      .map((s) => this.encodePair(s))
      .filter((e): e is EncodedPair => e !== null);
    if (originals.length === 0) {
      throw new Error("no trainable rewriter samples (targets must be copyable)");
    }
    // 1:1 variants with entity tokens remapped to random buckets: the
    // decoder must learn to copy the entity region by structure, not by
    // token identity, so unseen entities rewrite correctly
    const augRng = new Rng(this.config.seed + 9000);
    const encoded = [
      ...originals,
      ...originals.map((e) => corruptEntityIds(e, augRng, this.config.vocabBuckets)),
    ];
    const optimizer = tf.train.adam(learningRate);
    const epochLosses: number[] = [];
    const firstEpochBatchLosses: number[] = [];
    const order = encoded.map((_, i) => i);
    for (let epoch = 0; epoch < epochs; epoch++) {
      new Rng(this.config.seed + 2000 + epoch).shuffle(order);
      let epochLoss = 0;
      let nBatches = 0;
      for (let at = 0; at < order.length; at += batchSize) {
        const batch = order.slice(at, at + batchSize).map((i) => encoded[i]);
        const loss = this.trainBatch(batch, optimizer);
        if (Number.isNaN(loss)) {
          throw new Error("rewriter training loss became NaN, aborting");
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

  private trainBatch(batch: EncodedPair[], optimizer: tf.Optimizer): number {
    const B = batch.length;
    const L = Math.max(...batch.map((b) => b.inputIds.length));
    const T = Math.max(...batch.map((b) => b.targetTokens.length));
    const inputRows = batch.map((b) => {
      const row = [...b.inputIds];
      while (row.length < L) row.push(this.eosId);
      return row;
    });
    const maskRows = batch.map((b) => {
      const row = new Array(L).fill(0);
      for (let i = 0; i < b.inputIds.length; i++) row[i] = 1;
      return row;
    });
    const teacherRows = batch.map((b) => {
      const row = [...b.teacherIds];
      while (row.length < T) row.push(this.eosId);
      return row;
    });
    // per step: 1 where the input position carries the gold token
    const matchPerStep: tf.Tensor2D[] = [];
    const stepMaskCols: number[][] = [];
    for (let t = 0; t < T; t++) {
      const rows = batch.map((b) => {
        const row = new Array(L).fill(0);
        if (t < b.targetPositions.length) {
          for (const j of b.targetPositions[t]) row[j] = 1;
        }
        return row;
      });
      matchPerStep.push(tf.tensor2d(rows, [B, L]));
      stepMaskCols.push(batch.map((b) => (t < b.targetTokens.length ? 1 : 0)));
    }
    const inputIds = tf.tensor2d(inputRows, [B, L], "int32");
    const flagRows = batch.map((b) => {
      const rows = b.flags.map((f) => [...f]);
      while (rows.length < L) rows.push([0, 0, 0]);
      return rows;
    });
    const flags = tf.tensor3d(flagRows, [B, L, 3]);
    const mask = tf.tensor2d(maskRows, [B, L]);
    const teacher = tf.tensor2d(teacherRows, [B, T], "int32");
    const stepMask = tf.tensor2d(stepMaskCols, [T, B]);

    const lossT = optimizer.minimize(
      () => {
        const states = this.encode(inputIds, flags, L);
        const meanState = states.mul(mask.expandDims(2)).sum(1)
          .div(mask.sum(1, true)) as tf.Tensor2D;
        let h = meanState.matMul(this.W0).tanh() as tf.Tensor2D;
        let context = tf.zeros([B, this.config.hiddenDim]) as tf.Tensor2D;
        const stepLosses: tf.Tensor[] = [];
        for (let t = 0; t < T; t++) {
          const prevIds = teacher.slice([0, t], [B, 1]).flatten();
          const prevEmb = embedRows(this.E, prevIds as tf.Tensor1D);
          const x = tf.concat([prevEmb, context], 1) as tf.Tensor2D;
          h = this.gruStep(x, h);
          const attn = this.attend(states, h, mask);
          context = attn.context;
          const pGold = attn.alpha.mul(matchPerStep[t]).sum(1); // [B]
          const nll = pGold.add(1e-9).log().neg().mul(stepMask.slice([t, 0], [1, B]).flatten());
          stepLosses.push(nll);
        }
        const total = tf.stack(stepLosses).sum();
        const denom = stepMask.sum();
        return total.div(denom) as tf.Scalar;
      },
      true,
      this.variables(),
    ) as tf.Scalar;
    const loss = lossT.dataSync()[0];
    lossT.dispose();
    inputIds.dispose();
    flags.dispose();
    mask.dispose();
    teacher.dispose();
    stepMask.dispose();
    matchPerStep.forEach((t) => t.dispose());
    return loss;
  }

  /** Greedy decode; ties in attention resolve to the earliest position. */
  rewrite(ambiguous: string, entity: string): string {
    const inputTokens = this.inputTokensFor(ambiguous, entity).slice(0, this.config.maxLen);
    const L = inputTokens.length;
    const inputIds = tf.tensor2d([inputTokens.map((t) => this.tokenId(t))], [1, L], "int32");
    const flags = tf.tensor3d([structuralFlags(inputTokens)], [1, L, 3]);
    const mask = tf.ones([1, L]) as tf.Tensor2D;
    const out: string[] = [];
    tf.tidy(() => {
      const states = this.encode(inputIds, flags, L);
      let h = states.mean(1).matMul(this.W0).tanh() as tf.Tensor2D;
      let context = tf.zeros([1, this.config.hiddenDim]) as tf.Tensor2D;
      let prevId = this.bosId;
      for (let t = 0; t < this.config.maxLen; t++) {
        const prevEmb = tf.gather(this.E, tf.tensor1d([prevId], "int32")) as tf.Tensor2D;
        const x = tf.concat([prevEmb, context], 1) as tf.Tensor2D;
        h = this.gruStep(x, h);
        const attn = this.attend(states, h, mask);
        context = attn.context;
        const weights = attn.alpha.dataSync();
        let bestJ = 0;
        for (let j = 1; j < L; j++) {
          if (weights[j] > weights[bestJ]) bestJ = j;
        }
        const token = inputTokens[bestJ];
        if (token === EOS) break;
        out.push(token === SEP ? "" : token);
        prevId = this.tokenId(token);
      }
    });
    inputIds.dispose();
    flags.dispose();
    mask.dispose();
    return detokenize(out.filter((t) => t.length > 0));
  }

  /** Fraction of samples whose greedy decode equals the gold rewrite. */
  evaluate(samples: RewriterSample[]): number {
    let hits = 0;
    for (const sample of samples) {
      if (this.rewrite(sample.ambiguous, sample.entity) === sample.rewritten) hits++;
    }
    return samples.length ? hits / samples.length : 0;
  }

  toJSON(): object {
    const names = [
      "E", "P", "Wenc", "benc", "Wz", "Uz", "bz", "Wr", "Ur", "br",
      "Wn", "Un", "bn", "Wa", "W0",
    ] as const;
    const weights: Record<string, { shape: number[]; data: number[] }> = {};
    names.forEach((name, i) => {
      const v = this.variables()[i];
      weights[name] = { shape: v.shape as number[], data: Array.from(v.dataSync()) };
    });
    return { version: this.version, config: this.config, weights };
  }

  static fromJSON(raw: any): RewriterModel {
    const model = new RewriterModel(raw.config);
    model.variables().forEach((v, i) => {
      const names = [
        "E", "P", "Wenc", "benc", "Wz", "Uz", "bz", "Wr", "Ur", "br",
        "Wn", "Un", "bn", "Wa", "W0",
      ];
      const entry = raw.weights[names[i]];
      v.assign(tf.tensor(entry.data, entry.shape) as any);
    });
    return model;
  }
}
