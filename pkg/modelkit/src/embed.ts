/** Hashed bag-of-tokens embedder served at /embed and /v1/embeddings.
 * Each token hashes to a fixed pseudo-random vector; a text embeds to
 * the sum over its tokens, so lexical overlap drives cosine similarity.
 * Deterministic for a fixed (dim, seed). */

import { Rng } from "./rng.js";
import { fnv1a, lexTokens } from "./tokenize.js";

export class HashedEmbedder {
  readonly dim: number;
  readonly seed: number;
  private cache = new Map<string, Float64Array>();

  constructor(dim = 64, seed = 0) {
    this.dim = dim;
    this.seed = seed;
  }

  private tokenVector(token: string): Float64Array {
    let vec = this.cache.get(token);
    if (!vec) {
      const rng = new Rng(fnv1a(`${this.seed}|${token}`));
      vec = new Float64Array(this.dim);
      for (let i = 0; i < this.dim; i++) vec[i] = rng.uniform(-1, 1);
      this.cache.set(token, vec);
    }
    return vec;
  }

  embed(texts: string[]): number[][] {
    return texts.map((text) => {
      if (!text || !text.trim()) {
        throw new Error("cannot embed empty text");
      }
      const toks = lexTokens(text);
      const effective = toks.length ? toks : [text];
      const acc = new Float64Array(this.dim);
      for (const token of effective) {
        const vec = this.tokenVector(token);
        for (let i = 0; i < this.dim; i++) acc[i] += vec[i];
      }
      return Array.from(acc);
    });
  }
}
