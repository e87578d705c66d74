/** Whitespace tokenization and hashed vocabulary buckets shared by the
 * models. Spans are expressed over whitespace tokens and rejoined with
 * single spaces, matching the engine's span convention. */

export function tokens(text: string): string[] {
  return text.split(/\s+/).filter((t) => t.length > 0);
}

export function normToken(token: string): string {
  return token.replace(/^\W+|\W+$/g, "").toLowerCase();
}

export function lexTokens(text: string): string[] {
  return tokens(text)
    .map(normToken)
    .filter((t) => t.length > 0);
}

/** FNV-1a 32-bit hash: stable across runs and platforms. */
export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

export function bucketOf(token: string, buckets: number): number {
  return fnv1a(normToken(token) || token) % buckets;
}

export function joinSpan(toks: string[], start: number, end: number): string {
  return toks.slice(start, end + 1).join(" ");
}
