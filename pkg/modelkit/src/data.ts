/** Training-data synthesis: extractor span samples and rewriter pairs.
 *
 * Candidates serialize exactly as the engine presents them at inference
 * ("Q: {q} A: {a}", joined with single spaces); span indices live in
 * that serialized block and every kept sample is re-validated by
 * slicing. Samples that fail validation are discarded and counted.
 */

import * as fs from "node:fs";

import {
  CandidateQA,
  ChatFn,
  RawExtractorSample,
  RawRewriterSample,
  generatorPrompt,
} from "./genchat.js";
import { Rng } from "./rng.js";
import { fnv1a, joinSpan, tokens } from "./tokenize.js";
import { Passage } from "./world.js";

export interface ExtractorSample {
  subQuestion: string;
  candidates: CandidateQA[];
  targetSpan: string;
  start: number; // token index in the serialized candidate block
  end: number;
}

export interface RewriterSample {
  ambiguous: string;
  entity: string;
  rewritten: string;
  perturbed: boolean;
}

export function candidateText(qa: { question: string; answer: string }): string {
  return `Q: ${qa.question} A: ${qa.answer}`;
}

export function serializeBlock(candidates: { question: string; answer: string }[]): {
  block: string;
  offsets: number[];
} {
  const texts = candidates.map(candidateText);
  const offsets: number[] = [];
  let cursor = 0;
  for (const text of texts) {
    offsets.push(cursor);
    cursor += tokens(text).length;
  }
  return { block: texts.join(" "), offsets };
}

/** Locate the target span inside the gold candidate's answer segment.
 * Returns block-token indices, or null when the span is not a verbatim
 * contiguous token run. */
export function locateSpan(
  candidates: CandidateQA[],
  targetSpan: string,
): { start: number; end: number } | null {
  const goldIndex = candidates.findIndex((c) => c.label === "gold");
  if (goldIndex < 0) return null;
  const { offsets } = serializeBlock(candidates);
  const goldTokens = tokens(candidateText(candidates[goldIndex]));
  const targetTokens = tokens(targetSpan);
  if (targetTokens.length === 0) return null;
  const markerIndex = goldTokens.lastIndexOf("A:");
  const searchFrom = markerIndex >= 0 ? markerIndex + 1 : 0;
  for (let i = searchFrom; i + targetTokens.length <= goldTokens.length; i++) {
    let hit = true;
    for (let j = 0; j < targetTokens.length; j++) {
      if (goldTokens[i + j] !== targetTokens[j]) {
        hit = false;
        break;
      }
    }
    if (hit) {
      const start = offsets[goldIndex] + i;
      return { start, end: start + targetTokens.length - 1 };
    }
  }
  return null;
}

export function validateSample(sample: ExtractorSample): boolean {
  const golds = sample.candidates.filter((c) => c.label === "gold");
  if (golds.length !== 1) return false;
  const { block } = serializeBlock(sample.candidates);
  return joinSpan(tokens(block), sample.start, sample.end) === sample.targetSpan;
}

async function generateFor(
  passage: Passage,
  chat: ChatFn,
): Promise<{ extractor: RawExtractorSample[]; rewriter: RawRewriterSample[] }> {
  const raw = await chat(generatorPrompt(passage.text), 0);
  const fenced = raw.match(/```(?:json)?\s*\n([\s\S]*?)```/);
  const parsed = JSON.parse(fenced ? fenced[1] : raw) as {
    extractor_samples?: RawExtractorSample[];
    rewriter_samples?: RawRewriterSample[];
  };
  return {
    extractor: parsed.extractor_samples ?? [],
    rewriter: parsed.rewriter_samples ?? [],
  };
}

export interface SynthResult<T> {
  samples: T[];
  discarded: number;
}

export async function synthExtractorData(
  passages: Passage[],
  chat: ChatFn,
  n: number,
): Promise<SynthResult<ExtractorSample>> {
  const samples: ExtractorSample[] = [];
  let discarded = 0;
  for (const passage of passages) {
    if (samples.length >= n) break;
    const { extractor } = await generateFor(passage, chat);
    for (const raw of extractor) {
      if (samples.length >= n) break;
      const span = locateSpan(raw.candidates, raw.target_span);
      if (!span) {
        discarded++;
        continue;
      }
      const sample: ExtractorSample = {
        subQuestion: raw.sub_question,
        candidates: raw.candidates,
        targetSpan: raw.target_span,
        start: span.start,
        end: span.end,
      };
      if (!validateSample(sample)) {
        discarded++;
        continue;
      }
      samples.push(sample);
    }
  }
  return { samples, discarded };
}

const PRONOUN_RE = /\b(he|she|it|they|him|her|them|his|its|their)\b/i;

function maskEntity(rewritten: string, entity: string): string | null {
  if (!rewritten.includes(entity)) return null;
  const pronoun = /^[A-Z][a-z]+ [A-Z][a-z]+$/.test(entity)
    ? fnv1a(entity) % 2
      ? "he"
      : "she"
    : "it";
  const masked = rewritten.replace(entity, pronoun);
  return masked.includes(entity) ? null : masked;
}

export async function synthRewriterData(
  passages: Passage[],
  chat: ChatFn,
  n: number,
): Promise<SynthResult<RewriterSample>> {
  const base: RewriterSample[] = [];
  let discarded = 0;
  const wantBase = Math.ceil(n / 2);
  for (const passage of passages) {
    if (base.length >= wantBase) break;
    const { rewriter } = await generateFor(passage, chat);
    for (const raw of rewriter) {
      if (base.length >= wantBase) break;
      if (!raw.rewritten.includes(raw.entity) || raw.ambiguous.includes(raw.entity)) {
        discarded++;
        continue;
      }
      base.push({ ...raw, perturbed: false });
    }
  }
  // perturbed variants at a 1:1 ratio: mask the entity out of the
  // grounded question and insert a pronoun
  const samples: RewriterSample[] = [];
  for (const item of base) {
    if (samples.length >= n) break;
    samples.push(item);
    if (samples.length >= n) break;
    const masked = maskEntity(item.rewritten, item.entity);
    if (masked === null || !PRONOUN_RE.test(masked)) {
      discarded++;
      continue;
    }
    samples.push({
      ambiguous: masked,
      entity: item.entity,
      rewritten: item.rewritten,
      perturbed: true,
    });
  }
  return { samples, discarded };
}

export function writeExtractorFile(path: string, samples: ExtractorSample[]): void {
  const lines = [JSON.stringify({ version: "1", kind: "extractor", n: samples.length })];
  for (const s of samples) {
    lines.push(
      JSON.stringify({
        sub_question: s.subQuestion,
        candidates: s.candidates,
        target_span: s.targetSpan,
        start: s.start,
        end: s.end,
      }),
    );
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function readExtractorFile(path: string): ExtractorSample[] {
  const lines = fs.readFileSync(path, "utf-8").split("\n").filter((l) => l.trim());
  const header = JSON.parse(lines[0]);
  if (header.version !== "1" || header.kind !== "extractor") {
    throw new Error(`${path}: not an extractor samples file`);
  }
  return lines.slice(1).map((line) => {
    const raw = JSON.parse(line);
    return {
      subQuestion: raw.sub_question,
      candidates: raw.candidates,
      targetSpan: raw.target_span,
      start: raw.start,
      end: raw.end,
    };
  });
}

export function writeRewriterFile(path: string, samples: RewriterSample[]): void {
  const lines = [JSON.stringify({ version: "1", kind: "rewriter", n: samples.length })];
  for (const s of samples) {
    lines.push(JSON.stringify(s));
  }
  fs.writeFileSync(path, lines.join("\n") + "\n", "utf-8");
}

export function readRewriterFile(path: string): RewriterSample[] {
  const lines = fs.readFileSync(path, "utf-8").split("\n").filter((l) => l.trim());
  const header = JSON.parse(lines[0]);
  if (header.version !== "1" || header.kind !== "rewriter") {
    throw new Error(`${path}: not a rewriter samples file`);
  }
  return lines.slice(1).map((line) => JSON.parse(line) as RewriterSample);
}

/** Deterministic train/held-out split on a seeded shuffle. */
export function splitSamples<T>(samples: T[], holdoutFraction: number, seed: number): {
  train: T[];
  holdout: T[];
} {
  const order = new Rng(seed).shuffle(samples.map((_, i) => i));
  const nHoldout = Math.max(1, Math.floor(samples.length * holdoutFraction));
  const holdoutIdx = new Set(order.slice(0, nHoldout));
  const train: T[] = [];
  const holdout: T[] = [];
  samples.forEach((s, i) => (holdoutIdx.has(i) ? holdout : train).push(s));
  return { train, holdout };
}
