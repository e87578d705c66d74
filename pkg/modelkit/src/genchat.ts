/** Generator chat used for training-data synthesis.
 *
 * The interface is a plain chat function; tests and offline synthesis
 * use TemplateGenerator, a deterministic stand-in that recovers the
 * facts from the patterned passages and emits the sample JSON an LLM
 * would be asked for. An OpenAI-compatible HTTP chat is provided for
 * real generators. Synthesis requires temperature 0.
 */

import { Rng } from "./rng.js";
import { fnv1a } from "./tokenize.js";
import { Fact } from "./world.js";

export interface ChatMessage {
  role: "system" | "user" | "assistant";
  content: string;
}

export type ChatFn = (messages: ChatMessage[], temperature: number) => Promise<string>;

export const GENERATOR_PROMPT = `Training sample generation system for extractive QA and question rewriting.

From the passage below, produce a single JSON object with two keys:
- "extractor_samples": array of {"sub_question", "candidates": [{"question", "answer", "label"}], "target_span"}. Exactly one candidate is labeled "gold", the others "distractor"; target_span must be a contiguous token span of the gold candidate's answer that answers the sub-question.
- "rewriter_samples": array of {"ambiguous", "entity", "rewritten"}. The ambiguous question must not contain the entity; the rewritten question must contain it verbatim.

Passage:
{passage}
`;

export function generatorPrompt(passageText: string): ChatMessage[] {
  return [{ role: "user", content: GENERATOR_PROMPT.replace("{passage}", passageText) }];
}

interface QA {
  question: string;
  answer: string;
}

export interface CandidateQA extends QA {
  label: "gold" | "distractor";
}

export interface RawExtractorSample {
  sub_question: string;
  candidates: CandidateQA[];
  target_span: string;
}

export interface RawRewriterSample {
  ambiguous: string;
  entity: string;
  rewritten: string;
}

/** Generic distractor bank: plausible retrieval noise from outside the
 * passage. The Eiffel fixtures live here on purpose. */
export const DISTRACTOR_BANK: QA[] = [
  { question: "What is the height of the Eiffel Tower?", answer: "324 meters" },
  { question: "Which city hosts the Colosseum?", answer: "Rome, Italy" },
  { question: "Who wrote the opera Maridal?", answer: "Greta Olavsen" },
  { question: "When did the Harbor Exposition open?", answer: "1893" },
  { question: "How long is the Verla River?", answer: "430 kilometers" },
  { question: "Who restored the Brassworks Clock?", answer: "Juno Berental" },
];

const SENTENCE_PATTERNS: {
  re: RegExp;
  facts: (m: RegExpMatchArray) => Fact[];
}[] = [
  {
    re: /^(.+) is a (\d{4}) film directed by (.+)\.$/,
    facts: (m): Fact[] => [
      { kind: "directed", subject: m[1], sentence: m[0], values: { person: m[3] } },
      { kind: "released", subject: m[1], sentence: m[0], values: { year: m[2] } },
    ],
  },
  {
    re: /^(.+) premiered at the (.+) in (.+)\.$/,
    facts: (m): Fact[] => [
      { kind: "premiered", subject: m[1], sentence: m[0], values: { venue: m[2], city: m[3] } },
    ],
  },
  {
    re: /^(.+) is situated in (.+), (.+)\.$/,
    facts: (m): Fact[] => [
      { kind: "situated", subject: m[1], sentence: m[0], values: { city: m[2], country: m[3] } },
    ],
  },
  {
    re: /^(.+) stands (\d+) meters tall\.$/,
    facts: (m): Fact[] => [
      { kind: "height", subject: m[1], sentence: m[0], values: { height: m[2] } },
    ],
  },
  {
    re: /^(.+) was born in (.+)\.$/,
    facts: (m): Fact[] => [{ kind: "born", subject: m[1], sentence: m[0], values: { city: m[2] } }],
  },
  {
    re: /^(.+) was founded by (.+) in (\d{4})\.$/,
    facts: (m): Fact[] => [
      { kind: "founded", subject: m[1], sentence: m[0], values: { person: m[2], year: m[3] } },
    ],
  },
  {
    re: /^(.+) directed (.+)\.$/,
    facts: (m): Fact[] => [
      { kind: "directed", subject: m[2], sentence: m[0], values: { person: m[1] } },
    ],
  },
];

function lowerSubject(subject: string): string {
  // landmark/company subjects render sentence-initial as "The ..."; the
  // question form keeps the lowercase article
  return subject.startsWith("The ") ? "the " + subject.slice(4) : subject;
}

function parseFacts(text: string): Fact[] {
  const facts: Fact[] = [];
  for (const sentence of text.split(/(?<=\.)\s+/)) {
    for (const pattern of SENTENCE_PATTERNS) {
      const m = sentence.match(pattern.re);
      if (m) {
        facts.push(...pattern.facts(m));
        break;
      }
    }
  }
  return facts;
}

function goldFor(fact: Fact): QA {
  const s = lowerSubject(fact.subject);
  switch (fact.kind) {
    case "directed":
      return { question: `Who directed ${s}?`, answer: fact.values.person };
    case "released":
      return { question: `When was ${s} released?`, answer: fact.values.year };
    case "premiered":
      return {
        question: `Where did ${s} premiere?`,
        answer: `the ${fact.values.venue} in ${fact.values.city}`,
      };
    case "situated":
      return {
        question: `Where is ${s} situated?`,
        answer: `${fact.values.city}, ${fact.values.country}`,
      };
    case "height":
      return { question: `What is the height of ${s}?`, answer: `${fact.values.height} meters` };
    case "born":
      return { question: `Where was ${s} born?`, answer: fact.values.city };
    case "founded":
      return { question: `Who founded ${s}?`, answer: fact.values.person };
  }
}

function extractorPartsFor(
  fact: Fact,
  rng: Rng,
): { sub: string; target: string; gold: QA } {
  const s = lowerSubject(fact.subject);
  switch (fact.kind) {
    case "directed":
      return {
        sub: `Which person directed ${s}?`,
        target: fact.values.person,
        gold: goldFor(fact),
      };
    case "released":
      return {
        sub: `In which year was ${s} released?`,
        target: fact.values.year,
        gold: goldFor(fact),
      };
    case "premiered":
      return rng.next() < 0.5
        ? { sub: `In which city did ${s} premiere?`, target: fact.values.city, gold: goldFor(fact) }
        : { sub: `At which venue did ${s} premiere?`, target: fact.values.venue, gold: goldFor(fact) };
    case "situated":
      return {
        sub: `Which country is ${s} located in?`,
        target: fact.values.country,
        gold: goldFor(fact),
      };
    case "height":
      return {
        sub: `How many meters tall is ${s}?`,
        target: fact.values.height,
        gold: goldFor(fact),
      };
    case "born":
      return { sub: `In which city was ${s} born?`, target: fact.values.city, gold: goldFor(fact) };
    case "founded":
      // the gold pair must carry the facet the sub-question asks about
      return rng.next() < 0.5
        ? {
            sub: `Which person founded ${s}?`,
            target: fact.values.person,
            gold: { question: `Who founded ${s}?`, answer: fact.values.person },
          }
        : {
            sub: `In which year was ${s} founded?`,
            target: fact.values.year,
            gold: { question: `When was ${s} founded?`, answer: fact.values.year },
          };
  }
}

function pronounFor(entity: string): string {
  return /^[A-Z][a-z]+ [A-Z][a-z]+$/.test(entity) ? (fnv1a(entity) % 2 ? "he" : "she") : "it";
}

function rewriterFor(fact: Fact, rng: Rng): RawRewriterSample | null {
  const gold = goldFor(fact);
  const entity = lowerSubject(fact.subject);
  if (!gold.question.includes(entity)) return null;
  const ambiguous = gold.question.replace(entity, pronounFor(fact.subject));
  if (ambiguous.includes(entity)) return null;
  return { ambiguous, entity, rewritten: gold.question };
}

/** Deterministic generator: recovers the passage facts and emits the
 * sample JSON. Seeded per passage content, so re-runs are identical. */
export function templateGenerator(): ChatFn {
  return async (messages: ChatMessage[], temperature: number): Promise<string> => {
    if (temperature !== 0) {
      throw new Error("generator must run at temperature 0");
    }
    const content = messages[messages.length - 1].content;
    const passage = content.split("Passage:\n")[1]?.trim() ?? "";
    const rng = new Rng(fnv1a(passage));
    const facts = parseFacts(passage);
    const golds = facts.map(goldFor);
    const extractor_samples: RawExtractorSample[] = [];
    const rewriter_samples: RawRewriterSample[] = [];
    facts.forEach((fact, i) => {
      const { sub, target, gold } = extractorPartsFor(fact, rng);
      const distractors: QA[] = golds.filter((_, j) => j !== i);
      const bank = rng.shuffle([...DISTRACTOR_BANK]);
      const want = 2 + rng.int(3); // 2..4 distractors
      while (distractors.length < want && bank.length) {
        distractors.push(bank.pop()!);
      }
      const candidates: CandidateQA[] = [
        { ...gold, label: "gold" },
        ...distractors.slice(0, want).map((d) => ({ ...d, label: "distractor" as const })),
      ];
      rng.shuffle(candidates);
      extractor_samples.push({ sub_question: sub, candidates, target_span: target });
      const rewrite = rewriterFor(fact, rng);
      if (rewrite) rewriter_samples.push(rewrite);
    });
    return JSON.stringify({ extractor_samples, rewriter_samples });
  };
}

/** OpenAI-compatible chat for running synthesis against a real model. */
export function httpChat(baseUrl: string, model: string, apiKey?: string): ChatFn {
  const key = apiKey ?? process.env.COMPACTRAG_API_KEY ?? "";
  return async (messages: ChatMessage[], temperature: number): Promise<string> => {
    const response = await fetch(`${baseUrl.replace(/\/$/, "")}/v1/chat/completions`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        ...(key ? { Authorization: `Bearer ${key}` } : {}),
      },
      body: JSON.stringify({ model, messages, temperature }),
    });
    if (!response.ok) {
      throw new Error(`chat completion failed: HTTP ${response.status}`);
    }
    const body = (await response.json()) as { choices: { message: { content: string } }[] };
    return body.choices[0].message.content;
  };
}
