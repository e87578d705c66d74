/** modelkit CLI: synthesize training data, train both models, serve.
 *
 *   node dist/cli.js synth-extractor --corpus F --out samples.jsonl --n 2200
 *   node dist/cli.js synth-rewriter  --corpus F --out samples.jsonl --n 1200
 *   node dist/cli.js train-extractor --samples F --out artifacts/ [--epochs 6]
 *   node dist/cli.js train-rewriter  --samples F --out artifacts/ [--epochs 30]
 *   node dist/cli.js synth-all       --out data/ [--passages 700]
 *   node dist/cli.js train-all       --data data/ --out artifacts/
 *   node dist/cli.js serve           --artifacts artifacts/ [--port 8601]
 *
 * Synthesis uses the deterministic template generator unless
 * --chat-base-url/--chat-model point at an OpenAI-compatible endpoint.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { initBackend } from "./backend.js";
import {
  readExtractorFile,
  readRewriterFile,
  splitSamples,
  synthExtractorData,
  synthRewriterData,
  writeExtractorFile,
  writeRewriterFile,
} from "./data.js";
import { ChatFn, httpChat, templateGenerator } from "./genchat.js";
import { ExtractorModel } from "./extractor_model.js";
import { RewriterModel } from "./rewriter_model.js";
import { serveModels } from "./server.js";
import { EIFFEL_PASSAGE, makeWorld, Passage } from "./world.js";

function parseFlags(argv: string[]): Record<string, string> {
  const flags: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith("--")) {
      flags[argv[i].slice(2)] = argv[i + 1] ?? "";
      i++;
    }
  }
  return flags;
}

function loadCorpus(p: string): Passage[] {
  return fs
    .readFileSync(p, "utf-8")
    .split("\n")
    .filter((l) => l.trim())
    .map((l) => JSON.parse(l) as Passage);
}

function chatFrom(flags: Record<string, string>): ChatFn {
  if (flags["chat-base-url"]) {
    return httpChat(flags["chat-base-url"], flags["chat-model"] ?? "gpt-4");
  }
  return templateGenerator();
}

function corpusFrom(flags: Record<string, string>): Passage[] {
  if (flags.corpus) return loadCorpus(flags.corpus);
  const passages: Passage[] = makeWorld(Number(flags.seed ?? 0), Number(flags.passages ?? 700));
  passages.unshift(EIFFEL_PASSAGE);
  return passages;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  console.error(`tfjs backend: ${await initBackend()}`);
  const flags = parseFlags(rest);
  switch (command) {
    case "synth-extractor": {
      const { samples, discarded } = await synthExtractorData(
        corpusFrom(flags), chatFrom(flags), Number(flags.n ?? 2200),
      );
      writeExtractorFile(flags.out, samples);
      console.log(JSON.stringify({ out: flags.out, samples: samples.length, discarded }));
      return 0;
    }
    case "synth-rewriter": {
      const { samples, discarded } = await synthRewriterData(
        corpusFrom(flags), chatFrom(flags), Number(flags.n ?? 1200),
      );
      writeRewriterFile(flags.out, samples);
      console.log(JSON.stringify({ out: flags.out, samples: samples.length, discarded }));
      return 0;
    }
    case "synth-all": {
      const outDir = flags.out ?? "data";
      fs.mkdirSync(outDir, { recursive: true });
      const corpus = corpusFrom(flags);
      const chat = chatFrom(flags);
      const extractor = await synthExtractorData(corpus, chat, Number(flags.n ?? 2200));
      writeExtractorFile(path.join(outDir, "extractor_samples.jsonl"), extractor.samples);
      const rewriter = await synthRewriterData(corpus, chat, Number(flags["n-rewriter"] ?? 1200));
      writeRewriterFile(path.join(outDir, "rewriter_samples.jsonl"), rewriter.samples);
      console.log(
        JSON.stringify({
          out: outDir,
          extractor: { samples: extractor.samples.length, discarded: extractor.discarded },
          rewriter: { samples: rewriter.samples.length, discarded: rewriter.discarded },
        }),
      );
      return 0;
    }
    case "train-extractor": {
      const samples = readExtractorFile(flags.samples);
      if (samples.length < 100) {
        console.error(`need at least 100 samples, got ${samples.length}`);
        return 1;
      }
      const { train, holdout } = splitSamples(samples, 0.15, Number(flags.seed ?? 42));
      const model = new ExtractorModel();
      const stats = model.train(train, Number(flags.epochs ?? 6));
      const accuracy = model.evaluate(holdout);
      fs.mkdirSync(flags.out, { recursive: true });
      fs.writeFileSync(
        path.join(flags.out, "extractor.json"), JSON.stringify(model.toJSON()), "utf-8",
      );
      console.log(
        JSON.stringify({
          artifact: path.join(flags.out, "extractor.json"),
          train: train.length,
          holdout: holdout.length,
          holdout_span_accuracy: accuracy,
          epoch_losses: stats.epochLosses,
        }),
      );
      return 0;
    }
    case "train-rewriter": {
      const samples = readRewriterFile(flags.samples);
      if (samples.length < 100) {
        console.error(`need at least 100 samples, got ${samples.length}`);
        return 1;
      }
      const { train, holdout } = splitSamples(samples, 0.15, Number(flags.seed ?? 42));
      const model = new RewriterModel();
      const stats = model.train(train, Number(flags.epochs ?? 25));
      const exact = model.evaluate(holdout);
      fs.mkdirSync(flags.out, { recursive: true });
      fs.writeFileSync(
        path.join(flags.out, "rewriter.json"), JSON.stringify(model.toJSON()), "utf-8",
      );
      console.log(
        JSON.stringify({
          artifact: path.join(flags.out, "rewriter.json"),
          train: train.length,
          holdout: holdout.length,
          holdout_exact_rewrite: exact,
          epoch_losses: stats.epochLosses,
        }),
      );
      return 0;
    }
    case "train-all": {
      const dataDir = flags.data ?? "data";
      const out = flags.out ?? "artifacts";
      const code1 = await run([
        "train-extractor", "--samples", path.join(dataDir, "extractor_samples.jsonl"),
        "--out", out, ...(flags.epochs ? ["--epochs", flags.epochs] : []),
      ]);
      if (code1 !== 0) return code1;
      return run([
        "train-rewriter", "--samples", path.join(dataDir, "rewriter_samples.jsonl"),
        "--out", out,
      ]);
    }
    case "serve": {
      const port = Number(flags.port ?? 8601);
      const server = await serveModels({ artifactsDir: flags.artifacts ?? "artifacts" }, port);
      const address = server.address();
      console.log(JSON.stringify({ listening: address }));
      return await new Promise<number>(() => undefined); // run until killed
    }
    default:
      console.error(
        "usage: cli.js <synth-extractor|synth-rewriter|synth-all|train-extractor|train-rewriter|train-all|serve> [--flags]",
      );
      return 2;
  }
}

async function run(argv: string[]): Promise<number> {
  const saved = process.argv;
  process.argv = [saved[0], saved[1], ...argv];
  try {
    return await main();
  } finally {
    process.argv = saved;
  }
}

main().then(
  (code) => {
    if (code !== 0) process.exitCode = code;
  },
  (err) => {
    console.error(String(err instanceof Error ? err.stack : err));
    process.exitCode = 1;
  },
);
