/** Sidecar HTTP server.
 *
 * Wire contract consumed by the engine:
 *   POST /extract  {question, contexts[]} -> {answer, context_index, start, end, score}
 *   POST /rewrite  {question, entities[]} -> {rewritten}
 *   POST /entities {text}                 -> {mentions[]}
 *   POST /embed    {texts[]}              -> {embeddings[[]]}
 *   POST /v1/embeddings {model?, input[]} -> {data: [{embedding}]}  (OpenAI shape)
 *   GET  /healthz                          -> {status, models}
 *
 * Refuses to start when a model artifact is missing.
 */

import * as fs from "node:fs";
import * as http from "node:http";
import * as path from "node:path";

import { HashedEmbedder } from "./embed.js";
import { annotateEntities } from "./entities.js";
import { ExtractorModel } from "./extractor_model.js";
import { RewriterModel } from "./rewriter_model.js";

export interface ServerConfig {
  artifactsDir: string;
  embedDim?: number;
  embedSeed?: number;
}

export interface LoadedModels {
  extractor: ExtractorModel;
  rewriter: RewriterModel;
  embedder: HashedEmbedder;
}

export function loadModels(config: ServerConfig): LoadedModels {
  const extractorPath = path.join(config.artifactsDir, "extractor.json");
  const rewriterPath = path.join(config.artifactsDir, "rewriter.json");
  for (const p of [extractorPath, rewriterPath]) {
    if (!fs.existsSync(p)) {
      throw new Error(`missing model artifact: ${p} (train it first)`);
    }
  }
  return {
    extractor: ExtractorModel.fromJSON(JSON.parse(fs.readFileSync(extractorPath, "utf-8"))),
    rewriter: RewriterModel.fromJSON(JSON.parse(fs.readFileSync(rewriterPath, "utf-8"))),
    embedder: new HashedEmbedder(config.embedDim ?? 64, config.embedSeed ?? 0),
  };
}

function readBody(req: http.IncomingMessage): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf-8")));
    req.on("error", reject);
  });
}

function send(res: http.ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, {
    "Content-Type": "application/json; charset=utf-8",
    "Content-Length": Buffer.byteLength(body),
  });
  res.end(body);
}

/** Rewrite with the grounding guarantee: if the decoded question drops
 * any entity, fall back to appending the missing ones verbatim. */
export function groundedRewrite(
  rewriter: RewriterModel,
  question: string,
  entities: string[],
): string {
  if (entities.length === 0) return question;
  let rewritten = rewriter.rewrite(question, entities[0]);
  if (!rewritten) rewritten = question;
  for (const entity of entities) {
    if (!rewritten.includes(entity)) {
      rewritten = `${rewritten} ${entity}`;
    }
  }
  return rewritten;
}

export function createServer(models: LoadedModels): http.Server {
  return http.createServer(async (req, res) => {
    try {
      if (req.method === "GET" && req.url === "/healthz") {
        send(res, 200, {
          status: "ok",
          models: {
            extractor: models.extractor.version,
            rewriter: models.rewriter.version,
            embedder: `hashed-${models.embedder.dim}`,
          },
        });
        return;
      }
      if (req.method !== "POST") {
        send(res, 404, { error: "unknown route" });
        return;
      }
      const body = JSON.parse((await readBody(req)) || "{}");
      switch (req.url) {
        case "/extract": {
          const { question, contexts } = body;
          if (typeof question !== "string" || !Array.isArray(contexts) || contexts.length === 0) {
            send(res, 400, { error: "need question and non-empty contexts[]" });
            return;
          }
          send(res, 200, models.extractor.predict(question, contexts));
          return;
        }
        case "/rewrite": {
          const { question, entities } = body;
          if (typeof question !== "string" || question.length === 0 || !Array.isArray(entities)) {
            send(res, 400, { error: "need question and entities[]" });
            return;
          }
          send(res, 200, { rewritten: groundedRewrite(models.rewriter, question, entities) });
          return;
        }
        case "/entities": {
          if (typeof body.text !== "string") {
            send(res, 400, { error: "need text" });
            return;
          }
          send(res, 200, { mentions: annotateEntities(body.text) });
          return;
        }
        case "/embed": {
          if (!Array.isArray(body.texts)) {
            send(res, 400, { error: "need texts[]" });
            return;
          }
          send(res, 200, { embeddings: models.embedder.embed(body.texts) });
          return;
        }
        case "/v1/embeddings": {
          const input: string[] = Array.isArray(body.input) ? body.input : [body.input];
          const embeddings = models.embedder.embed(input);
          send(res, 200, {
            object: "list",
            data: embeddings.map((embedding, index) => ({
              object: "embedding",
              index,
              embedding,
            })),
            model: body.model ?? "hashed-bow",
          });
          return;
        }
        default:
          send(res, 404, { error: "unknown route" });
      }
    } catch (err) {
      send(res, 500, { error: String(err instanceof Error ? err.message : err) });
    }
  });
}

export function serveModels(config: ServerConfig, port: number): Promise<http.Server> {
  const models = loadModels(config);
  const server = createServer(models);
  return new Promise((resolve) => {
    server.listen(port, "127.0.0.1", () => resolve(server));
  });
}
