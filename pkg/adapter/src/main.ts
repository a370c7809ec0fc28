#!/usr/bin/env node
/**
 * Reference FSS adapter: wire protocol v1 over stdin/stdout.
 *
 * Frames are newline-delimited UTF-8 JSON, one request in flight at a time:
 *   -> {"type":"hello","version":1}
 *   <- {"type":"hello","version":1,"name":"adapter-ref/<mode>"}
 *   -> {"type":"predict","id":N,"query":{"png_b64":...},
 *       "support":[{"image":{"png_b64":...},"mask":{"png_b64":...}},...]}
 *   <- {"type":"result","id":N,"mask":{"png_b64":...}}   (8-bit gray, 0/255)
 *   <- {"type":"error","id":N,"message":"..."}           on failure
 *   -> {"type":"shutdown"}                               exits 0
 *
 * A malformed line yields an error frame with id null and the loop keeps
 * serving. Only protocol frames go to stdout; diagnostics go to stderr.
 *
 * Echo mode returns support[0].mask resampled to the query dimensions with
 * src = floor(dst * srcDim / dstDim). Plugin mode is the extension point:
 * replace `pluginPredict` with a call into a real few-shot segmentation
 * model; everything else (framing, decoding, contract) stays as is.
 */

import { decodeGray, encodeGray, imageSize, GrayImage } from "./codec";
import { binarize, resampleNearest } from "./resample";

const PROTOCOL_VERSION = 1;

interface SupportFrame {
  image: { png_b64: string };
  mask: { png_b64: string };
}

type PredictFn = (query: Buffer, support: { image: Buffer; mask: Buffer }[]) => GrayImage;

function echoPredict(query: Buffer, support: { image: Buffer; mask: Buffer }[]): GrayImage {
  const { width, height } = imageSize(query);
  const mask = decodeGray(support[0].mask);
  return binarize(resampleNearest(mask, width, height));
}

function pluginPredict(): GrayImage {
  // Swap in a real model call here: receive raw rasters, return a mask at
  // query dimensions with pixel values 0 or 255.
  throw new Error("plugin backend not configured");
}

function send(frame: unknown): void {
  process.stdout.write(JSON.stringify(frame) + "\n");
}

function handlePredict(frame: any, predictFn: PredictFn): void {
  const id = frame.id ?? null;
  try {
    const query = Buffer.from(frame.query.png_b64, "base64");
    const support = (frame.support as SupportFrame[]).map((pair) => ({
      image: Buffer.from(pair.image.png_b64, "base64"),
      mask: Buffer.from(pair.mask.png_b64, "base64"),
    }));
    if (support.length === 0) {
      throw new Error("support must be nonempty");
    }
    const mask = predictFn(query, support);
    send({ type: "result", id, mask: { png_b64: encodeGray(mask).toString("base64") } });
  } catch (err) {
    send({ type: "error", id, message: err instanceof Error ? err.message : String(err) });
  }
}

export function serve(mode: "echo" | "plugin"): void {
  const predictFn: PredictFn = mode === "echo" ? echoPredict : pluginPredict;
  const name = `adapter-ref/${mode}`;
  let buffered = "";

  process.stdin.setEncoding("utf8");
  process.stdin.on("data", (chunk: string) => {
    buffered += chunk;
    const lines = buffered.split("\n");
    buffered = lines.pop() ?? "";
    for (const line of lines) {
      if (!line.trim()) {
        continue;
      }
      let frame: any;
      try {
        frame = JSON.parse(line);
      } catch (err) {
        send({ type: "error", id: null, message: `malformed frame: ${err}` });
        continue;
      }
      switch (frame.type) {
        case "hello":
          if (frame.version !== PROTOCOL_VERSION) {
            send({
              type: "error",
              id: null,
              message: `unsupported protocol version ${frame.version}`,
            });
          } else {
            send({ type: "hello", version: PROTOCOL_VERSION, name });
          }
          break;
        case "predict":
          handlePredict(frame, predictFn);
          break;
        case "shutdown":
          process.exit(0);
          break;
        default:
          send({ type: "error", id: frame.id ?? null, message: `unknown frame type ${frame.type}` });
      }
    }
  });
  process.stdin.on("end", () => process.exit(0));
}

function main(): void {
  const args = process.argv.slice(2);
  let mode: "echo" | "plugin" = "echo";
  for (const arg of args) {
    if (arg === "--echo") {
      mode = "echo";
    } else if (arg === "--plugin") {
      mode = "plugin";
    } else {
      process.stderr.write(`adapter-ref: unknown argument ${arg}\n`);
      process.exit(2);
    }
  }
  process.stderr.write(`adapter-ref: serving mode=${mode}\n`);
  serve(mode);
}

if (require.main === module) {
  main();
}
