#!/usr/bin/env node
/** CLI: cmms-convert convert --in <file> --out <dir> --format csv|bin
 *       --x-var <name> --y-var <name> [--transpose|--no-transpose] */

import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { ConvertError, OutputFormat, convert } from "./convert.js";
import { MatFormatError } from "./mat.js";

const USAGE = `usage: cmms-convert convert --in <file.mat> --out <dir> [options]

options:
  --in <file>        input MATLAB-format archive (required)
  --out <dir>        output directory (required)
  --format csv|bin   output feature format (default: bin)
  --x-var <name>     feature matrix variable (default: fts)
  --y-var <name>     label vector variable (default: labels)
  --transpose        stored matrix is features-by-samples; force transpose
  --no-transpose     stored matrix is samples-by-features; forbid transpose
  --stem <name>      output basename (default: input filename stem)
`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        in: { type: "string" },
        out: { type: "string" },
        format: { type: "string", default: "bin" },
        "x-var": { type: "string" },
        "y-var": { type: "string" },
        transpose: { type: "boolean" },
        "no-transpose": { type: "boolean" },
        stem: { type: "string" },
        help: { type: "boolean" },
      },
    });
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    console.error(USAGE);
    return 2;
  }
  const { values, positionals } = parsed;
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (positionals.length !== 1 || positionals[0] !== "convert") {
    console.error(USAGE);
    return 2;
  }
  if (!values.in || !values.out) {
    console.error("error: --in and --out are required");
    console.error(USAGE);
    return 2;
  }
  if (values.format !== "csv" && values.format !== "bin") {
    console.error(`error: --format must be csv or bin, got ${values.format}`);
    return 2;
  }
  if (values.transpose && values["no-transpose"]) {
    console.error("error: --transpose and --no-transpose are mutually exclusive");
    return 2;
  }
  let transpose: boolean | undefined;
  if (values.transpose) transpose = true;
  if (values["no-transpose"]) transpose = false;

  try {
    const manifest = convert({
      matPath: values.in,
      outDir: values.out,
      format: values.format as OutputFormat,
      xVar: values["x-var"],
      yVar: values["y-var"],
      transpose,
      stem: values.stem,
    });
    console.log(
      `converted ${manifest.source_file}: n=${manifest.n} m=${manifest.m} ` +
        `C=${manifest.c}${manifest.transposed ? " (transposed)" : ""}`
    );
    console.log(
      `wrote ${manifest.outputs.features}, ${manifest.outputs.labels} ` +
        `(+ manifest) to ${values.out}`
    );
    return 0;
  } catch (err) {
    if (err instanceof ConvertError || err instanceof MatFormatError) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    if (err instanceof Error && "code" in err) {
      console.error(`error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
