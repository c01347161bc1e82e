/**
 * Conversion of a MAT-file feature archive (feature matrix + label vector)
 * into the toolkit's CSV or binary format, with a checksummed manifest.
 */

import { createHash } from "node:crypto";
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import { Matrix, encodeBin, encodeCsv, encodeLabels } from "./formats.js";
import { MatVariable, parseMat } from "./mat.js";

export class ConvertError extends Error {}

export type OutputFormat = "csv" | "bin";

export interface ConvertOptions {
  matPath: string;
  outDir: string;
  format: OutputFormat;
  xVar?: string;
  yVar?: string;
  /** Force (true) or forbid (false) transposing the stored feature matrix;
   * undefined = auto-detect from the label-vector length. */
  transpose?: boolean;
  /** Basename for the output files; defaults to the input filename stem. */
  stem?: string;
}

export interface Manifest {
  schema_version: number;
  source_file: string;
  x_var: string;
  y_var: string;
  format: OutputFormat;
  transposed: boolean;
  n: number;
  m: number;
  c: number;
  /** Original label value (as string key) -> dense 1..C index. */
  label_mapping: Record<string, number>;
  outputs: {
    features: string;
    labels: string;
  };
  checksums: {
    features_sha256: string;
    labels_sha256: string;
  };
}

const DEFAULT_X_VAR = "fts";
const DEFAULT_Y_VAR = "labels";

function sha256(data: Buffer | string): string {
  return createHash("sha256").update(data).digest("hex");
}

function asVector(variable: MatVariable, what: string): Float64Array {
  const nontrivial = variable.dims.filter((d) => d > 1);
  if (nontrivial.length > 1) {
    throw new ConvertError(
      `${what} variable '${variable.name}' has shape [${variable.dims.join(", ")}], expected a vector`
    );
  }
  return variable.data;
}

/** Column-major stored dims [d0, d1] -> row-major samples-by-features. */
function orient(
  variable: MatVariable,
  labelCount: number,
  transpose: boolean | undefined
): { matrix: Matrix; transposed: boolean } {
  if (variable.dims.length !== 2) {
    throw new ConvertError(
      `feature variable '${variable.name}' has ${variable.dims.length} dimensions, expected 2`
    );
  }
  const [d0, d1] = variable.dims;
  let flip: boolean;
  if (transpose !== undefined) {
    flip = transpose;
  } else if (d0 === d1) {
    throw new ConvertError(
      `feature matrix is square (${d0}x${d1}); pass --transpose or --no-transpose explicitly`
    );
  } else if (d0 === labelCount) {
    flip = false;
  } else if (d1 === labelCount) {
    flip = true; // stored features-by-samples
  } else {
    throw new ConvertError(
      `neither dimension of [${d0}, ${d1}] matches the ${labelCount} labels`
    );
  }
  const rows = flip ? d1 : d0;
  const cols = flip ? d0 : d1;
  if (rows !== labelCount) {
    throw new ConvertError(
      `${rows} samples after orientation, but ${labelCount} labels`
    );
  }
  // stored column-major: element (i, j) of the d0 x d1 array sits at j*d0 + i
  const values = new Float64Array(rows * cols);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const i = flip ? c : r;
      const j = flip ? r : c;
      values[r * cols + c] = variable.data[j * d0 + i];
    }
  }
  return { matrix: { rows, cols, values }, transposed: flip };
}

function normalizeLabels(raw: Float64Array): {
  dense: Int32Array;
  mapping: Record<string, number>;
} {
  const originals: number[] = new Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    const v = raw[i];
    if (!Number.isFinite(v) || !Number.isInteger(v)) {
      throw new ConvertError(`label ${i + 1} is not an integer (${v})`);
    }
    originals[i] = v;
  }
  const unique = [...new Set(originals)].sort((a, b) => a - b);
  const mapping: Record<string, number> = {};
  unique.forEach((v, idx) => {
    mapping[String(v)] = idx + 1;
  });
  const dense = new Int32Array(raw.length);
  originals.forEach((v, i) => {
    dense[i] = mapping[String(v)];
  });
  return { dense, mapping };
}

export function convert(options: ConvertOptions): Manifest {
  const xVar = options.xVar ?? DEFAULT_X_VAR;
  const yVar = options.yVar ?? DEFAULT_Y_VAR;
  const mat = parseMat(readFileSync(options.matPath));

  const pick = (name: string, what: string): MatVariable => {
    const found = mat.variables.get(name);
    if (found) return found;
    const skippedKind = mat.skipped.get(name);
    if (skippedKind) {
      throw new ConvertError(
        `${what} variable '${name}' is not a numeric array (${skippedKind})`
      );
    }
    const names = [...mat.variables.keys(), ...mat.skipped.keys()];
    throw new ConvertError(
      `${what} variable '${name}' not found; file contains: ${names.join(", ") || "(none)"}`
    );
  };

  const labels = asVector(pick(yVar, "label"), "label");
  const { matrix, transposed } = orient(pick(xVar, "feature"), labels.length, options.transpose);
  const { dense, mapping } = normalizeLabels(labels);

  mkdirSync(options.outDir, { recursive: true });
  const stem = options.stem ?? basename(options.matPath).replace(/\.mat$/i, "");
  const featuresName = `${stem}.${options.format}`;
  const labelsName = `${stem}.labels.txt`;
  const featuresPath = join(options.outDir, featuresName);
  const labelsPath = join(options.outDir, labelsName);

  const featuresPayload =
    options.format === "bin"
      ? encodeBin(matrix)
      : Buffer.from(encodeCsv(matrix), "utf-8");
  const labelsPayload = Buffer.from(encodeLabels(dense), "utf-8");
  writeFileSync(featuresPath, featuresPayload);
  writeFileSync(labelsPath, labelsPayload);

  const manifest: Manifest = {
    schema_version: 1,
    source_file: basename(options.matPath),
    x_var: xVar,
    y_var: yVar,
    format: options.format,
    transposed,
    n: matrix.rows,
    m: matrix.cols,
    c: Object.keys(mapping).length,
    label_mapping: mapping,
    outputs: { features: featuresName, labels: labelsName },
    checksums: {
      features_sha256: sha256(readFileSync(featuresPath)),
      labels_sha256: sha256(readFileSync(labelsPath)),
    },
  };
  writeFileSync(
    join(options.outDir, `${stem}.manifest.json`),
    JSON.stringify(manifest, null, 2) + "\n"
  );
  verifyManifest(manifest, options.outDir);
  return manifest;
}

/** Re-read the written outputs and check sizes and checksums. */
export function verifyManifest(manifest: Manifest, outDir: string): void {
  const features = readFileSync(join(outDir, manifest.outputs.features));
  const labels = readFileSync(join(outDir, manifest.outputs.labels));
  if (sha256(features) !== manifest.checksums.features_sha256) {
    throw new ConvertError("feature file checksum mismatch");
  }
  if (sha256(labels) !== manifest.checksums.labels_sha256) {
    throw new ConvertError("label file checksum mismatch");
  }
  if (manifest.format === "bin") {
    const expected = 24 + manifest.n * manifest.m * 8;
    if (features.length !== expected) {
      throw new ConvertError(
        `feature payload is ${features.length} bytes, expected ${expected} for n*m`
      );
    }
  } else {
    const rows = features.toString("utf-8").split("\n").filter((l) => l.trim());
    if (rows.length !== manifest.n) {
      throw new ConvertError(`feature file has ${rows.length} rows, expected ${manifest.n}`);
    }
  }
  const labelLines = labels.toString("utf-8").split("\n").filter((l) => l.trim());
  if (labelLines.length !== manifest.n) {
    throw new ConvertError(`label file has ${labelLines.length} rows, expected ${manifest.n}`);
  }
}
