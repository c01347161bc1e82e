/**
 * Writers (and verification readers) for the toolkit's interchange formats.
 *
 * CSV: one sample per line, comma-separated decimal floats, no header.
 * Binary: magic "CMMS", u32 version = 1, u64 n, u64 m, then n*m
 * little-endian float64 values in row-major order.
 * Labels: one integer per line.
 */

export const BIN_MAGIC = "CMMS";
export const BIN_VERSION = 1;

export class FormatError extends Error {}

/** Row-major dense matrix: values[r * cols + c]. */
export interface Matrix {
  rows: number;
  cols: number;
  values: Float64Array;
}

export function encodeCsv(matrix: Matrix): string {
  const { rows, cols, values } = matrix;
  const lines: string[] = new Array(rows);
  for (let r = 0; r < rows; r++) {
    const cells: string[] = new Array(cols);
    for (let c = 0; c < cols; c++) {
      cells[c] = String(values[r * cols + c]);
    }
    lines[r] = cells.join(",");
  }
  return lines.join("\n") + "\n";
}

export function encodeBin(matrix: Matrix): Buffer {
  const { rows, cols, values } = matrix;
  const header = Buffer.alloc(24);
  header.write(BIN_MAGIC, 0, "latin1");
  header.writeUInt32LE(BIN_VERSION, 4);
  header.writeBigUInt64LE(BigInt(rows), 8);
  header.writeBigUInt64LE(BigInt(cols), 16);
  const payload = Buffer.alloc(rows * cols * 8);
  for (let i = 0; i < values.length; i++) {
    payload.writeDoubleLE(values[i], i * 8);
  }
  return Buffer.concat([header, payload]);
}

export function encodeLabels(labels: Int32Array | number[]): string {
  let out = "";
  for (const v of labels) {
    out += `${v}\n`;
  }
  return out;
}

export function decodeBin(buffer: Buffer): Matrix {
  if (buffer.length < 24) {
    throw new FormatError("truncated binary header");
  }
  if (buffer.toString("latin1", 0, 4) !== BIN_MAGIC) {
    throw new FormatError("bad magic");
  }
  if (buffer.readUInt32LE(4) !== BIN_VERSION) {
    throw new FormatError("unsupported version");
  }
  const rows = Number(buffer.readBigUInt64LE(8));
  const cols = Number(buffer.readBigUInt64LE(16));
  if (buffer.length !== 24 + rows * cols * 8) {
    throw new FormatError(
      `payload is ${buffer.length - 24} bytes, header requires ${rows * cols * 8}`
    );
  }
  const values = new Float64Array(rows * cols);
  for (let i = 0; i < values.length; i++) {
    values[i] = buffer.readDoubleLE(24 + i * 8);
  }
  return { rows, cols, values };
}

export function decodeCsv(text: string): Matrix {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new FormatError("no rows");
  }
  const cols = lines[0].split(",").length;
  const values = new Float64Array(lines.length * cols);
  lines.forEach((line, r) => {
    const cells = line.split(",");
    if (cells.length !== cols) {
      throw new FormatError(`row ${r + 1} has ${cells.length} columns, expected ${cols}`);
    }
    cells.forEach((cell, c) => {
      const v = Number(cell);
      if (!Number.isFinite(v)) {
        throw new FormatError(`row ${r + 1}, col ${c + 1}: cannot parse ${cell}`);
      }
      values[r * cols + c] = v;
    });
  });
  return { rows: lines.length, cols, values };
}
