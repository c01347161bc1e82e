/**
 * Reader for Level 5 MAT-files (the format of the published feature
 * archives). Supports little-endian files, zlib-compressed elements, and
 * numeric arrays whose storage type is narrower than their array class
 * (MATLAB's on-disk downcasting). Non-numeric variables are indexed but not
 * decoded. Version 7.3 (HDF5) containers are rejected with a clear error.
 */

import { inflateSync } from "node:zlib";

export class MatFormatError extends Error {}

// mi* storage data types
const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_INT64 = 12;
const MI_UINT64 = 13;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF8 = 16;

// mx* array classes
const MX_DOUBLE = 6;
const MX_SINGLE = 7;
const MX_NUMERIC_CLASSES = new Set([6, 7, 8, 9, 10, 11, 12, 13, 14, 15]);
const MX_CLASS_NAMES: Record<number, string> = {
  1: "cell",
  2: "struct",
  3: "object",
  4: "char",
  5: "sparse",
  [MX_DOUBLE]: "double",
  [MX_SINGLE]: "single",
  8: "int8",
  9: "uint8",
  10: "int16",
  11: "uint16",
  12: "int32",
  13: "uint32",
  14: "int64",
  15: "uint64",
};

export interface MatVariable {
  name: string;
  /** Dimension sizes as stored (column-major layout). */
  dims: number[];
  /** Values in column-major order, converted to float64. */
  data: Float64Array;
  className: string;
}

export interface MatFile {
  variables: Map<string, MatVariable>;
  /** Names of variables present but not decodable as numeric matrices. */
  skipped: Map<string, string>;
}

interface Tag {
  type: number;
  size: number;
  dataOffset: number;
  next: number;
}

function readTag(view: DataView, offset: number): Tag {
  if (offset + 8 > view.byteLength) {
    throw new MatFormatError(`truncated element tag at byte ${offset}`);
  }
  const first = view.getUint32(offset, true);
  if ((first & 0xffff0000) !== 0) {
    // small data element: type and size packed into one word, data inline
    const type = first & 0xffff;
    const size = first >>> 16;
    return { type, size, dataOffset: offset + 4, next: offset + 8 };
  }
  const size = view.getUint32(offset + 4, true);
  const padded = (size + 7) & ~7;
  return { type: first, size, dataOffset: offset + 8, next: offset + 8 + padded };
}

function decodeNumeric(
  view: DataView,
  tag: Tag,
  context: string
): Float64Array {
  const { type, size, dataOffset } = tag;
  const read = (width: number, get: (off: number) => number): Float64Array => {
    if (size % width !== 0) {
      throw new MatFormatError(`${context}: ${size} bytes is not a multiple of ${width}`);
    }
    const n = size / width;
    const out = new Float64Array(n);
    for (let i = 0; i < n; i++) {
      out[i] = get(dataOffset + i * width);
    }
    return out;
  };
  switch (type) {
    case MI_INT8:
      return read(1, (o) => view.getInt8(o));
    case MI_UINT8:
      return read(1, (o) => view.getUint8(o));
    case MI_INT16:
      return read(2, (o) => view.getInt16(o, true));
    case MI_UINT16:
      return read(2, (o) => view.getUint16(o, true));
    case MI_INT32:
      return read(4, (o) => view.getInt32(o, true));
    case MI_UINT32:
      return read(4, (o) => view.getUint32(o, true));
    case MI_SINGLE:
      return read(4, (o) => view.getFloat32(o, true));
    case MI_DOUBLE:
      return read(8, (o) => view.getFloat64(o, true));
    case MI_INT64:
      return read(8, (o) => Number(view.getBigInt64(o, true)));
    case MI_UINT64:
      return read(8, (o) => Number(view.getBigUint64(o, true)));
    default:
      throw new MatFormatError(`${context}: unsupported storage type mi=${type}`);
  }
}

function decodeName(view: DataView, tag: Tag): string {
  if (tag.type !== MI_INT8 && tag.type !== MI_UTF8) {
    throw new MatFormatError(`array name stored as mi=${tag.type}, expected miINT8`);
  }
  const bytes = new Uint8Array(view.buffer, view.byteOffset + tag.dataOffset, tag.size);
  return new TextDecoder("utf-8").decode(bytes);
}

function parseMatrix(view: DataView, tag: Tag, out: MatFile): void {
  let offset = tag.dataOffset;
  const end = tag.dataOffset + tag.size;

  const flagsTag = readTag(view, offset);
  if (flagsTag.type !== MI_UINT32 || flagsTag.size !== 8) {
    throw new MatFormatError("malformed array flags subelement");
  }
  const flags = view.getUint32(flagsTag.dataOffset, true);
  const classId = flags & 0xff;
  const isComplex = (flags & 0x0800) !== 0;
  offset = flagsTag.next;

  const dimsTag = readTag(view, offset);
  if (dimsTag.type !== MI_INT32) {
    throw new MatFormatError("malformed dimensions subelement");
  }
  const dims: number[] = [];
  for (let i = 0; i < dimsTag.size / 4; i++) {
    dims.push(view.getInt32(dimsTag.dataOffset + 4 * i, true));
  }
  offset = dimsTag.next;

  const nameTag = readTag(view, offset);
  const name = decodeName(view, nameTag);
  offset = nameTag.next;

  const className = MX_CLASS_NAMES[classId] ?? `class ${classId}`;
  if (!MX_NUMERIC_CLASSES.has(classId)) {
    out.skipped.set(name, className);
    return;
  }
  if (isComplex) {
    out.skipped.set(name, `complex ${className}`);
    return;
  }
  if (offset >= end) {
    // empty array (no data subelement)
    out.variables.set(name, { name, dims, data: new Float64Array(0), className });
    return;
  }
  const dataTag = readTag(view, offset);
  const data = decodeNumeric(view, dataTag, `variable '${name}'`);
  const count = dims.reduce((a, b) => a * b, 1);
  if (data.length !== count) {
    throw new MatFormatError(
      `variable '${name}': ${data.length} values for dims [${dims.join(", ")}]`
    );
  }
  out.variables.set(name, { name, dims, data, className });
}

function parseElements(view: DataView, start: number, out: MatFile): void {
  let offset = start;
  while (offset + 8 <= view.byteLength) {
    const tag = readTag(view, offset);
    if (tag.type === MI_COMPRESSED) {
      // compressed elements are stored back-to-back without 8-byte padding
      tag.next = tag.dataOffset + tag.size;
      const raw = Buffer.from(
        view.buffer,
        view.byteOffset + tag.dataOffset,
        tag.size
      );
      let inflated: Buffer;
      try {
        inflated = inflateSync(raw);
      } catch (err) {
        throw new MatFormatError(`cannot inflate compressed element: ${err}`);
      }
      const innerView = new DataView(
        inflated.buffer,
        inflated.byteOffset,
        inflated.byteLength
      );
      parseElements(innerView, 0, out);
    } else if (tag.type === MI_MATRIX) {
      parseMatrix(view, tag, out);
    }
    // other top-level element types are legal but irrelevant; skip them
    offset = tag.next;
  }
}

export function parseMat(buffer: Buffer): MatFile {
  if (buffer.byteLength < 128) {
    throw new MatFormatError("file too short for a MAT-file header");
  }
  const text = buffer.toString("latin1", 0, 116);
  if (text.startsWith("MATLAB 7.3")) {
    throw new MatFormatError(
      "MATLAB 7.3 (HDF5) container; re-save with '-v7' or convert upstream"
    );
  }
  const endian = buffer.toString("latin1", 126, 128);
  if (endian === "MI") {
    throw new MatFormatError("big-endian MAT-files are not supported");
  }
  if (endian !== "IM" || !text.startsWith("MATLAB 5.0")) {
    throw new MatFormatError("not a Level 5 MAT-file (bad header)");
  }
  const view = new DataView(buffer.buffer, buffer.byteOffset, buffer.byteLength);
  const out: MatFile = { variables: new Map(), skipped: new Map() };
  parseElements(view, 128, out);
  return out;
}
