/** Minimal PLY reader for verifying service exports: ascii and
 * binary_little_endian, float/double xyz vertices, uchar-counted int
 * triangle faces (the profile the service writes). */

export interface ParsedPly {
  positions: Float32Array; // flat xyz
  triangles: Int32Array; // flat indices
}

interface HeaderElement {
  name: string;
  count: number;
  properties: Array<
    | { list: false; type: string; name: string }
    | { list: true; countType: string; itemType: string; name: string }
  >;
}

const SCALAR_BYTES: Record<string, number> = {
  char: 1, int8: 1, uchar: 1, uint8: 1,
  short: 2, int16: 2, ushort: 2, uint16: 2,
  int: 4, int32: 4, uint: 4, uint32: 4,
  float: 4, float32: 4,
  double: 8, float64: 8,
};

function readScalar(view: DataView, offset: number, type: string): number {
  switch (type) {
    case "char": case "int8": return view.getInt8(offset);
    case "uchar": case "uint8": return view.getUint8(offset);
    case "short": case "int16": return view.getInt16(offset, true);
    case "ushort": case "uint16": return view.getUint16(offset, true);
    case "int": case "int32": return view.getInt32(offset, true);
    case "uint": case "uint32": return view.getUint32(offset, true);
    case "float": case "float32": return view.getFloat32(offset, true);
    case "double": case "float64": return view.getFloat64(offset, true);
    default: throw new Error(`unsupported PLY scalar type '${type}'`);
  }
}

export function parsePly(data: Uint8Array): ParsedPly {
  const headerEnd = indexOfSequence(data, "end_header\n");
  if (headerEnd < 0) throw new Error("not a PLY file: missing end_header");
  const headerText = new TextDecoder("ascii").decode(data.subarray(0, headerEnd));
  const lines = headerText.split("\n").map((l) => l.trim()).filter((l) => l.length > 0);
  if (lines[0] !== "ply") throw new Error("not a PLY file: missing magic");

  let format: "ascii" | "binary_little_endian" | null = null;
  const elements: HeaderElement[] = [];
  for (const line of lines.slice(1)) {
    const tokens = line.split(/\s+/);
    if (tokens[0] === "comment" || tokens[0] === "obj_info") continue;
    if (tokens[0] === "format") {
      if (tokens[1] !== "ascii" && tokens[1] !== "binary_little_endian") {
        throw new Error(`unsupported PLY format '${tokens[1]}'`);
      }
      format = tokens[1];
    } else if (tokens[0] === "element") {
      elements.push({ name: tokens[1], count: parseInt(tokens[2], 10), properties: [] });
    } else if (tokens[0] === "property") {
      const el = elements[elements.length - 1];
      if (!el) throw new Error("property before element");
      if (tokens[1] === "list") {
        el.properties.push({ list: true, countType: tokens[2], itemType: tokens[3], name: tokens[4] });
      } else {
        el.properties.push({ list: false, type: tokens[1], name: tokens[2] });
      }
    } else {
      throw new Error(`unsupported header keyword '${tokens[0]}'`);
    }
  }
  if (format === null) throw new Error("PLY header has no format line");

  const body = data.subarray(headerEnd + "end_header\n".length);
  return format === "ascii" ? parseAscii(body, elements) : parseBinary(body, elements);
}

function indexOfSequence(data: Uint8Array, needle: string): number {
  const bytes = new TextEncoder().encode(needle);
  outer: for (let i = 0; i + bytes.length <= data.length; i++) {
    for (let j = 0; j < bytes.length; j++) {
      if (data[i + j] !== bytes[j]) continue outer;
    }
    return i;
  }
  return -1;
}

function vertexPropertyOrder(el: HeaderElement): string[] {
  const names = el.properties.map((p) => {
    if (p.list) throw new Error(`unsupported list property '${p.name}' on vertex`);
    return p.name;
  });
  if ([...names].sort().join(",") !== "x,y,z") {
    throw new Error(`vertex element must have exactly x, y, z (got ${names.join(", ")})`);
  }
  return names;
}

function parseAscii(body: Uint8Array, elements: HeaderElement[]): ParsedPly {
  const tokens = new TextDecoder("ascii").decode(body).split(/\s+/).filter((t) => t.length > 0);
  let cursor = 0;
  const take = (): string => {
    if (cursor >= tokens.length) throw new Error("PLY data ended early");
    return tokens[cursor++];
  };
  let positions = new Float32Array(0);
  let triangles = new Int32Array(0);
  for (const el of elements) {
    if (el.name === "vertex") {
      const order = vertexPropertyOrder(el);
      positions = new Float32Array(3 * el.count);
      for (let i = 0; i < el.count; i++) {
        const row: Record<string, number> = {};
        for (const name of order) row[name] = parseFloat(take());
        positions[3 * i] = row.x;
        positions[3 * i + 1] = row.y;
        positions[3 * i + 2] = row.z;
      }
    } else if (el.name === "face") {
      triangles = new Int32Array(3 * el.count);
      for (let i = 0; i < el.count; i++) {
        const n = parseInt(take(), 10);
        if (n !== 3) throw new Error(`unsupported ${n}-gon face; only triangles`);
        for (let j = 0; j < 3; j++) triangles[3 * i + j] = parseInt(take(), 10);
      }
    } else {
      throw new Error(`unsupported element '${el.name}'`);
    }
  }
  return { positions, triangles };
}

function parseBinary(body: Uint8Array, elements: HeaderElement[]): ParsedPly {
  const view = new DataView(body.buffer, body.byteOffset, body.byteLength);
  let offset = 0;
  let positions = new Float32Array(0);
  let triangles = new Int32Array(0);
  for (const el of elements) {
    if (el.name === "vertex") {
      const order = vertexPropertyOrder(el);
      const types = el.properties.map((p) => (p.list ? "" : p.type));
      positions = new Float32Array(3 * el.count);
      for (let i = 0; i < el.count; i++) {
        const row: Record<string, number> = {};
        for (let p = 0; p < order.length; p++) {
          row[order[p]] = readScalar(view, offset, types[p]);
          offset += SCALAR_BYTES[types[p]];
        }
        positions[3 * i] = row.x;
        positions[3 * i + 1] = row.y;
        positions[3 * i + 2] = row.z;
      }
    } else if (el.name === "face") {
      const prop = el.properties[0];
      if (!prop || !prop.list) throw new Error("face element must have a list property");
      triangles = new Int32Array(3 * el.count);
      for (let i = 0; i < el.count; i++) {
        const n = readScalar(view, offset, prop.countType);
        offset += SCALAR_BYTES[prop.countType];
        if (n !== 3) throw new Error(`unsupported ${n}-gon face; only triangles`);
        for (let j = 0; j < 3; j++) {
          triangles[3 * i + j] = readScalar(view, offset, prop.itemType);
          offset += SCALAR_BYTES[prop.itemType];
        }
      }
    } else {
      throw new Error(`unsupported element '${el.name}'`);
    }
    if (offset > body.byteLength) throw new Error("PLY data ended early");
  }
  return { positions, triangles };
}
