"""PLY 1.0 codec for triangle meshes: ascii and binary_little_endian.

Vertices are written as float32 x, y, z and faces as a uchar-counted list of
int vertex indices. Normals, colors and non-triangle faces are out of scope;
the parser names any unsupported element or property it encounters.
"""

from __future__ import annotations

import numpy as np

from .errors import PlyFormatError
from .model import TriangleMesh

ASCII = "ascii"
BINARY_LE = "binary_little_endian"

_SCALAR_DTYPES = {
    "char": "<i1", "int8": "<i1",
    "uchar": "<u1", "uint8": "<u1",
    "short": "<i2", "int16": "<i2",
    "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4",
    "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4",
    "double": "<f8", "float64": "<f8",
}
_FLOAT_TYPES = {"float", "float32", "double", "float64"}
_INT_TYPES = set(_SCALAR_DTYPES) - _FLOAT_TYPES


def _fmt(value: np.float32) -> str:
    # 9 significant digits round-trip any float32 exactly
    return f"{float(value):.9g}"


def export_ply(mesh: TriangleMesh, mode: str = BINARY_LE) -> bytes:
    """Serialize a mesh to PLY bytes in the requested mode."""
    if mode not in (ASCII, BINARY_LE):
        raise ValueError(f"unknown PLY mode {mode!r}")
    points = mesh.points.astype(np.float32)
    tris = mesh.triangles.astype(np.int32)
    header = (
        "ply\n"
        f"format {mode} 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        f"element face {mesh.n_triangles}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    ).encode("ascii")

    if mode == ASCII:
        lines = [" ".join(_fmt(c) for c in p) for p in points]
        lines += ["3 " + " ".join(str(i) for i in t) for t in tris]
        body = ("\n".join(lines) + "\n").encode("ascii") if lines else b""
        return header + body

    vertex_block = points.astype("<f4").tobytes()
    face_rec = np.empty(len(tris), dtype=np.dtype([("n", "<u1"), ("idx", "<i4", (3,))]))
    face_rec["n"] = 3
    face_rec["idx"] = tris
    return header + vertex_block + face_rec.tobytes()


class _Element:
    def __init__(self, name: str, count: int):
        self.name = name
        self.count = count
        self.properties: list[tuple] = []  # ("scalar", type, name) | ("list", ctype, itype, name)


def _parse_header(data: bytes) -> tuple[list[_Element], str, int]:
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise PlyFormatError("not a PLY file (missing 'ply' magic or 'end_header')")
    body_offset = end + len(b"end_header\n")
    try:
        header_text = data[:end].decode("ascii")
    except UnicodeDecodeError as exc:
        raise PlyFormatError(f"PLY header is not ascii: {exc}") from exc

    fmt = None
    elements: list[_Element] = []
    for raw in header_text.splitlines()[1:]:
        line = raw.strip()
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tokens = line.split()
        if tokens[0] == "format":
            if len(tokens) != 3 or tokens[2] != "1.0":
                raise PlyFormatError(f"unsupported PLY format line: {line!r}")
            if tokens[1] not in (ASCII, BINARY_LE):
                raise PlyFormatError(f"unsupported PLY format {tokens[1]!r}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyFormatError(f"malformed element line: {line!r}")
            elements.append(_Element(tokens[1], int(tokens[2])))
        elif tokens[0] == "property":
            if not elements:
                raise PlyFormatError("property declared before any element")
            if tokens[1] == "list":
                if len(tokens) != 5:
                    raise PlyFormatError(f"malformed list property: {line!r}")
                elements[-1].properties.append(("list", tokens[2], tokens[3], tokens[4]))
            else:
                if len(tokens) != 3:
                    raise PlyFormatError(f"malformed property: {line!r}")
                elements[-1].properties.append(("scalar", tokens[1], tokens[2]))
        else:
            raise PlyFormatError(f"unsupported header keyword {tokens[0]!r}")
    if fmt is None:
        raise PlyFormatError("PLY header has no format line")
    return elements, fmt, body_offset


def _vertex_layout(el: _Element) -> list[tuple[str, str]]:
    names = []
    for prop in el.properties:
        if prop[0] != "scalar":
            raise PlyFormatError(f"unsupported list property {prop[-1]!r} on vertex element")
        _, ptype, name = prop
        if name not in ("x", "y", "z"):
            raise PlyFormatError(f"unsupported vertex property {name!r}")
        if ptype not in _FLOAT_TYPES:
            raise PlyFormatError(f"vertex property {name!r} has non-float type {ptype!r}")
        names.append((name, ptype))
    if sorted(n for n, _ in names) != ["x", "y", "z"]:
        raise PlyFormatError("vertex element must have exactly the properties x, y, z")
    return names


def _face_layout(el: _Element) -> tuple[str, str]:
    if len(el.properties) != 1 or el.properties[0][0] != "list":
        raise PlyFormatError("face element must have a single list property")
    _, ctype, itype, name = el.properties[0]
    if name not in ("vertex_indices", "vertex_index"):
        raise PlyFormatError(f"unsupported face property {name!r}")
    if ctype not in _INT_TYPES or itype not in _INT_TYPES:
        raise PlyFormatError(f"face list types {ctype!r}/{itype!r} are not integral")
    return ctype, itype


def parse_ply(data: bytes) -> TriangleMesh:
    """Parse PLY bytes into a mesh; raises :class:`PlyFormatError` on anything
    beyond xyz vertices and triangular faces."""
    elements, fmt, offset = _parse_header(data)

    for el in elements:
        if el.name not in ("vertex", "face"):
            raise PlyFormatError(f"unsupported element {el.name!r}")
    vertex_el = next((e for e in elements if e.name == "vertex"), None)
    if vertex_el is None:
        raise PlyFormatError("PLY file has no vertex element")

    if fmt == ASCII:
        positions, triangles = _parse_ascii_body(data[offset:], elements)
    else:
        positions, triangles = _parse_binary_body(data[offset:], elements)
    return TriangleMesh(positions, triangles)


def _parse_ascii_body(body: bytes, elements: list[_Element]):
    tokens = body.decode("ascii").split()
    pos = 0

    def take(n: int) -> list[str]:
        nonlocal pos
        if pos + n > len(tokens):
            raise PlyFormatError("PLY data ended early")
        out = tokens[pos : pos + n]
        pos += n
        return out

    positions = np.zeros(0)
    triangles = np.zeros((0, 3), np.int32)
    for el in elements:
        if el.name == "vertex":
            layout = _vertex_layout(el)
            rows = np.array(
                [[float(v) for v in take(len(layout))] for _ in range(el.count)],
                dtype=np.float64,
            ).reshape(el.count, len(layout))
            order = [n for n, _ in layout]
            xyz = rows[:, [order.index("x"), order.index("y"), order.index("z")]]
            positions = xyz.astype(np.float32).astype(np.float64).ravel()
        else:
            _face_layout(el)
            tris = []
            for _ in range(el.count):
                n = int(take(1)[0])
                if n != 3:
                    raise PlyFormatError(f"unsupported {n}-gon face; only triangles are supported")
                tris.append([int(v) for v in take(3)])
            triangles = np.array(tris, np.int32).reshape(-1, 3)
    return positions, triangles


def _parse_binary_body(body: bytes, elements: list[_Element]):
    positions = np.zeros(0)
    triangles = np.zeros((0, 3), np.int32)
    offset = 0
    for el in elements:
        if el.name == "vertex":
            layout = _vertex_layout(el)
            dtype = np.dtype([(n, _SCALAR_DTYPES[t]) for n, t in layout])
            nbytes = dtype.itemsize * el.count
            if offset + nbytes > len(body):
                raise PlyFormatError("PLY vertex data ended early")
            rec = np.frombuffer(body, dtype=dtype, count=el.count, offset=offset)
            offset += nbytes
            xyz = np.stack([rec["x"], rec["y"], rec["z"]], axis=1)
            positions = xyz.astype(np.float32).astype(np.float64).ravel()
        else:
            ctype, itype = _face_layout(el)
            cdt, idt = np.dtype(_SCALAR_DTYPES[ctype]), np.dtype(_SCALAR_DTYPES[itype])
            tris = np.empty((el.count, 3), np.int32)
            for i in range(el.count):
                if offset + cdt.itemsize > len(body):
                    raise PlyFormatError("PLY face data ended early")
                n = int(np.frombuffer(body, cdt, 1, offset)[0])
                offset += cdt.itemsize
                if n != 3:
                    raise PlyFormatError(f"unsupported {n}-gon face; only triangles are supported")
                if offset + 3 * idt.itemsize > len(body):
                    raise PlyFormatError("PLY face data ended early")
                tris[i] = np.frombuffer(body, idt, 3, offset)
                offset += 3 * idt.itemsize
            triangles = tris
    return positions, triangles
