"""Binary little-endian PLY import/export for Gaussian point scenes.

The vertex schema follows the layout that splat-reconstruction tools
export: positions ``x,y,z``, log scales ``scale_0..2``, a w-first
quaternion ``rot_0..3``, an ``opacity`` logit, and DC color coefficients
``f_dc_0..2``. We add an optional ``roi`` logit property and ignore any
higher-order ``f_rest_*`` coefficients.

Colors are stored as DC coefficients: color = clamp(0.5 + C0 * f_dc).
Export inverts that map, nudging within the target float grid so that a
scene written with double precision re-imports bit-identically.
"""

from __future__ import annotations

import io

import numpy as np

from .types import GaussianScene, ROI_LOGIT_OFF

SH_DC_COEFF = 0.28209479177387814

# (ply name, numpy dtype) for supported scalar property types
_PLY_SCALAR_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

REQUIRED_PROPERTIES = (
    "x", "y", "z",
    "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
    "opacity",
    "f_dc_0", "f_dc_1", "f_dc_2",
)


class PlyParseError(ValueError):
    """Malformed PLY header or truncated payload; carries a byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class PlySchemaError(ValueError):
    """The vertex element lacks a property this scene format requires."""

    def __init__(self, property_name: str):
        super().__init__(f"missing required vertex property '{property_name}'")
        self.property_name = property_name


def color_from_dc(f_dc: np.ndarray) -> np.ndarray:
    """Import-side color activation, clamped to [0, 1]."""
    return np.clip(0.5 + SH_DC_COEFF * np.asarray(f_dc, dtype=np.float64), 0.0, 1.0)


def dc_from_color(color: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Inverse of :func:`color_from_dc` in the ``dtype`` float grid.

    Searches a few ulps around the analytic inverse for an exact preimage;
    colors without one (possible off the file-representable gamut) fall
    back to the nearest value.
    """
    color = np.asarray(color, dtype=np.float64)
    f = ((color - 0.5) / SH_DC_COEFF).astype(dtype)
    exact = color_from_dc(f.astype(np.float64)) == color
    for _ in range(4):
        if np.all(exact):
            break
        miss = ~exact
        got = color_from_dc(f[miss].astype(np.float64))
        step = np.where(got < color[miss], np.inf, -np.inf).astype(dtype)
        f[miss] = np.nextafter(f[miss], step)
        exact = color_from_dc(f.astype(np.float64)) == color
    return f


def _parse_header(data: bytes):
    end_marker = b"end_header\n"
    end = data.find(end_marker)
    if not data.startswith(b"ply"):
        raise PlyParseError("not a PLY file (missing 'ply' magic)", 0)
    if end < 0:
        raise PlyParseError("header is not terminated by 'end_header'", len(data))
    header = data[:end].decode("ascii", errors="replace")
    body_offset = end + len(end_marker)

    offset = 0
    fmt = None
    background = None
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    current = None
    for line in header.split("\n"):
        line_offset = offset
        offset += len(line) + 1
        tokens = line.strip().split()
        if not tokens or tokens[0] in ("ply", "comment", "obj_info"):
            # Our exporter stashes the background color in a comment so a
            # round-trip restores the full scene; foreign files ignore it.
            if len(tokens) == 5 and tokens[:2] == ["comment", "background"]:
                try:
                    background = [float(t) for t in tokens[2:]]
                except ValueError:
                    background = None
            continue
        if tokens[0] == "format":
            if len(tokens) != 3 or tokens[1] != "binary_little_endian":
                raise PlyParseError(f"unsupported format '{line.strip()}'", line_offset)
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise PlyParseError(f"malformed element line '{line.strip()}'", line_offset)
            current = (tokens[1], int(tokens[2]), [])
            elements.append(current)
        elif tokens[0] == "property":
            if current is None:
                raise PlyParseError("property before any element", line_offset)
            if tokens[1] == "list":
                raise PlyParseError("list properties are not supported", line_offset)
            if len(tokens) != 3 or tokens[1] not in _PLY_SCALAR_TYPES:
                raise PlyParseError(f"unsupported property '{line.strip()}'", line_offset)
            current[2].append((tokens[2], _PLY_SCALAR_TYPES[tokens[1]]))
        else:
            raise PlyParseError(f"unrecognized header line '{line.strip()}'", line_offset)
    if fmt is None:
        raise PlyParseError("header has no format line", body_offset)
    return elements, body_offset, background


def import_ply(data: bytes) -> GaussianScene:
    """Parse a binary little-endian PLY into a scene.

    Raises :class:`PlySchemaError` when a required vertex property is
    absent and :class:`PlyParseError` for malformed headers or truncated
    payloads. A missing ``roi`` property initializes the RoI attribute to
    its off state.
    """
    elements, body_offset, background = _parse_header(data)

    cursor = body_offset
    vertex = None
    for name, count, props in elements:
        dtype = np.dtype([(p, "<" + t) for p, t in props])
        nbytes = dtype.itemsize * count
        if name == "vertex":
            if len(data) < cursor + nbytes:
                raise PlyParseError(
                    f"vertex data truncated: need {nbytes} bytes", len(data)
                )
            vertex = np.frombuffer(data, dtype=dtype, count=count, offset=cursor)
            break
        if count > 0:
            raise PlyParseError(f"unsupported non-empty element '{name}' before vertex", cursor)
        cursor += nbytes
    if vertex is None:
        raise PlyParseError("no vertex element in header", body_offset)

    names = set(vertex.dtype.names or ())
    for prop in REQUIRED_PROPERTIES:
        if prop not in names:
            raise PlySchemaError(prop)

    def col(*props: str) -> np.ndarray:
        return np.stack([vertex[p].astype(np.float64) for p in props], axis=1)

    n = len(vertex)
    roi = (
        vertex["roi"].astype(np.float64)
        if "roi" in names
        else np.full(n, ROI_LOGIT_OFF)
    )
    return GaussianScene(
        positions=col("x", "y", "z"),
        log_scales=col("scale_0", "scale_1", "scale_2"),
        rotations=col("rot_0", "rot_1", "rot_2", "rot_3"),
        colors=color_from_dc(col("f_dc_0", "f_dc_1", "f_dc_2")),
        opacity_logits=vertex["opacity"].astype(np.float64),
        roi_logits=roi,
        background_color=background if background is not None else (0.0, 0.0, 0.0),
    )


def export_ply(scene: GaussianScene, precision: str = "double") -> bytes:
    """Serialize a scene with the import schema plus the ``roi`` property.

    ``precision`` is ``"double"`` (default; exact round-trip) or
    ``"float"`` (interoperable with standard splat viewers, lossy for
    values off the float32 grid).
    """
    if precision not in ("float", "double"):
        raise ValueError("precision must be 'float' or 'double'")
    np_type = np.float32 if precision == "float" else np.float64

    fields = ("x", "y", "z", "scale_0", "scale_1", "scale_2",
              "rot_0", "rot_1", "rot_2", "rot_3", "opacity",
              "f_dc_0", "f_dc_1", "f_dc_2", "roi")
    dtype = np.dtype([(f, np.dtype(np_type).newbyteorder("<")) for f in fields])
    out = np.empty(len(scene), dtype=dtype)

    f_dc = dc_from_color(scene.colors, dtype=np_type)
    columns = {
        "x": scene.positions[:, 0], "y": scene.positions[:, 1], "z": scene.positions[:, 2],
        "scale_0": scene.log_scales[:, 0], "scale_1": scene.log_scales[:, 1],
        "scale_2": scene.log_scales[:, 2],
        "rot_0": scene.rotations[:, 0], "rot_1": scene.rotations[:, 1],
        "rot_2": scene.rotations[:, 2], "rot_3": scene.rotations[:, 3],
        "opacity": scene.opacity_logits,
        "f_dc_0": f_dc[:, 0], "f_dc_1": f_dc[:, 1], "f_dc_2": f_dc[:, 2],
        "roi": scene.roi_logits,
    }
    for name, values in columns.items():
        out[name] = values.astype(np_type)

    type_name = "float" if precision == "float" else "double"
    bg = " ".join(repr(float(v)) for v in scene.background_color)
    buf = io.BytesIO()
    buf.write(b"ply\nformat binary_little_endian 1.0\n")
    buf.write(f"comment background {bg}\n".encode("ascii"))
    buf.write(f"element vertex {len(scene)}\n".encode("ascii"))
    for f in fields:
        buf.write(f"property {type_name} {f}\n".encode("ascii"))
    buf.write(b"end_header\n")
    buf.write(out.tobytes())
    return buf.getvalue()
