"""Point-cloud and label file codecs.

Supported cloud formats:

``kitti_bin``
    Little-endian float32 records ``(x, y, z, intensity)``, 16 bytes each.
``ply_ascii``
    ASCII PLY; the vertex element's ``x``, ``y``, ``z`` (and ``intensity``
    when present) are read, other properties and elements are skipped.
``csv_xyz``
    Comma-separated ``x,y,z[,intensity]`` with an optional header row.

Labels are CSV files with the header ``index,label``.
"""

from __future__ import annotations

import colorsys
import enum
import os
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import FecError, IngestionError, ParameterError, PointCloud

PathLike = Union[str, os.PathLike]


class FormatError(FecError, ValueError):
    """Malformed or unsupported file contents."""

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message)
        self.offset = offset


class CloudFormat(str, enum.Enum):
    KITTI_BIN = "kitti_bin"
    PLY_ASCII = "ply_ascii"
    CSV_XYZ = "csv_xyz"


_EXTENSIONS = {
    ".bin": CloudFormat.KITTI_BIN,
    ".ply": CloudFormat.PLY_ASCII,
    ".csv": CloudFormat.CSV_XYZ,
    ".txt": CloudFormat.CSV_XYZ,
    ".xyz": CloudFormat.CSV_XYZ,
}


def detect_format(path: PathLike, fmt=None) -> CloudFormat:
    if fmt is not None:
        try:
            return CloudFormat(fmt)
        except ValueError:
            raise ParameterError(f"unknown cloud format {fmt!r}") from None
    suffix = Path(path).suffix.lower()
    if suffix not in _EXTENSIONS:
        raise ParameterError(f"cannot infer cloud format from extension {suffix!r} of {path}")
    return _EXTENSIONS[suffix]


def _finite_cloud(xyz: np.ndarray, intensity: Optional[np.ndarray], path: PathLike) -> PointCloud:
    bad = ~np.isfinite(xyz).all(axis=1)
    if bad.any():
        rec = int(np.flatnonzero(bad)[0])
        raise IngestionError(f"{path}: non-finite coordinate in record {rec}", record=rec)
    if intensity is not None and not np.isfinite(intensity).all():
        rec = int(np.flatnonzero(~np.isfinite(intensity))[0])
        raise IngestionError(f"{path}: non-finite intensity in record {rec}", record=rec)
    return PointCloud(xyz, intensity)


# --------------------------------------------------------------------------
# readers
# --------------------------------------------------------------------------


def _read_kitti(path: PathLike) -> PointCloud:
    raw = Path(path).read_bytes()
    if len(raw) % 16:
        offset = len(raw) - len(raw) % 16
        raise FormatError(f"{path}: truncated KITTI record at byte offset {offset} "
                          f"(file is {len(raw)} bytes, not a multiple of 16)", offset=offset)
    data = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    return _finite_cloud(data[:, :3], data[:, 3], path)


def _read_ply(path: PathLike) -> PointCloud:
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        if fh.readline().strip() != "ply":
            raise FormatError(f"{path}: missing 'ply' magic line")
        elements = []  # [name, count, [property names]]
        fmt = None
        for line in fh:
            tok = line.split()
            if not tok or tok[0] in ("comment", "obj_info"):
                continue
            if tok[0] == "format":
                fmt = tok[1] if len(tok) > 1 else None
            elif tok[0] == "element":
                elements.append([tok[1], int(tok[2]), []])
            elif tok[0] == "property":
                if not elements:
                    raise FormatError(f"{path}: property before any element")
                if tok[1] == "list":
                    elements[-1][2].append(None)
                else:
                    elements[-1][2].append(tok[-1])
            elif tok[0] == "end_header":
                break
        else:
            raise FormatError(f"{path}: header has no end_header")
        if fmt != "ascii":
            raise FormatError(f"{path}: only ascii PLY is supported (format {fmt})")

        xyz = intensity = None
        for name, count, props in elements:
            rows = [fh.readline() for _ in range(count)]
            if name != "vertex":
                continue
            if any(p is None for p in props):
                raise FormatError(f"{path}: list properties on vertices are not supported")
            missing = [c for c in ("x", "y", "z") if c not in props]
            if missing:
                raise FormatError(f"{path}: vertex element lacks {', '.join(missing)}")
            try:
                table = np.array([r.split() for r in rows], dtype=np.float64).reshape(count, len(props))
            except ValueError as exc:
                raise FormatError(f"{path}: malformed vertex rows ({exc})") from None
            xyz = table[:, [props.index("x"), props.index("y"), props.index("z")]]
            if "intensity" in props:
                intensity = table[:, props.index("intensity")]
        if xyz is None:
            raise FormatError(f"{path}: no vertex element")
    return _finite_cloud(xyz, intensity, path)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _read_csv(path: PathLike) -> PointCloud:
    with open(path, "r") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if lines and not all(_is_number(t) for t in lines[0].split(",")):
        lines = lines[1:]
    if not lines:
        return PointCloud(np.zeros((0, 3)))
    rows = []
    width = None
    for i, ln in enumerate(lines):
        tok = ln.split(",")
        if width is None:
            width = len(tok)
            if width not in (3, 4):
                raise FormatError(f"{path}: expected 3 or 4 columns, record {i} has {width}")
        if len(tok) != width:
            raise FormatError(f"{path}: record {i} has {len(tok)} columns, expected {width}")
        try:
            rows.append([float(t) for t in tok])
        except ValueError:
            raise FormatError(f"{path}: non-numeric value in record {i}") from None
    table = np.array(rows, dtype=np.float64)
    return _finite_cloud(table[:, :3], table[:, 3] if width == 4 else None, path)


_READERS = {
    CloudFormat.KITTI_BIN: _read_kitti,
    CloudFormat.PLY_ASCII: _read_ply,
    CloudFormat.CSV_XYZ: _read_csv,
}


def read_cloud(path: PathLike, fmt=None) -> PointCloud:
    """Read a cloud, preserving record order as point index order."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return _READERS[detect_format(path, fmt)](path)


# --------------------------------------------------------------------------
# writers
# --------------------------------------------------------------------------


def write_cloud(cloud: PointCloud, path: PathLike, fmt=None) -> None:
    fmt = detect_format(path, fmt)
    xyz = cloud.xyz
    inten = cloud.intensity
    if fmt is CloudFormat.KITTI_BIN:
        data = np.zeros((len(cloud), 4), dtype="<f4")
        data[:, :3] = xyz
        if inten is not None:
            data[:, 3] = inten
        Path(path).write_bytes(data.tobytes())
    elif fmt is CloudFormat.PLY_ASCII:
        _write_ply(path, xyz, inten=inten)
    else:
        with open(path, "w") as fh:
            cols = "x,y,z,intensity" if inten is not None else "x,y,z"
            fh.write(cols + "\n")
            table = xyz if inten is None else np.column_stack([xyz, inten])
            for row in table.tolist():
                fh.write(",".join(repr(v) for v in row) + "\n")


def _write_ply(path: PathLike, xyz: np.ndarray, inten=None, rgb=None) -> None:
    header = ["ply", "format ascii 1.0", f"element vertex {xyz.shape[0]}",
              "property double x", "property double y", "property double z"]
    if inten is not None:
        header.append("property double intensity")
    if rgb is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "w") as fh:
        fh.write("\n".join(header) + "\n")
        for i, (x, y, z) in enumerate(xyz.tolist()):
            fields = [repr(x), repr(y), repr(z)]
            if inten is not None:
                fields.append(repr(float(inten[i])))
            if rgb is not None:
                fields += [str(int(c)) for c in rgb[i]]
            fh.write(" ".join(fields) + "\n")


def _make_palette() -> np.ndarray:
    # golden-ratio hue walk gives well-separated neighboring colors
    colors = []
    for i in range(256):
        h = (i * 0.618033988749895) % 1.0
        s = 0.65 + 0.35 * ((i * 7) % 3) / 2
        v = 0.75 + 0.25 * ((i * 5) % 2)
        colors.append([round(255 * c) for c in colorsys.hsv_to_rgb(h, s, v)])
    return np.array(colors, dtype=np.uint8)


PALETTE = _make_palette()
UNLABELED_RGB = (128, 128, 128)


def label_colors(labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    rgb = PALETTE[labels % 256].copy()
    rgb[labels == 0] = UNLABELED_RGB
    return rgb


def write_colored_ply(cloud: PointCloud, labels, path: PathLike) -> None:
    """ASCII PLY with one palette color per label; label 0 is mid-gray."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != len(cloud):
        raise ParameterError(f"{labels.shape[0]} labels for {len(cloud)} points")
    _write_ply(path, cloud.xyz, rgb=label_colors(labels))


def write_labels(labels, path: PathLike) -> None:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    try:
        with open(path, "w", newline="") as fh:
            fh.write("index,label\n")
            fh.writelines(f"{i},{lab}\n" for i, lab in enumerate(labels.tolist()))
    except OSError as exc:
        raise OSError(f"cannot write labels to {path}: {exc}") from exc


def read_labels(path: PathLike) -> np.ndarray:
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "index,label":
        raise FormatError(f"{path}: expected header 'index,label'")
    out = []
    for row, ln in enumerate(lines[1:]):
        if not ln.strip():
            continue
        try:
            idx, lab = (int(t) for t in ln.split(","))
        except ValueError:
            raise FormatError(f"{path}: malformed label row {row}") from None
        if idx != len(out):
            raise FormatError(f"{path}: row {row} has index {idx}, expected {len(out)}")
        if lab < 0:
            raise FormatError(f"{path}: negative label in row {row}")
        out.append(lab)
    return np.array(out, dtype=np.int64)
