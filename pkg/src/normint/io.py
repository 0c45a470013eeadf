"""File formats: PFM float rasters, binary PGM masks, OBJ height-field
meshes, and metric/energy reports."""

from __future__ import annotations

import csv

import numpy as np


class FileFormatError(ValueError):
    pass


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM raster (32-bit floats, rows stored bottom-up).

    A negative scale marks little-endian data, a positive one big-endian;
    the magnitude is ignored. Returns a float32 array in top-down row order.
    """
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise FileFormatError(f"not a grayscale PFM file: header {header!r}")
        dims = f.readline().split()
        if len(dims) != 2:
            raise FileFormatError("malformed PFM dimensions line")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as exc:
            raise FileFormatError("malformed PFM dimensions line") from exc
        if width <= 0 or height <= 0:
            raise FileFormatError("non-positive PFM dimensions")
        try:
            scale = float(f.readline())
        except ValueError as exc:
            raise FileFormatError("malformed PFM scale line") from exc
        if scale == 0:
            raise FileFormatError("zero PFM scale")
        count = width * height
        raw = f.read(4 * count)
        if len(raw) != 4 * count:
            raise FileFormatError("PFM payload shorter than header promises")
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(raw, dtype=dtype).astype("<f4")
    return np.flipud(data.reshape(height, width)).copy()


def write_pfm(path, raster, little_endian: bool = True) -> None:
    """Write a grayscale PFM; float32 values round-trip bit-exactly."""
    arr = np.asarray(raster)
    if arr.ndim != 2:
        raise FileFormatError("PFM writer expects a 2-D raster")
    data = np.flipud(arr.astype("<f4" if little_endian else ">f4", copy=False))
    height, width = arr.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{width} {height}\n".encode("ascii"))
        f.write(b"-1.0\n" if little_endian else b"1.0\n")
        f.write(np.ascontiguousarray(data).tobytes())


def _read_pnm_token(f):
    # tokens are separated by whitespace; '#' starts a comment to end of line
    token = b""
    while True:
        ch = f.read(1)
        if not ch:
            raise FileFormatError("unexpected end of PGM header")
        if ch == b"#":
            f.readline()
            continue
        if ch.isspace():
            if token:
                return token
            continue
        token += ch


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255 as a uint8 array."""
    with open(path, "rb") as f:
        if f.read(2) != b"P5":
            raise FileFormatError("not a binary PGM file")
        width = int(_read_pnm_token(f))
        height = int(_read_pnm_token(f))
        maxval = int(_read_pnm_token(f))
        if not 0 < maxval <= 255:
            raise FileFormatError("PGM maxval must be in 1..255")
        raw = f.read(width * height)
        if len(raw) != width * height:
            raise FileFormatError("PGM payload shorter than header promises")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, raster) -> None:
    arr = np.asarray(raster)
    if arr.dtype == bool:
        arr = np.where(arr, 255, 0).astype(np.uint8)
    arr = arr.astype(np.uint8, copy=False)
    height, width = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def write_obj(path, z, inside) -> None:
    """Height-field mesh: one vertex per inside pixel, two triangles per
    fully-inside pixel quad. x points along columns, y along negative rows."""
    z = np.asarray(z, dtype=np.float64)
    inside = np.asarray(inside, dtype=bool)
    h, w = z.shape
    index = np.full((h, w), -1, dtype=np.int64)
    vs, us = np.nonzero(inside.T)
    index[us, vs] = np.arange(us.size)
    with open(path, "w") as f:
        for u, v in zip(us, vs):
            f.write(f"v {v} {-u} {z[u, v]:.9g}\n")
        for u in range(h - 1):
            for v in range(w - 1):
                a = index[u, v]
                b = index[u + 1, v]
                c = index[u, v + 1]
                d = index[u + 1, v + 1]
                if min(a, b, c, d) >= 0:
                    f.write(f"f {a + 1} {b + 1} {d + 1}\n")
                    f.write(f"f {a + 1} {d + 1} {c + 1}\n")


def write_metrics(path, metrics: dict) -> None:
    """Human-readable metrics, one 'key: value' line each."""
    with open(path, "w") as f:
        for key, value in metrics.items():
            f.write(f"{key}: {value}\n")


def write_metrics_csv(path, metrics: dict) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(metrics.keys()))
        writer.writerow(list(metrics.values()))


def write_energy_csv(path, energies) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "energy"])
        for i, e in enumerate(energies):
            writer.writerow([i, repr(float(e))])
