"""On-disk grid formats, hashing and run manifests.

Grids travel as raw little-endian float64 (``.f64``, lossless), lossless
CSV, or 16-bit binary PGM for quick viewing.  Every grid file gets a JSON
sidecar at ``<path>.json`` recording shape, pitch, units and (for PGM) the
min/max needed to undo the affine quantization.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import ImageGrid

__all__ = ["save_grid", "load_grid", "sidecar_path", "sha256_file", "sha256_array", "write_manifest"]

GRID_FORMATS = ("f64", "csv", "pgm")
PGM_MAXVAL = 65535


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _format_of(path: Path) -> str:
    fmt = path.suffix.lstrip(".").lower()
    if fmt not in GRID_FORMATS:
        raise FormatError(f"{path}: unrecognized grid extension {path.suffix!r} (use .f64/.csv/.pgm)")
    return fmt


def _write_sidecar(path: Path, grid: ImageGrid, fmt: str, units: str, extra=None):
    meta = {
        "format": fmt,
        "shape": [grid.n, grid.m],
        "pitch_mm": grid.pitch,
        "units": units,
    }
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _read_sidecar(path: Path) -> dict | None:
    sc = sidecar_path(path)
    if not sc.exists():
        return None
    try:
        return json.loads(sc.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sc}: invalid sidecar JSON: {exc}") from exc


def save_grid(grid: ImageGrid, path, fmt: str | None = None, units: str = "dimensionless"):
    """Write a grid and its sidecar; the format comes from the extension
    unless given explicitly."""
    path = Path(path)
    fmt = fmt or _format_of(path)
    if fmt not in GRID_FORMATS:
        raise FormatError(f"unknown grid format {fmt!r}")
    path.parent.mkdir(parents=True, exist_ok=True)

    if fmt == "f64":
        path.write_bytes(np.ascontiguousarray(grid.data, dtype="<f8").tobytes())
        _write_sidecar(path, grid, fmt, units)
    elif fmt == "csv":
        lines = "\n".join(",".join(repr(v) for v in row) for row in grid.data.tolist())
        path.write_text(lines + "\n")
        _write_sidecar(path, grid, fmt, units)
    else:
        lo = float(grid.data.min())
        hi = float(grid.data.max())
        span = hi - lo
        if span > 0:
            q = np.round((grid.data - lo) / span * PGM_MAXVAL).astype(">u2")
        else:
            q = np.zeros(grid.data.shape, dtype=">u2")
        header = f"P5\n{grid.m} {grid.n}\n{PGM_MAXVAL}\n".encode("ascii")
        path.write_bytes(header + q.tobytes())
        _write_sidecar(path, grid, fmt, units, {"min": lo, "max": hi})


def load_grid(path) -> ImageGrid:
    path = Path(path)
    fmt = _format_of(path)
    if fmt == "f64":
        return _load_f64(path)
    if fmt == "csv":
        return _load_csv(path)
    return _load_pgm(path)


def _load_f64(path: Path) -> ImageGrid:
    meta = _read_sidecar(path)
    if meta is None or "shape" not in meta:
        raise FormatError(f"{path}: raw float grids need a sidecar with the shape")
    n, m = (int(v) for v in meta["shape"])
    raw = path.read_bytes()
    if len(raw) != n * m * 8:
        raise FormatError(f"{path}: expected {n * m * 8} bytes for shape {n} x {m}, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8").reshape(n, m)
    return ImageGrid(data, float(meta.get("pitch_mm", 1.0)))


def _load_csv(path: Path) -> ImageGrid:
    meta = _read_sidecar(path) or {}
    rows = []
    width = None
    with open(path) as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise FormatError(f"{path}: ragged row {row_no}: {len(cells)} cells, expected {width}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise FormatError(f"{path}: bad number in row {row_no}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return ImageGrid(np.array(rows), float(meta.get("pitch_mm", 1.0)))


def _load_pgm(path: Path) -> ImageGrid:
    meta = _read_sidecar(path)
    if meta is None or "min" not in meta or "max" not in meta:
        raise FormatError(f"{path}: 16-bit PGM grids need a sidecar with min/max for dequantization")
    raw = path.read_bytes()
    tokens, offset = [], 0
    while len(tokens) < 4:
        if offset >= len(raw):
            raise FormatError(f"{path}: truncated PGM header at byte {offset}")
        ch = raw[offset:offset + 1]
        if ch == b"#":  # comment runs to end of line
            eol = raw.find(b"\n", offset)
            offset = len(raw) if eol < 0 else eol + 1
        elif ch.isspace():
            offset += 1
        else:
            end = offset
            while end < len(raw) and not raw[end:end + 1].isspace():
                end += 1
            tokens.append(raw[offset:end])
            offset = end
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {tokens[0]!r} at byte 0)")
    try:
        m, n, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header near byte {offset}")
    if maxval != PGM_MAXVAL:
        raise FormatError(f"{path}: expected 16-bit PGM (maxval {PGM_MAXVAL}), got {maxval}")
    offset += 1  # single whitespace byte after maxval
    expected = n * m * 2
    if len(raw) - offset != expected:
        raise FormatError(f"{path}: expected {expected} sample bytes at byte {offset}, found {len(raw) - offset}")
    q = np.frombuffer(raw, dtype=">u2", offset=offset).reshape(n, m)
    lo, hi = float(meta["min"]), float(meta["max"])
    data = lo + q.astype(np.float64) / PGM_MAXVAL * (hi - lo)
    return ImageGrid(data, float(meta.get("pitch_mm", 1.0)))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def sha256_array(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def write_manifest(out_dir, command: str, config: dict, artifacts: dict, inputs: dict | None = None) -> Path:
    """Record the fully resolved config and content hashes of all files.

    ``artifacts``/``inputs`` map names to paths; their hashes make a run
    verifiable and reproducible from the manifest alone.
    """
    from . import __version__

    out_dir = Path(out_dir)
    manifest = {
        "tool": "ghostlab",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {name: sha256_file(p) for name, p in (inputs or {}).items()},
        "artifacts": {name: sha256_file(p) for name, p in artifacts.items()},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path
