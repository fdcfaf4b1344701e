"""File formats: matrix CSV, grayscale PGM (P2/P5) and JSON configs/reports.

Matrix CSV is a ``# rows cols`` header followed by one comma-separated row
per line, each value printed with 17 significant digits so that reading a
file back gives the identical doubles. Vectors are stored as one column.

PGM pixels are mapped to [0, 1] by dividing by ``maxval`` on read; writing
multiplies back and rounds, so P2/P5 round trips are exact.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError

__all__ = [
    "write_matrix_csv",
    "read_matrix_csv",
    "format_matrix_csv",
    "read_pgm",
    "write_pgm",
    "read_json",
    "write_json",
    "dumps_json",
    "check_keys",
]


def format_matrix_csv(M) -> str:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise InputError("only vectors and matrices can be written as CSV")
    if not np.all(np.isfinite(M)):
        raise InputError("matrix has non-finite entries")
    lines = [f"# {M.shape[0]} {M.shape[1]}"]
    lines.extend(",".join(format(v, ".17g") for v in row) for row in M.tolist())
    return "\n".join(lines) + "\n"


def write_matrix_csv(path, M) -> None:
    Path(path).write_text(format_matrix_csv(M))


def read_matrix_csv(path) -> np.ndarray:
    """Read a matrix CSV file; raises :class:`ParseError` with the line number."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty matrix file", line=1)
    head = lines[0].split()
    if len(head) != 3 or head[0] != "#":
        raise ParseError("expected header '# rows cols'", line=1)
    try:
        rows, cols = int(head[1]), int(head[2])
    except ValueError:
        raise ParseError("header dimensions are not integers", line=1) from None
    if rows < 0 or cols < 0:
        raise ParseError("negative dimensions in header", line=1)
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != rows:
        raise ParseError(f"header declares {rows} rows, found {len(body)}", line=min(len(lines), rows + 1) + 1)
    out = np.empty((rows, cols))
    for i, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != cols:
            raise ParseError(f"expected {cols} values, found {len(fields)}", line=i + 2)
        for j, f in enumerate(fields):
            try:
                v = float(f)
            except ValueError:
                raise ParseError(f"not a number: {f.strip()!r}", line=i + 2) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {f.strip()!r}", line=i + 2)
            out[i, j] = v
    return out


class _PgmReader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def line(self) -> int:
        return self.data.count(b"\n", 0, self.pos) + 1

    def fail(self, msg):
        raise ParseError(msg, line=self.line(), offset=self.pos)

    def skip_space(self):
        d = self.data
        while self.pos < len(d):
            c = d[self.pos : self.pos + 1]
            if c == b"#":
                end = d.find(b"\n", self.pos)
                self.pos = len(d) if end < 0 else end + 1
            elif c.isspace():
                self.pos += 1
            else:
                break

    def token(self) -> bytes:
        self.skip_space()
        start = self.pos
        d = self.data
        while self.pos < len(d) and not d[self.pos : self.pos + 1].isspace() and d[self.pos : self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            self.fail("unexpected end of file")
        return d[start : self.pos]

    def integer(self, what) -> int:
        at = self.pos
        tok = self.token()
        self.last = self.pos - len(tok)
        if not tok.isdigit():
            self.pos = at
            self.skip_space()
            self.fail(f"expected {what}, found {tok[:16]!r}")
        return int(tok)


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a P2 or P5 image; returns ``(pixels / maxval, maxval)``."""
    rd = _PgmReader(Path(path).read_bytes())
    magic = rd.token()
    if magic not in (b"P2", b"P5"):
        rd.pos = 0
        rd.fail(f"not a PGM file (magic {magic[:4]!r})")
    width = rd.integer("width")
    width_at = rd.last
    height = rd.integer("height")
    height_at = rd.last
    maxval = rd.integer("maxval")
    end = rd.pos
    if width < 1 or height < 1:
        rd.pos = width_at if width < 1 else height_at
        rd.fail("image dimensions must be positive")
    if not 1 <= maxval <= 65535:
        rd.pos = rd.last
        rd.fail(f"maxval {maxval} outside 1..65535")
    rd.pos = end
    count = width * height
    if magic == b"P2":
        vals = np.empty(count, dtype=np.int64)
        for k in range(count):
            vals[k] = rd.integer("pixel value")
    else:
        # exactly one whitespace byte separates the header from the raster
        rd.pos += 1
        nbytes = 1 if maxval < 256 else 2
        raw = rd.data[rd.pos : rd.pos + count * nbytes]
        if len(raw) < count * nbytes:
            rd.pos = len(rd.data)
            rd.fail(f"raster truncated: expected {count * nbytes} bytes, found {len(raw)}")
        dtype = np.uint8 if nbytes == 1 else np.dtype(">u2")
        vals = np.frombuffer(raw, dtype=dtype).astype(np.int64)
    if vals.size and vals.max() > maxval:
        bad = int(np.argmax(vals > maxval))
        raise ParseError(f"pixel {bad} exceeds maxval {maxval}", line=rd.line(), offset=rd.pos)
    return vals.reshape(height, width) / maxval, maxval


def write_pgm(path, image, maxval: int = 255, binary: bool = True) -> None:
    """Write ``image`` (values in [0, 1], clipped) as P5 (binary) or P2."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise InputError("PGM images must be 2-D")
    if not 1 <= int(maxval) <= 65535:
        raise InputError("maxval must be in 1..65535")
    if not np.all(np.isfinite(img)):
        raise InputError("image has non-finite pixels")
    vals = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = img.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{int(maxval)}\n".encode()
    if binary:
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        body = vals.astype(dtype).tobytes()
    else:
        body = ("\n".join(" ".join(str(v) for v in row) for row in vals.tolist()) + "\n").encode()
    Path(path).write_bytes(header + body)


def read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno, offset=exc.pos) from None
    if not isinstance(d, dict):
        raise ParseError("top-level JSON value must be an object", line=1, offset=0)
    return d


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    """Deterministic JSON (sorted keys; non-finite floats become null)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def check_keys(d: dict, allowed, where: str) -> None:
    extra = set(d) - set(allowed)
    if extra:
        raise InputError(f"unknown {where} keys: {', '.join(sorted(extra))}")


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
