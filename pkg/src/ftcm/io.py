"""Readers and writers for token, image, label-map and config files.

Binary token files (``.ftcm``) are little-endian::

    b"FTCM" | u32 version | u32 n | u32 c | n*c float64 row-major

IDX3 image files follow the big-endian MNIST layout. CSV uses LF line
endings and 17 significant digits so floats round-trip exactly.
"""

import colorsys
import json
import math
import struct
from pathlib import Path

import numpy as np

from .exceptions import FormatError, InvalidInput
from .pipeline import FtcmConfig

__all__ = [
    "format_float",
    "label_palette",
    "load_config",
    "load_idx",
    "load_image",
    "load_tokens",
    "read_token_file",
    "save_label_ppm",
    "write_idx",
    "write_token_csv",
    "write_token_file",
]

TOKEN_MAGIC = b"FTCM"
TOKEN_VERSION = 1
_TOKEN_HEADER = struct.Struct("<4sIII")
IDX3_MAGIC = 0x00000803
_GOLDEN_ANGLE = 137.50776405003785


def format_float(x):
    return format(float(x), ".17g")


def write_token_file(path, tokens):
    X = np.ascontiguousarray(tokens, dtype="<f8")
    if X.ndim != 2:
        raise InvalidInput(f"tokens must be 2-D, got shape {X.shape}")
    n, c = X.shape
    with open(path, "wb") as fh:
        fh.write(_TOKEN_HEADER.pack(TOKEN_MAGIC, TOKEN_VERSION, n, c))
        fh.write(X.tobytes())


def read_token_file(path):
    data = Path(path).read_bytes()
    if len(data) < _TOKEN_HEADER.size:
        raise FormatError(
            f"{path}: header needs {_TOKEN_HEADER.size} bytes, file has {len(data)}"
        )
    magic, version, n, c = _TOKEN_HEADER.unpack_from(data)
    if magic != TOKEN_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at byte 0, expected {TOKEN_MAGIC!r}")
    if version != TOKEN_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at byte 4")
    expected = n * c * 8
    actual = len(data) - _TOKEN_HEADER.size
    if actual != expected:
        raise FormatError(
            f"{path}: payload at byte {_TOKEN_HEADER.size} should be {expected} bytes "
            f"for {n}x{c} tokens, found {actual}"
        )
    X = np.frombuffer(data, dtype="<f8", offset=_TOKEN_HEADER.size).reshape(n, c)
    bad = np.argwhere(~np.isfinite(X))
    if bad.size:
        i, j = bad[0]
        offset = _TOKEN_HEADER.size + 8 * (i * c + j)
        raise FormatError(f"{path}: non-finite value at byte {offset}")
    return X.astype(np.float64)


def _read_token_csv(path):
    rows = []
    width = None
    with open(path, "r", encoding="ascii", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: not a list of numbers") from None
            if not all(math.isfinite(v) for v in row):
                raise FormatError(f"{path}: line {lineno}: non-finite value")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise FormatError(
                    f"{path}: line {lineno}: expected {width} values, found {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: no tokens")
    return np.array(rows, dtype=np.float64)


def write_token_csv(path_or_file, tokens):
    lines = [",".join(format_float(v) for v in row) for row in np.asarray(tokens)]
    text = "".join(line + "\n" for line in lines)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        Path(path_or_file).write_text(text, encoding="ascii", newline="\n")


def load_tokens(path):
    """Load a token matrix; ``.csv`` is parsed as text, anything else as binary."""
    if str(path).lower().endswith(".csv"):
        return _read_token_csv(path)
    return read_token_file(path)


def write_idx(path, images):
    """Write an (n, h, w) stack of [0, 1] reals or uint8 values as IDX3."""
    arr = np.asarray(images)
    if arr.ndim != 3:
        raise InvalidInput(f"images must have shape (n, h, w), got {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    n, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX3_MAGIC, n, h, w))
        fh.write(arr.tobytes())


def load_idx(path, normalize=True):
    """Read an IDX3 image file.

    Returns
    -------
    images : ndarray of shape (n, h, w)
        Values scaled to [0, 1] when ``normalize`` is set, raw uint8 otherwise.
    """
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise FormatError(f"{path}: IDX3 header needs 16 bytes, file has {len(data)}")
    magic, n, h, w = struct.unpack_from(">IIII", data)
    if magic != IDX3_MAGIC:
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX3_MAGIC:08x}")
    expected = n * h * w
    if len(data) - 16 != expected:
        raise FormatError(
            f"{path}: payload at byte 16 should be {expected} bytes for "
            f"{n}x{h}x{w} images, found {len(data) - 16}"
        )
    images = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, h, w)
    if normalize:
        return images.astype(np.float64) / 255.0
    return images.copy()


def _read_pnm(path):
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header at byte {pos}")
        tokens.append(data[start:pos])
    pos += 1
    kind = tokens[0]
    if kind not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported PNM type {kind!r} at byte 0")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PNM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit PNM (maxval 255) supported")
    ch = 1 if kind == b"P5" else 3
    expected = w * h * ch
    if len(data) - pos != expected:
        raise FormatError(
            f"{path}: pixel data at byte {pos} should be {expected} bytes, found {len(data) - pos}"
        )
    img = np.frombuffer(data, dtype=np.uint8, offset=pos).reshape(h, w, ch)
    return img.astype(np.float64) / 255.0


def load_image(path, index=0):
    """Load one image from an IDX3, ``.npy``, ``.pgm`` or ``.ppm`` file."""
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        return _read_pnm(path)
    if suffix == ".npy":
        try:
            img = np.load(path, allow_pickle=False)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        return np.asarray(img, dtype=np.float64)
    images = load_idx(path)
    if not 0 <= index < images.shape[0]:
        raise InvalidInput(f"image index {index} out of range for {images.shape[0]} images")
    return images[index]


def label_palette(n_labels):
    """Deterministic RGB colors, stepping the hue by the golden angle."""
    colors = np.empty((n_labels, 3), dtype=np.uint8)
    for label in range(n_labels):
        hue = (label * _GOLDEN_ANGLE) % 360.0 / 360.0
        r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.95)
        colors[label] = [int(round(r * 255)), int(round(g * 255)), int(round(b * 255))]
    return colors


def save_label_ppm(labels, path, scale=1):
    """Write a label grid as a binary P6 image, ``scale`` pixels per cell."""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise InvalidInput(f"labels must be a non-empty 2-D grid, got {labels.shape}")
    if np.any(labels < 0):
        raise InvalidInput("labels must be non-negative")
    rgb = label_palette(int(labels.max()) + 1)[labels]
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb).tobytes())


def load_config(path=None):
    """Read a JSON run config; missing keys take ``FtcmConfig`` defaults."""
    if path is None:
        return FtcmConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    try:
        return FtcmConfig.from_dict(raw)
    except InvalidInput as exc:
        raise FormatError(f"{path}: {exc}") from exc
