"""File formats: PFM disparity maps, PNG/PPM views, the key/value manifest,
and the raw cost-volume debug dump."""

from __future__ import annotations

import re
import struct
from pathlib import Path

import cv2
import numpy as np


def read_pfm(path):
    """Read a PFM file into an (H, W) or (H, W, 3) float32 array, top row first."""
    with open(path, "rb") as fh:
        header = fh.readline().rstrip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise ValueError(f"{path}: not a PFM file")
        dims = re.match(rb"^\s*(\d+)\s+(\d+)\s*$", fh.readline())
        if dims is None:
            raise ValueError(f"{path}: malformed PFM header")
        width, height = map(int, dims.groups())
        scale = float(fh.readline().rstrip())
        endian = "<" if scale < 0 else ">"
        data = np.fromfile(fh, endian + "f4")
    expected = width * height * channels
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} floats, found {data.size}")
    shape = (height, width, 3) if channels == 3 else (height, width)
    # PFM stores the bottom row first
    return np.flipud(data.reshape(shape)).astype(np.float32)


def write_pfm(path, image):
    """Write a 2D or HxWx3 array as little-endian float32 PFM."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 2:
        header = b"Pf\n"
    elif image.ndim == 3 and image.shape[2] == 3:
        header = b"PF\n"
    else:
        raise ValueError("PFM images must be HxW or HxWx3")
    height, width = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(f"{width} {height}\n".encode("ascii"))
        fh.write(b"-1\n")
        fh.write(np.flipud(image).astype("<f4").tobytes())


def read_image(path):
    """Load an 8- or 16-bit PNG/PPM as float64 (H, W, C) in [0, 1], RGB order."""
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FileNotFoundError(path)
    if img.dtype == np.uint8:
        scale = 255.0
    elif img.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ValueError(f"{path}: unsupported sample type {img.dtype}")
    if img.ndim == 2:
        img = img[..., None]
    elif img.shape[2] == 4:
        img = cv2.cvtColor(img, cv2.COLOR_BGRA2RGB)
    else:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    return img.astype(np.float64) / scale


def write_image(path, image, bits=8):
    """Write a [0, 1] float image (HxW, HxWx1 or HxWx3) as an 8- or 16-bit PNG/PPM."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if bits == 8:
        out = np.round(image * 255.0).astype(np.uint8)
    elif bits == 16:
        out = np.round(image * 65535.0).astype(np.uint16)
    else:
        raise ValueError("bits must be 8 or 16")
    if out.ndim == 3:
        out = cv2.cvtColor(out, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), out):
        raise OSError(f"could not write {path}")


def write_label_png(path, labels):
    """Store an integer label map losslessly as a 16-bit PNG."""
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise ValueError("label ids must fit in 16 bits")
    if not cv2.imwrite(str(path), labels.astype(np.uint16)):
        raise OSError(f"could not write {path}")


def disparity_to_png16(path, disparity, lo=None, hi=None):
    """Min-max stretch a disparity map into a 16-bit grayscale visualization."""
    disparity = np.asarray(disparity, dtype=np.float64)
    finite = np.isfinite(disparity)
    lo = np.min(disparity[finite]) if lo is None else lo
    hi = np.max(disparity[finite]) if hi is None else hi
    span = hi - lo if hi > lo else 1.0
    vis = np.where(finite, (disparity - lo) / span, 0.0)
    write_image(path, vis, bits=16)


class ManifestError(ValueError):
    pass


def parse_manifest(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    for key in ("rows", "cols", "pattern"):
        if key not in entries:
            raise ManifestError(f"{path}: missing required key '{key}'")
    return entries


def format_view_name(pattern, row, col):
    """Expand a printf-style pattern; named fields use %(row)d / %(col)d, positional
    fields receive (row, col) in that order."""
    if "%(" in pattern:
        return pattern % {"row": row, "col": col}
    return pattern % (row, col)


_CV_MAGIC = b"LFCV"


def write_cost_volume(path, values):
    """Raw float32 dump: 4-byte magic, uint32 H, W, n_labels (little-endian), data."""
    values = np.asarray(values, dtype="<f4")
    h, w, n = values.shape
    with open(path, "wb") as fh:
        fh.write(_CV_MAGIC)
        fh.write(struct.pack("<3I", h, w, n))
        fh.write(values.tobytes())


def read_cost_volume(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _CV_MAGIC:
            raise ValueError(f"{path}: not a cost volume dump")
        h, w, n = struct.unpack("<3I", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f4")
    return data.reshape(h, w, n)
