"""Plain and binary PGM (P2/P5) grayscale images, pixel values scaled to [0, 1]."""

import numpy as np

from .errors import GRPDALError, InvalidArgument


class PGMError(GRPDALError):
    """Malformed PGM data; ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _tokens(data, pos, count):
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PGMError("unexpected end of header", start)
        tok = data[start:pos]
        if not tok.isdigit():
            raise PGMError(f"expected an unsigned integer, got {tok[:16]!r}", start)
        out.append((int(tok), start))
    return out, pos


def parse_pgm(data):
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"bad magic number {magic!r}", 0)
    toks, pos = _tokens(data, 2, 3)
    (w, ow), (h, oh), (maxval, om) = toks
    if w < 1:
        raise PGMError("width must be positive", ow)
    if h < 1:
        raise PGMError("height must be positive", oh)
    if not 1 <= maxval <= 65535:
        raise PGMError(f"maxval {maxval} outside [1, 65535]", om)
    if magic == b"P2":
        vals, _ = _tokens(data, pos, w * h)
        pix = np.array([v for v, _ in vals], dtype=float)
        for v, off in vals:
            if v > maxval:
                raise PGMError(f"sample {v} exceeds maxval {maxval}", off)
    else:
        if pos >= len(data) or not data[pos:pos + 1].isspace():
            raise PGMError("missing whitespace after maxval", pos)
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = w * h * dtype.itemsize
        if len(data) - pos < need:
            raise PGMError(f"raster truncated: need {need} bytes, have {len(data) - pos}", pos)
        pix = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).astype(float)
        if pix.max(initial=0) > maxval:
            bad = int(np.argmax(pix > maxval))
            raise PGMError(f"sample exceeds maxval {maxval}", pos + bad * dtype.itemsize)
    return pix.reshape(h, w) / maxval


def read_pgm(path):
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(image, binary=True, maxval=255):
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise InvalidArgument("PGM images must be non-empty 2-D arrays")
    if not 1 <= maxval <= 65535:
        raise InvalidArgument("maxval must lie in [1, 65535]")
    if not np.all(np.isfinite(img)):
        raise InvalidArgument("image contains non-finite values")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = img.shape
    header = f"{'P5' if binary else 'P2'}\n{w} {h}\n{maxval}\n".encode()
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        return header + q.astype(dtype).tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in q)
    return header + rows.encode() + b"\n"


def write_pgm(path, image, binary=True, maxval=255):
    """Values are clipped to [0, 1] and quantized to ``maxval`` levels."""
    data = encode_pgm(image, binary, maxval)
    with open(path, "wb") as fh:
        fh.write(data)
