"""Binary artifact formats.

All integers and floats are little-endian.

SPMH (pyramid histogram)::

    magic "SPMH" | version u16 | L u16 | M u32 | normalize u8 | weighted u8 |
    reserved u16 | values f64[M * sum(4**l)]

SPMK (kernel matrix)::

    magic "SPMK" | version u16 | tag u8 | flags u8 | n u32 | m u32 | lambda f64 |
    row labels i64[n] (flag 2) | col labels i64[m] (flag 4) | values f64[n*m]

    flags: 1 = lambda present, 2 = row labels, 4 = column labels

SPMM (one-vs-rest SVM model)::

    magic "SPMM" | version u16 | reserved u16 | n_classes u32 | n_train u32 |
    C f64 | tol f64 | max_iter u64 | train labels i64[n_train] |
    per class: class id i64 | bias f64 | n_sv u32 | support u32[n_sv] | coef f64[n_sv]
"""

from __future__ import annotations

import struct

import numpy as np

from .classifier import SvmConfig, SvmModel
from .kernels import DESCRIPTOR_TAGS, GramMatrix
from .pyramid import PyramidConfig, PyramidHistogram

VERSION = 1

_SPMH = struct.Struct("<4sHHIBBH")
_SPMK = struct.Struct("<4sHBBIId")
_SPMM = struct.Struct("<4sHHIIddQ")
_CLASS = struct.Struct("<qdI")

_F64 = np.dtype("<f8")
_I64 = np.dtype("<i8")
_U32 = np.dtype("<u4")


class FormatError(ValueError):
    """A binary artifact is malformed or of the wrong kind."""


def _check_header(raw: bytes, header: struct.Struct, magic: bytes):
    if len(raw) < header.size:
        raise FormatError(f"file too short for a {magic.decode()} header")
    fields = header.unpack_from(raw)
    if fields[0] != magic:
        raise FormatError(f"bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != VERSION:
        raise FormatError(f"unsupported {magic.decode()} version {fields[1]}")
    return fields


class _Reader:
    def __init__(self, raw: bytes, offset: int):
        self.raw, self.pos = raw, offset

    def array(self, dtype, count):
        nbytes = dtype.itemsize * count
        if self.pos + nbytes > len(self.raw):
            raise FormatError("file truncated")
        out = np.frombuffer(self.raw, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return out.astype(dtype.newbyteorder("="))

    def struct(self, st: struct.Struct):
        if self.pos + st.size > len(self.raw):
            raise FormatError("file truncated")
        out = st.unpack_from(self.raw, self.pos)
        self.pos += st.size
        return out

    def finish(self):
        if self.pos != len(self.raw):
            raise FormatError(f"{len(self.raw) - self.pos} trailing bytes")


# --- SPMH -------------------------------------------------------------------

def pyramid_to_bytes(p: PyramidHistogram) -> bytes:
    c = p.config
    head = _SPMH.pack(b"SPMH", VERSION, c.L, c.M, int(c.normalize), int(p.weighted), 0)
    return head + np.ascontiguousarray(p.values, dtype=_F64).tobytes()


def pyramid_from_bytes(raw: bytes) -> PyramidHistogram:
    _, _, L, M, normalize, weighted, _ = _check_header(raw, _SPMH, b"SPMH")
    cfg = PyramidConfig(L=L, M=M, normalize=bool(normalize))
    r = _Reader(raw, _SPMH.size)
    values = r.array(_F64, cfg.length)
    r.finish()
    return PyramidHistogram(cfg, values, weighted=bool(weighted))


def write_pyramid(path, p: PyramidHistogram) -> None:
    with open(path, "wb") as fh:
        fh.write(pyramid_to_bytes(p))


def read_pyramid(path) -> PyramidHistogram:
    with open(path, "rb") as fh:
        return pyramid_from_bytes(fh.read())


def pyramid_to_csv(p: PyramidHistogram) -> str:
    """One row per entry: level, cell, channel, value."""
    lines = ["level,cell,channel,value"]
    for l in range(p.config.L + 1):
        block = p.level_blocks(l)
        for j in range(block.shape[0]):
            for m in range(p.config.M):
                lines.append(f"{l},{j},{m},{float(block[j, m])!r}")
    return "\n".join(lines) + "\n"


# --- SPMK -------------------------------------------------------------------

def gram_to_bytes(g: GramMatrix) -> bytes:
    n, m = g.shape
    flags = (1 if g.lam is not None else 0) | (2 if g.row_labels is not None else 0) \
        | (4 if g.col_labels is not None else 0)
    parts = [_SPMK.pack(b"SPMK", VERSION, DESCRIPTOR_TAGS.index(g.tag), flags, n, m,
                        float(g.lam) if g.lam is not None else 0.0)]
    if g.row_labels is not None:
        parts.append(g.row_labels.astype(_I64).tobytes())
    if g.col_labels is not None:
        parts.append(g.col_labels.astype(_I64).tobytes())
    parts.append(np.ascontiguousarray(g.values, dtype=_F64).tobytes())
    return b"".join(parts)


def gram_from_bytes(raw: bytes) -> GramMatrix:
    _, _, tag, flags, n, m, lam = _check_header(raw, _SPMK, b"SPMK")
    if tag >= len(DESCRIPTOR_TAGS):
        raise FormatError(f"unknown descriptor tag {tag}")
    r = _Reader(raw, _SPMK.size)
    rows = r.array(_I64, n) if flags & 2 else None
    cols = r.array(_I64, m) if flags & 4 else None
    values = r.array(_F64, n * m).reshape(n, m)
    r.finish()
    return GramMatrix(values, DESCRIPTOR_TAGS[tag], rows, cols, lam if flags & 1 else None)


def write_gram(path, g: GramMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(gram_to_bytes(g))


def read_gram(path) -> GramMatrix:
    with open(path, "rb") as fh:
        return gram_from_bytes(fh.read())


def gram_to_csv(g: GramMatrix) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in g.values) + "\n"


# --- SPMM -------------------------------------------------------------------

def model_to_bytes(model: SvmModel) -> bytes:
    cfg = model.config
    parts = [_SPMM.pack(b"SPMM", VERSION, 0, len(model.classes), model.n_train,
                        cfg.C, cfg.tol, cfg.max_iter),
             model.train_labels.astype(_I64).tobytes()]
    for c, idx, coef, b in zip(model.classes, model.support, model.coef, model.bias):
        parts.append(_CLASS.pack(int(c), float(b), len(idx)))
        parts.append(np.asarray(idx, dtype=_U32).tobytes())
        parts.append(np.asarray(coef, dtype=_F64).tobytes())
    return b"".join(parts)


def model_from_bytes(raw: bytes) -> SvmModel:
    _, _, _, n_classes, n_train, C, tol, max_iter = _check_header(raw, _SPMM, b"SPMM")
    r = _Reader(raw, _SPMM.size)
    labels = r.array(_I64, n_train)
    classes, support, coef, bias = [], [], [], []
    for _ in range(n_classes):
        c, b, n_sv = r.struct(_CLASS)
        idx = r.array(_U32, n_sv).astype(np.int64)
        if idx.size and idx.max() >= n_train:
            raise FormatError("support index out of range")
        classes.append(c)
        bias.append(b)
        support.append(idx)
        coef.append(r.array(_F64, n_sv))
    r.finish()
    return SvmModel(np.array(classes, dtype=np.int64), support, coef, np.array(bias),
                    labels, SvmConfig(C=C, tol=tol, max_iter=max_iter))


def write_model(path, model: SvmModel) -> None:
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def read_model(path) -> SvmModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
