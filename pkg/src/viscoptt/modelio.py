"""Portable binary encoding of a ForestModel.

Layout (little-endian)::

    magic   4s   b"VPRF"
    version u16
    flags   u16  (reserved, 0)
    length  u64  payload byte count
    crc32   u32  of the payload
    payload:
      target u8 (0 SBP, 1 DBP)
      n_trees u32, max_depth u32, min_samples_leaf u32, mtry u32,
      rng_seed i64, bootstrap u8, train_count u64
      n_features u8, then per feature: name length u8 + UTF-8 name
      importance f64 * n_features
      per tree: n_nodes u32, then nodes in pre-order
        split: tag u8 = 1, feature u8, threshold f64, left u32, right u32
        leaf:  tag u8 = 0, mean f64

Child offsets are node indices within the tree. Split-node means are not
stored, so a loaded model keeps only what prediction needs.
"""
from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptModel, VersionMismatch
from .forest import ForestHyperparams, ForestModel, Target, Tree

MAGIC = b"VPRF"
VERSION = 1
_HEAD = struct.Struct("<4sHHQI")
_HP = struct.Struct("<BIIIIqBQ")
_SPLIT = struct.Struct("<BdII")
_TARGETS = (Target.SBP, Target.DBP)


def encode_model(model: ForestModel) -> bytes:
    hp = model.hyperparams
    parts = [
        _HP.pack(
            _TARGETS.index(model.target), hp.n_trees, hp.max_depth, hp.min_samples_leaf,
            hp.mtry, hp.rng_seed, int(hp.bootstrap), model.train_count,
        ),
        struct.pack("<B", model.n_features),
    ]
    for name in model.feature_names:
        raw = name.encode()
        parts.append(struct.pack("<B", len(raw)) + raw)
    parts.append(np.asarray(model.importance_raw, dtype="<f8").tobytes())
    for tree in model.trees:
        parts.append(struct.pack("<I", tree.n_nodes))
        for i in range(tree.n_nodes):
            if tree.feature[i] >= 0:
                parts.append(b"\x01" + _SPLIT.pack(
                    int(tree.feature[i]), float(tree.threshold[i]), int(tree.left[i]), int(tree.right[i])
                ))
            else:
                parts.append(b"\x00" + struct.pack("<d", float(tree.value[i])))
    payload = b"".join(parts)
    return _HEAD.pack(MAGIC, VERSION, 0, len(payload), zlib.crc32(payload)) + payload


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, fmt):
        s = struct.Struct(fmt) if isinstance(fmt, str) else fmt
        if self.pos + s.size > len(self.buf):
            raise CorruptModel("model payload truncated")
        out = s.unpack_from(self.buf, self.pos)
        self.pos += s.size
        return out

    def raw(self, n):
        if self.pos + n > len(self.buf):
            raise CorruptModel("model payload truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out


def decode_model(buf: bytes) -> ForestModel:
    if len(buf) < _HEAD.size:
        raise CorruptModel("file shorter than header")
    magic, version, _flags, length, crc = _HEAD.unpack_from(buf)
    if magic != MAGIC:
        raise CorruptModel("bad magic bytes")
    if version != VERSION:
        raise VersionMismatch(f"model version {version}, this build reads {VERSION}")
    payload = buf[_HEAD.size:]
    if len(payload) != length or zlib.crc32(payload) != crc:
        raise CorruptModel("payload length or checksum mismatch")

    r = _Reader(payload)
    tgt, n_trees, max_depth, min_leaf, mtry, seed, boot, count = r.take(_HP)
    if tgt >= len(_TARGETS):
        raise CorruptModel(f"unknown target code {tgt}")
    (n_feat,) = r.take("<B")
    names = tuple(r.raw(r.take("<B")[0]).decode() for _ in range(n_feat))
    importance = np.frombuffer(r.raw(8 * n_feat), dtype="<f8").astype(np.float64)
    trees = []
    for _ in range(n_trees):
        (n_nodes,) = r.take("<I")
        feat = np.full(n_nodes, -1, dtype=np.int64)
        thr = np.zeros(n_nodes)
        left = np.full(n_nodes, -1, dtype=np.int64)
        right = np.full(n_nodes, -1, dtype=np.int64)
        value = np.full(n_nodes, np.nan)
        for i in range(n_nodes):
            (tag,) = r.take("<B")
            if tag == 1:
                feat[i], thr[i], left[i], right[i] = r.take(_SPLIT)
                if not (i < left[i] < n_nodes and i < right[i] < n_nodes and feat[i] < n_feat):
                    raise CorruptModel("split node points outside its tree")
            elif tag == 0:
                (value[i],) = r.take("<d")
            else:
                raise CorruptModel(f"unknown node tag {tag}")
        trees.append(Tree(feat, thr, left, right, value))
    if r.pos != len(payload):
        raise CorruptModel("trailing bytes after last tree")
    hp = ForestHyperparams(n_trees, max_depth, min_leaf, mtry, seed, bool(boot))
    return ForestModel(trees, hp, _TARGETS[tgt], count, names, importance)


def save_model(model: ForestModel, path):
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    data = encode_model(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> ForestModel:
    return decode_model(Path(path).read_bytes())
