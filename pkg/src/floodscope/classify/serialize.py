"""
Binary model container.

Layout (all little-endian)::

    magic        4 bytes  b"FSCM"
    version      uint16   (currently 1)
    kind         uint8    1 forest, 2 svm, 3 naive bayes, 4 minimum distance
    n_features   uint32
    n_classes    uint32
    class names  n_classes x (uint16 length + UTF-8 bytes)
    feature names n_features x (uint16 length + UTF-8 bytes)
    payload      kind-specific, see _PAYLOADS

Arrays are written as raw little-endian buffers whose sizes follow from the
header, so equal models always serialize to equal bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from floodscope.classify.forest import DecisionTree, ForestModel
from floodscope.classify.models import CentroidModel, GaussianNbModel, LinearSvmModel
from floodscope.errors import ModelFormatError
from floodscope.geotiff import atomic_write_bytes

MAGIC = b"FSCM"
VERSION = 1
KIND_CODES = {"forest": 1, "svm": 2, "naive_bayes": 3, "min_distance": 4}


class _Writer:
    def __init__(self):
        self.parts = []

    def pack(self, fmt, *values):
        self.parts.append(struct.pack("<" + fmt, *values))

    def text(self, s):
        raw = s.encode("utf-8")
        self.pack("H", len(raw))
        self.parts.append(raw)

    def array(self, arr, dtype):
        self.parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())

    def getvalue(self):
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if n < 0 or self.pos + n > len(self.data):
            raise ModelFormatError("model file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        size = struct.calcsize("<" + fmt)
        return struct.unpack("<" + fmt, self.take(size))

    def text(self):
        (n,) = self.unpack("H")
        return self.take(n).decode("utf-8")

    def array(self, dtype, shape):
        dtype = np.dtype(dtype)
        count = int(np.prod(shape))
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).reshape(shape)


def serialize_model(model) -> bytes:
    w = _Writer()
    w.parts.append(MAGIC)
    w.pack("HBII", VERSION, KIND_CODES[model.kind], model.n_features, model.n_classes)
    for name in model.class_names:
        w.text(name)
    for name in model.feature_names:
        w.text(name)
    d, C = model.n_features, model.n_classes
    if model.kind == "forest":
        w.pack("IIIIQ", len(model.trees), model.n_features_per_split, model.max_depth, model.min_leaf, model.seed)
        for tree in model.trees:
            w.pack("I", tree.n_nodes)
            w.array(tree.feature, "<i4")
            w.array(tree.threshold, "<f8")
            w.array(tree.left, "<i4")
            w.array(tree.right, "<i4")
            w.array(tree.histogram, "<i8")
    elif model.kind == "svm":
        w.pack("dIQ", model.lam, model.epochs, model.seed)
        w.array(model.weights, "<f8")
        w.array(model.bias, "<f8")
        w.array(model.mean, "<f8")
        w.array(model.scale, "<f8")
    elif model.kind == "naive_bayes":
        w.pack("d", model.epsilon)
        w.array(model.means, "<f8")
        w.array(model.variances, "<f8")
        w.array(model.log_priors, "<f8")
    elif model.kind == "min_distance":
        w.array(model.centroids, "<f8")
    else:  # pragma: no cover - guarded by KIND_CODES lookup above
        raise ModelFormatError(f"unknown model kind {model.kind!r}")
    assert d == len(model.feature_names) and C == len(model.class_names)
    return w.getvalue()


def deserialize_model(data: bytes):
    r = _Reader(bytes(data))
    if r.take(4) != MAGIC:
        raise ModelFormatError("not a floodscope model file (bad magic)")
    version, code, d, C = r.unpack("HBII")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    kinds = {v: k for k, v in KIND_CODES.items()}
    if code not in kinds:
        raise ModelFormatError(f"unknown model kind code {code}")
    class_names = tuple(r.text() for _ in range(C))
    feature_names = tuple(r.text() for _ in range(d))
    kind = kinds[code]
    if kind == "forest":
        n_trees, k, max_depth, min_leaf, seed = r.unpack("IIIIQ")
        trees = []
        for _ in range(n_trees):
            (n_nodes,) = r.unpack("I")
            trees.append(
                DecisionTree(
                    r.array("<i4", (n_nodes,)),
                    r.array("<f8", (n_nodes,)),
                    r.array("<i4", (n_nodes,)),
                    r.array("<i4", (n_nodes,)),
                    r.array("<i8", (n_nodes, C)),
                )
            )
        model = ForestModel(tuple(trees), k, seed, class_names, feature_names, max_depth, min_leaf)
    elif kind == "svm":
        lam, epochs, seed = r.unpack("dIQ")
        model = LinearSvmModel(
            r.array("<f8", (C, d)), r.array("<f8", (C,)), r.array("<f8", (d,)), r.array("<f8", (d,)),
            lam, epochs, seed, class_names, feature_names,
        )
    elif kind == "naive_bayes":
        (eps,) = r.unpack("d")
        model = GaussianNbModel(
            r.array("<f8", (C, d)), r.array("<f8", (C, d)), r.array("<f8", (C,)), eps,
            class_names, feature_names,
        )
    else:
        model = CentroidModel(r.array("<f8", (C, d)), class_names, feature_names)
    if r.pos != len(r.data):
        raise ModelFormatError(f"{len(r.data) - r.pos} trailing bytes after model payload")
    return model


def save_model(path, model) -> None:
    atomic_write_bytes(path, serialize_model(model))


def load_model(path):
    return deserialize_model(Path(path).read_bytes())
