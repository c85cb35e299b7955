"""Model file format.

A model file is::

    offset  size  content
    0       8     magic b"TMIDSMDL"
    8       4     format version, uint32 little-endian (currently 1)
    12      8     header length H, uint64 little-endian
    20      H     header: UTF-8 JSON, keys sorted, no whitespace
    20+H    S     automaton states, one byte each, value = state - 1,
                  C order over (class, clause, literal)

The header carries hyperparameters, the seed and RNG state, literal
names, class names, standardizer statistics and binarizer edges. Floats
are written with Python's shortest round-trip repr, so a save/load/save
cycle reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binarizer import QuantileBinarizer
from .exceptions import DataError
from .preprocess import standardizer_from_dict, standardizer_to_dict
from .tsetlin import TsetlinMachineClassifier

MAGIC = b"TMIDSMDL"
VERSION = 1
_PREFIX = struct.Struct("<8sIQ")

_TM_PARAMS = ("n_clauses", "T", "s", "epochs", "states_per_action", "clause_budget", "shuffle")


@dataclass
class ModelBundle:
    tm: TsetlinMachineClassifier
    binarizer: QuantileBinarizer | None = None
    scaler: object = None
    class_names: list = field(default_factory=list)
    scenario: str = ""
    meta: dict = field(default_factory=dict)

    def pipeline(self):
        from .pipeline import TsetlinIDS

        params = {k: getattr(self.tm, k) for k in ("n_clauses", "T", "s", "epochs", "states_per_action", "clause_budget")}
        params["n_bins"] = self.binarizer.n_bins
        params["n_classes"] = len(self.tm.classes_)
        params["random_state"] = self.tm.random_state
        return TsetlinIDS.from_parts(self.scaler, self.binarizer, self.tm, **params)


def _header(bundle: ModelBundle):
    tm = bundle.tm
    h = {
        "format": "tmids-model",
        "params": {k: getattr(tm, k) for k in _TM_PARAMS},
        "random_state": tm.random_state,
        "seed": tm.seed_,
        "rng_state": [int(v) for v in tm.rng_state_],
        "classes": [int(c) for c in tm.classes_],
        "shape": list(tm.states_.shape),
        "literal_names": list(tm.feature_names_),
        "clause_fire_freq": [[float(v) for v in row] for row in tm.clause_fire_freq_],
        "trace": tm.trace_,
        "class_names": list(bundle.class_names),
        "scenario": bundle.scenario,
        "meta": bundle.meta,
    }
    if bundle.binarizer is not None:
        h["binarizer"] = bundle.binarizer.to_dict()
    if bundle.scaler is not None:
        h["standardizer"] = standardizer_to_dict(bundle.scaler)
    return h


def dumps(bundle: ModelBundle) -> bytes:
    header = json.dumps(_header(bundle), sort_keys=True, separators=(",", ":")).encode()
    states = (bundle.tm.states_.astype(np.int16) - 1).astype(np.uint8)
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + states.tobytes(order="C")


def loads(data: bytes) -> ModelBundle:
    if len(data) < _PREFIX.size:
        raise DataError("model file is truncated")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise DataError("not a tmids model file")
    if version != VERSION:
        raise DataError(f"unsupported model format version {version}")
    start = _PREFIX.size
    h = json.loads(data[start:start + hlen].decode())
    shape = tuple(h["shape"])
    raw = np.frombuffer(data, dtype=np.uint8, offset=start + hlen)
    if raw.size != int(np.prod(shape)):
        raise DataError(f"state block has {raw.size} bytes, header promises {int(np.prod(shape))}")
    tm = TsetlinMachineClassifier(random_state=h["random_state"], **h["params"])
    tm.n_classes = shape[0]
    tm.classes_ = np.asarray(h["classes"])
    tm.n_features_in_ = shape[2] // 2
    tm.clauses_per_class_ = shape[1]
    tm.states_ = raw.reshape(shape).astype(np.int16) + 1
    tm.seed_ = h["seed"]
    tm.rng_state_ = np.asarray(h["rng_state"], dtype=np.uint64)
    tm.feature_names_ = list(h["literal_names"])
    tm.clause_fire_freq_ = np.asarray(h["clause_fire_freq"], dtype=np.float64).reshape(shape[:2])
    tm.trace_ = h["trace"]
    tm._refresh()
    return ModelBundle(
        tm=tm,
        binarizer=QuantileBinarizer.from_dict(h["binarizer"]) if "binarizer" in h else None,
        scaler=standardizer_from_dict(h["standardizer"]) if "standardizer" in h else None,
        class_names=h["class_names"],
        scenario=h["scenario"],
        meta=h["meta"],
    )


def save_model(path, bundle: ModelBundle):
    """Write atomically: a partial file never replaces a good one."""
    path = Path(path)
    data = dumps(bundle)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_model(path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: model file not found")
    return loads(path.read_bytes())
