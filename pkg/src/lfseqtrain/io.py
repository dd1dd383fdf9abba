"""File formats for tables, targets, LMs, datasets and toy models.

Binary posterior table (little-endian)::

    b"LFTR" | u32 version | u32 T | u32 k | u32 V | f64[T * n_ctx * (V + 1)]

with values ordered (frame, context code, symbol), blank last.  The JSON
form stores the same fields and the same flat ordering under ``log_probs``.
Non-finite floats are written as JSON ``-Infinity``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from lfseqtrain.core import PosteriorTable, Vocabulary, context_space
from lfseqtrain.lm import NGramPhonemeLM
from lfseqtrain.toytrain import ToyDataset, ToyModel

MAGIC = b"LFTR"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class FormatError(ValueError):
    pass


def table_to_bytes(table: PosteriorTable) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, table.T, table.k, table.V) + table.values.astype("<f8").tobytes()


def table_from_bytes(data: bytes, check: bool = True) -> PosteriorTable:
    if len(data) < _HEADER.size:
        raise FormatError("file too short for a table header")
    magic, version, T, k, V = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("bad magic")
    if version != VERSION:
        raise FormatError(f"unsupported table version {version}")
    n_ctx = context_space(V, k).size
    count = T * n_ctx * (V + 1)
    body = data[_HEADER.size :]
    if len(body) != 8 * count:
        raise FormatError(f"expected {count} values, found {len(body) / 8:g}")
    values = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(T, n_ctx, V + 1)
    return PosteriorTable(values, k, Vocabulary(V), check=check)


def table_to_json(table: PosteriorTable) -> dict:
    return {
        "format": "LFTR",
        "version": VERSION,
        "T": table.T,
        "k": table.k,
        "V": table.V,
        "log_probs": table.values.reshape(-1).tolist(),
    }


def table_from_json(obj: dict, check: bool = True) -> PosteriorTable:
    try:
        T, k, V = int(obj["T"]), int(obj["k"]), int(obj["V"])
        values = np.asarray(obj["log_probs"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"malformed table JSON: {err}") from err
    n_ctx = context_space(V, k).size
    if values.size != T * n_ctx * (V + 1):
        raise FormatError("log_probs length does not match T, k, V")
    return PosteriorTable(values.reshape(T, n_ctx, V + 1), k, Vocabulary(V), check=check)


def save_table(table: PosteriorTable, path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(table_to_json(table)))
    else:
        path.write_bytes(table_to_bytes(table))


def load_table(path, check: bool = True) -> PosteriorTable:
    data = Path(path).read_bytes()
    if data[:4] == MAGIC:
        return table_from_bytes(data, check)
    try:
        obj = json.loads(data)
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FormatError(f"{path} is neither a binary nor a JSON table") from err
    if not isinstance(obj, dict):
        raise FormatError("table JSON must be an object")
    return table_from_json(obj, check)


def load_target(path) -> tuple[int, ...]:
    """A JSON list of label ids, or an object with a ``target`` list."""
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise FormatError(f"malformed target file: {err}") from err
    if isinstance(obj, dict):
        obj = obj.get("target")
    if not isinstance(obj, list) or not all(isinstance(a, int) and not isinstance(a, bool) for a in obj):
        raise FormatError("target must be a list of integer label ids")
    return tuple(obj)


def save_target(target, path) -> None:
    Path(path).write_text(json.dumps(list(target)))


def lm_to_json(lm: NGramPhonemeLM) -> dict:
    return {"k": lm.k, "vocab": lm.vocab_size, "kappa": lm.kappa, "log_probs": lm.log_probs.reshape(-1).tolist()}


def lm_from_json(obj: dict) -> NGramPhonemeLM:
    try:
        k, V = int(obj["k"]), int(obj["vocab"])
        n_ctx = context_space(V, k).size
        values = np.asarray(obj["log_probs"], dtype=np.float64).reshape(n_ctx, V)
        return NGramPhonemeLM(k, V, values, float(obj.get("kappa", 1.0)))
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"malformed LM JSON: {err}") from err


def save_lm(lm: NGramPhonemeLM, path) -> None:
    Path(path).write_text(json.dumps(lm_to_json(lm)))


def load_lm(path) -> NGramPhonemeLM:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise FormatError(f"malformed LM file: {err}") from err
    return lm_from_json(obj)


def save_dataset(data: ToyDataset, path) -> None:
    lines = [json.dumps({"features": list(f), "target": list(t)}) for f, t in data.utterances]
    Path(path).write_text("".join(line + "\n" for line in lines))


def load_dataset(path, vocab_size: int | None = None, n_features: int | None = None) -> ToyDataset:
    """Read JSON-lines utterances; sizes default to the largest ids seen."""
    utts = []
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            feats = tuple(int(f) for f in obj["features"])
            target = tuple(int(a) for a in obj["target"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise FormatError(f"line {n}: {err}") from err
        utts.append((feats, target))
    if not utts:
        raise FormatError("dataset is empty")
    if vocab_size is None:
        vocab_size = max((max(t) for _, t in utts if t), default=0) + 1
    if n_features is None:
        n_features = max(max(f) for f, _ in utts) + 1
    try:
        return ToyDataset(vocab_size, n_features, utts)
    except ValueError as err:
        raise FormatError(str(err)) from err


def model_to_json(model: ToyModel) -> dict:
    return {
        "features": model.n_features,
        "vocab": model.vocab_size,
        "k": model.k,
        "logits": model.logits.reshape(-1).tolist(),
    }


def model_from_json(obj: dict) -> ToyModel:
    try:
        F, V, k = int(obj["features"]), int(obj["vocab"]), int(obj["k"])
        n_ctx = context_space(V, k).size
        logits = np.asarray(obj["logits"], dtype=np.float64).reshape(F, n_ctx, V + 1)
        return ToyModel(F, V, k, logits)
    except (KeyError, TypeError, ValueError) as err:
        raise FormatError(f"malformed model JSON: {err}") from err


def save_model(model: ToyModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model)))


def load_model(path) -> ToyModel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise FormatError(f"malformed model file: {err}") from err
    return model_from_json(obj)
