"""JSON encodings for matrices, POVMs, devices and reports.

A complex entry is ``[re, im]``; a matrix is a list of rows of entries.
Floats go through ``json``'s shortest round-trip repr, so decoding an
encoded matrix returns bit-identical values.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import DensityMatrix, MeasurementModelError, Povm, Rank1Pvm, validate_povm
from .device import NoisyDevice


class SchemaError(ValueError):
    pass


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    try:
        a = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    if a.ndim != 3 or a.shape[0] != a.shape[1] or a.shape[2] != 2:
        raise SchemaError(f"expected a d x d x 2 array, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def povm_to_json(povm) -> dict:
    effects = povm.effects if isinstance(povm, Povm) else np.asarray(povm)
    return {"dim": int(effects.shape[1]), "effects": [matrix_to_json(e) for e in effects]}


def _require(data, key, kind=None):
    if not isinstance(data, dict) or key not in data:
        raise SchemaError(f"missing field {key!r}")
    v = data[key]
    if kind is not None and not isinstance(v, kind):
        raise SchemaError(f"field {key!r} has wrong type")
    return v


def effects_from_json(data) -> np.ndarray:
    dim = _require(data, "dim", int)
    effects = [matrix_from_json(e) for e in _require(data, "effects", list)]
    if not effects or any(e.shape != (dim, dim) for e in effects):
        raise SchemaError("effect shapes disagree with dim")
    return np.stack(effects)


def povm_from_json(data, **tol) -> Povm:
    return validate_povm(effects_from_json(data), **tol)


def pvm_to_json(pvm: Rank1Pvm) -> dict:
    return {"dim": pvm.dim, "basis": [[[float(z.real), float(z.imag)] for z in pvm.basis[:, k]] for k in range(pvm.dim)]}


def pvm_from_json(data) -> Rank1Pvm:
    dim = _require(data, "dim", int)
    vecs = np.array(_require(data, "basis", list), dtype=float)
    if vecs.shape != (dim, dim, 2):
        raise SchemaError("basis must hold dim vectors of dim [re, im] entries")
    return Rank1Pvm((vecs[..., 0] + 1j * vecs[..., 1]).T)


def device_to_json(dev: NoisyDevice) -> dict:
    out = {"povm": povm_to_json(dev.povm), "seed": dev.seed}
    if dev.output_states is not None:
        out["output_states"] = [matrix_to_json(s.matrix) for s in dev.output_states]
    return out


def device_from_json(data, stream_id: int = 0) -> NoisyDevice:
    povm = povm_from_json(_require(data, "povm", dict))
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise SchemaError("seed must be an integer")
    outs = data.get("output_states")
    states = None if outs is None else [DensityMatrix(matrix_from_json(m)) for m in outs]
    return NoisyDevice(povm, states, seed=seed, stream_id=stream_id)


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, MeasurementModelError):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
