"""JSON instance files: schema, parsing and canonical serialization.

All indices in files are 1-based.  Complex values are ``[re, im]`` pairs.
Cartesian moment slots are ``[mode, bar]`` (bar false for q, true for p);
greek slots are ``[[j, k], bar]`` with j <= k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import scipy.sparse as sp

from .encoding import n_pairs, pair_from_index, pair_index
from .errors import InstanceParseError, StructuralError
from .hamiltonian import QuadraticHamiltonian, SparseSymmetricMatrix
from .readout import IndexSetSpec, format_index_set, parse_index_set

VERSION = "boson-moments/1"

_TRIPLET = {
    "type": "array",
    "items": {
        "type": "array",
        "prefixItems": [{"type": "integer", "minimum": 1}, {"type": "integer", "minimum": 1}, {"type": "number"}],
        "minItems": 3,
        "maxItems": 3,
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "M", "A", "C"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": VERSION},
        "M": {"type": "integer", "minimum": 1},
        "mode": {"enum": ["cartesian-input", "greek-input"]},
        "A": _TRIPLET,
        "C": _TRIPLET,
        "F": _TRIPLET,
        "order_max": {"type": "integer", "minimum": 0},
        "moments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["indices", "value"],
                "additionalProperties": False,
                "properties": {
                    "indices": {"type": "array", "minItems": 1},
                    "value": {
                        "type": "array",
                        "prefixItems": [{"type": "number"}, {"type": "number"}],
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
        },
        "readout": {"type": "string"},
        "times": {"type": "array", "items": {"type": "number"}},
        "decision": {
            "type": "object",
            "required": ["a", "b"],
            "additionalProperties": False,
            "properties": {"a": {"type": "number"}, "b": {"type": "number"}, "gap": {"type": "number", "minimum": 0}},
        },
    },
}

_CARTESIAN_SLOT = {
    "type": "array",
    "prefixItems": [{"type": "integer", "minimum": 1}, {"type": "boolean"}],
    "minItems": 2,
    "maxItems": 2,
}
_GREEK_SLOT = {
    "type": "array",
    "prefixItems": [
        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
        {"type": "boolean"},
    ],
    "minItems": 2,
    "maxItems": 2,
}


@dataclass(frozen=True)
class Instance:
    """Parsed instance.  Moment keys are 0-based linear indices: cartesian
    ``a`` in [0, 2M) or greek ``g`` in [0, 2K), depending on ``mode``."""

    hamiltonian: QuadraticHamiltonian
    mode: str = "cartesian-input"
    moments: tuple[tuple[tuple[int, ...], complex], ...] = ()
    order_max: int | None = None
    readout: IndexSetSpec | None = None
    times: tuple[float, ...] = (0.0,)
    decision: dict | None = None
    version: str = VERSION

    @property
    def M(self) -> int:
        return self.hamiltonian.M

    def moment_map(self) -> dict[tuple[int, ...], complex]:
        out: dict[tuple[int, ...], complex] = {}
        for key, value in self.moments:
            out[key] = out.get(key, 0.0) + value
        return out

    def resolved_order_max(self) -> int:
        if self.order_max is not None:
            return self.order_max
        return max((len(k) for k, _ in self.moments), default=1)


def _triplets_upper(entries, M: int, name: str) -> SparseSymmetricMatrix:
    trip = []
    for r, c, v in entries:
        if r > M or c > M:
            raise InstanceParseError(f"{name}: entry ({r}, {c}) outside M={M}")
        trip.append((r - 1, c - 1, v))
    try:
        return SparseSymmetricMatrix.from_triplets(M, trip)
    except StructuralError as exc:
        raise InstanceParseError(f"{name}: {exc}") from exc


def _parse_key(slots, mode: str, M: int, where: str) -> tuple[int, ...]:
    schema = _CARTESIAN_SLOT if mode == "cartesian-input" else _GREEK_SLOT
    key = []
    for s_idx, slot in enumerate(slots):
        try:
            jsonschema.validate(slot, schema)
        except jsonschema.ValidationError as exc:
            raise InstanceParseError(f"{where}/indices/{s_idx}: {exc.message}") from exc
        if mode == "cartesian-input":
            mode_idx, bar = slot
            if mode_idx > M:
                raise InstanceParseError(f"{where}/indices/{s_idx}: mode {mode_idx} > M={M}")
            key.append(mode_idx - 1 + (M if bar else 0))
        else:
            (j, k), bar = slot
            if not j <= k <= M:
                raise InstanceParseError(f"{where}/indices/{s_idx}: pair ({j}, {k}) invalid for M={M}")
            key.append(int(bar) * n_pairs(M) + pair_index(j - 1, k - 1, M))
    return tuple(key)


def parse_instance(data: dict) -> Instance:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InstanceParseError(f"at {path}: {exc.message}") from exc
    M = data["M"]
    A = _triplets_upper(data["A"], M, "A")
    C = _triplets_upper(data["C"], M, "C")
    F = None
    if data.get("F"):
        rows, cols, vals = [], [], []
        seen = set()
        for r, c, v in data["F"]:
            if r > M or c > M or (r, c) in seen:
                raise InstanceParseError(f"F: bad or duplicate entry ({r}, {c})")
            seen.add((r, c))
            rows.append(r - 1)
            cols.append(c - 1)
            vals.append(v)
        F = sp.csr_array((vals, (rows, cols)), shape=(M, M))
    mode = data.get("mode", "cartesian-input")
    moments = []
    for m_idx, entry in enumerate(data.get("moments", [])):
        where = f"moments/{m_idx}"
        key = _parse_key(entry["indices"], mode, M, where)
        re_, im_ = entry["value"]
        moments.append((key, complex(re_, im_)))
    moments.sort(key=lambda kv: (len(kv[0]), kv[0]))
    readout = None
    if "readout" in data:
        try:
            readout = parse_index_set(data["readout"])
        except InstanceParseError as exc:
            raise InstanceParseError(f"at readout: {exc}") from exc
    decision = dict(data["decision"]) if "decision" in data else None
    if decision is not None and not decision["a"] > decision["b"]:
        raise InstanceParseError("at decision: need a > b")
    return Instance(
        hamiltonian=QuadraticHamiltonian(A, C, F),
        mode=mode,
        moments=tuple(moments),
        order_max=data.get("order_max"),
        readout=readout,
        times=tuple(float(t) for t in data.get("times", [0.0])),
        decision=decision,
        version=data["version"],
    )


def load_instance(path: str | Path) -> Instance:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InstanceParseError(f"{path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_instance(data)


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def serialize_instance(inst: Instance) -> dict:
    """Canonical JSON form: sorted triplets, sorted moments, 1-based indices."""
    M = inst.M
    H = inst.hamiltonian
    out: dict = {"version": inst.version, "M": M, "mode": inst.mode}
    out["A"] = [[r + 1, c + 1, _num(v)] for r, c, v in H.A.entries]
    out["C"] = [[r + 1, c + 1, _num(v)] for r, c, v in H.C.entries]
    if H.has_mixed_terms:
        coo = H.F.tocoo()
        out["F"] = sorted([int(r) + 1, int(c) + 1, _num(v)] for r, c, v in zip(coo.row, coo.col, coo.data) if v != 0)
    if inst.order_max is not None:
        out["order_max"] = inst.order_max
    K = n_pairs(M)
    moments = []
    for key, value in sorted(inst.moments, key=lambda kv: (len(kv[0]), kv[0])):
        if inst.mode == "cartesian-input":
            slots = [[a % M + 1, a >= M] for a in key]
        else:
            slots = [[[j + 1, k + 1], g >= K] for g in key for j, k in [pair_from_index(g % K, M)]]
        moments.append({"indices": slots, "value": [_num(value.real), _num(value.imag)]})
    out["moments"] = moments
    if inst.readout is not None:
        out["readout"] = format_index_set(inst.readout)
    out["times"] = [_num(t) for t in inst.times]
    if inst.decision is not None:
        out["decision"] = {k: _num(v) for k, v in sorted(inst.decision.items())}
    return out


def dump_instance(inst: Instance) -> str:
    return json.dumps(serialize_instance(inst), indent=2) + "\n"


def canonical_key(inst: Instance) -> str:
    """Byte-stable fingerprint used to compare instances semantically."""
    return json.dumps(serialize_instance(inst), sort_keys=True)


def dense_F(inst: Instance) -> np.ndarray:
    return inst.hamiltonian.F_dense()
