"""Reading and writing model description files.

A model file is JSON: real numbers stay plain, complex entries are [re, im]
pairs, matrices are lists of rows.  Validation is two-stage: structural
(JSON Schema, errors carry their JSON path) and physical (dimensions, label
cross-references, then the full build with its own certificates).
"""

import json

import numpy as np
from jsonschema import Draft202012Validator

from .chains import MarkovChain
from .models import MrisModel, ProbeSpec, TimeReversalData, build_model
from .tolerances import DEFAULT, FIELD_NAMES, Tolerances

SCHEMA_VERSION = 1


class ModelFileError(ValueError):
    pass


_NUMBER = {"type": "number"}
_COMPLEX = {
    "oneOf": [
        _NUMBER,
        {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2},
    ]
}
_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _COMPLEX}}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "system", "omega", "probes", "chain",
                 "initial_states"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "system": {
            "type": "object",
            "required": ["dim", "H_S"],
            "additionalProperties": False,
            "properties": {
                "dim": {"type": "integer", "minimum": 1},
                "H_S": _MATRIX,
            },
        },
        "omega": {"type": "array", "minItems": 1,
                  "items": {"type": "string", "minLength": 1},
                  "uniqueItems": True},
        "probes": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": {
                "type": "object",
                "required": ["H_E", "beta", "tau", "V"],
                "additionalProperties": False,
                "properties": {
                    "H_E": _MATRIX,
                    "beta": {"type": "number", "minimum": 0},
                    "tau": {"type": "number", "exclusiveMinimum": 0},
                    "V": _MATRIX,
                },
            },
        },
        "chain": {
            "type": "object",
            "required": ["pi", "P"],
            "additionalProperties": False,
            "properties": {
                "pi": {"type": "array", "minItems": 1, "items": _NUMBER},
                "P": {"type": "array", "minItems": 1,
                      "items": {"type": "array", "minItems": 1, "items": _NUMBER}},
            },
        },
        "initial_states": {
            "type": "object",
            "minProperties": 1,
            "additionalProperties": _MATRIX,
        },
        "tri": {
            "type": "object",
            "required": ["W_S", "W_E"],
            "additionalProperties": False,
            "properties": {
                "W_S": _MATRIX,
                "W_E": {"type": "object", "additionalProperties": _MATRIX},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
    },
}

_VALIDATOR = Draft202012Validator(MODEL_SCHEMA)


def _parse_entry(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x, 0.0)
    return complex(x[0], x[1])


def _parse_matrix(rows, path: str) -> np.ndarray:
    mat = np.array([[_parse_entry(x) for x in row] for row in rows], dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ModelFileError(f"{path}: matrix must be square, got {mat.shape}")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise ModelFileError(f"{path}: rows differ in length")
    return mat


def parse_model_dict(doc: dict, tol: Tolerances = None) -> MrisModel:
    """Validate a parsed JSON document and build the model it describes."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ModelFileError(f"{e.json_path}: {e.message}")

    labels = tuple(doc["omega"])
    d = doc["system"]["dim"]
    h_sys = _parse_matrix(doc["system"]["H_S"], "$.system.H_S")
    if h_sys.shape != (d, d):
        raise ModelFileError(
            f"$.system.H_S: shape {h_sys.shape} does not match dim {d}")

    for key, section in (("probes", doc["probes"]),
                         ("initial_states", doc["initial_states"])):
        missing = set(labels) - set(section)
        extra = set(section) - set(labels)
        if missing:
            raise ModelFileError(f"$.{key}: missing entries for {sorted(missing)}")
        if extra:
            raise ModelFileError(f"$.{key}: entries for unknown labels {sorted(extra)}")

    m = len(labels)
    pi = np.asarray(doc["chain"]["pi"], dtype=float)
    p_mat = np.asarray(doc["chain"]["P"], dtype=float)
    if pi.shape != (m,):
        raise ModelFileError(f"$.chain.pi: expected {m} entries, got {pi.shape[0]}")
    if p_mat.shape != (m, m):
        raise ModelFileError(f"$.chain.P: expected {m}x{m}, got {p_mat.shape}")

    probes = {}
    for l in labels:
        spec = doc["probes"][l]
        h_env = _parse_matrix(spec["H_E"], f"$.probes.{l}.H_E")
        v = _parse_matrix(spec["V"], f"$.probes.{l}.V")
        if v.shape != (d * h_env.shape[0],) * 2:
            raise ModelFileError(
                f"$.probes.{l}.V: shape {v.shape} does not match "
                f"dim_sys * dim_env = {d * h_env.shape[0]}")
        probes[l] = ProbeSpec(h_env=h_env, beta=float(spec["beta"]),
                              tau=float(spec["tau"]), coupling=v)

    rho_init = {l: _parse_matrix(doc["initial_states"][l], f"$.initial_states.{l}")
                for l in labels}

    tri = None
    if "tri" in doc:
        w_e_doc = doc["tri"]["W_E"]
        missing = set(labels) - set(w_e_doc)
        if missing:
            raise ModelFileError(f"$.tri.W_E: missing entries for {sorted(missing)}")
        tri = TimeReversalData(
            w_sys=_parse_matrix(doc["tri"]["W_S"], "$.tri.W_S"),
            w_env={l: _parse_matrix(w_e_doc[l], f"$.tri.W_E.{l}") for l in labels})

    if tol is None:
        overrides = doc.get("tolerances", {})
        unknown = set(overrides) - set(FIELD_NAMES)
        if unknown:
            raise ModelFileError(f"$.tolerances: unknown names {sorted(unknown)}")
        tol = DEFAULT.replace(**overrides)

    try:
        chain = MarkovChain(labels=labels, pi=pi, P=p_mat)
        return build_model(h_sys, chain, probes, rho_init, tri=tri, tol=tol)
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def load_model(path: str, tol: Tolerances = None) -> MrisModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"{path}: not valid JSON ({exc})") from exc
    return parse_model_dict(doc, tol=tol)


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _emit_matrix(mat) -> list:
    mat = np.asarray(mat, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in mat]


def model_to_dict(model: MrisModel) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "system": {"dim": model.dim_sys, "H_S": _emit_matrix(model.h_sys)},
        "omega": list(model.labels),
        "probes": {
            l: {
                "H_E": _emit_matrix(model.probes[l].h_env),
                "beta": float(model.probes[l].beta),
                "tau": float(model.probes[l].tau),
                "V": _emit_matrix(model.probes[l].coupling),
            } for l in model.labels
        },
        "chain": {"pi": [float(x) for x in model.chain.pi],
                  "P": [[float(x) for x in row] for row in model.chain.P]},
        "initial_states": {l: _emit_matrix(model.rho_init[l]) for l in model.labels},
    }
    if model.tri is not None:
        doc["tri"] = {
            "W_S": _emit_matrix(model.tri.w_sys),
            "W_E": {l: _emit_matrix(model.tri.w_env[l]) for l in model.labels},
        }
    return doc


def write_model_file(model: MrisModel, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
