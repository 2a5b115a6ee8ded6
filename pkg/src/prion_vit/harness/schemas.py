"""JSON schemas for the emitted reports."""

from __future__ import annotations

import jsonschema

_num = {"type": "number"}
_opt_num = {"type": ["number", "null"]}
_hash = {"type": "string", "pattern": "^[0-9a-f]{64}$"}

METRICS = {
    "type": "object",
    "required": ["split", "n", "mse", "mae", "rmse", "max_error", "r2", "config_hash", "seed"],
    "properties": {
        "split": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "mse": {"type": "number", "minimum": 0},
        "mae": {"type": "number", "minimum": 0},
        "rmse": {"type": "number", "minimum": 0},
        "max_error": {"type": "number", "minimum": 0},
        "r2": {"type": ["number", "null"], "maximum": 1},
        "config_hash": _hash,
        "seed": {"type": ["integer", "null"]},
    },
    "additionalProperties": False,
}

BENCH_ENTRY = {
    "type": "object",
    "required": ["label", "peak_memory_mb", "mean_latency_s", "n_runs", "warmup", "input_shape",
                 "config_hash", "seed", "latencies_s"],
    "properties": {
        "label": {"type": "string"},
        "peak_memory_mb": {"type": "number", "minimum": 0},
        "mean_latency_s": {"type": "number", "exclusiveMinimum": 0},
        "n_runs": {"type": "integer", "minimum": 1},
        "warmup": {"type": "integer", "minimum": 0},
        "input_shape": {"type": "array", "items": {"type": "integer"}, "minItems": 4, "maxItems": 4},
        "config_hash": _hash,
        "seed": {"type": "integer"},
        "latencies_s": {"type": "array", "items": _num, "minItems": 1},
    },
    "additionalProperties": False,
}

BENCH = {
    "type": "object",
    "required": ["config_hash", "seed", "reports", "paper_reference"],
    "properties": {
        "config_hash": _hash,
        "seed": {"type": "integer"},
        "reports": {"type": "array", "items": BENCH_ENTRY, "minItems": 1},
        "paper_reference": {"type": "object"},
    },
    "additionalProperties": False,
}

_VARIANT = {
    "type": "object",
    "required": ["config_hash", "best_epoch", "epochs", "split_hashes", "test", "val"],
    "properties": {
        "config_hash": _hash,
        "best_epoch": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 1},
        "split_hashes": {
            "type": "object",
            "required": ["train", "test", "val"],
            "additionalProperties": {"type": "string"},
        },
        "test": METRICS,
        "val": METRICS,
    },
}

ABLATION = {
    "type": "object",
    "required": ["config_hash", "seed", "seeds", "n_samples", "split_sizes", "runs", "summary",
                 "paper_reference"],
    "properties": {
        "config_hash": _hash,
        "seed": {"type": "integer"},
        "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "n_samples": {"type": "integer", "minimum": 1},
        "split_sizes": {"type": "object"},
        "runs": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["seed", "variants", "delta", "prion_mae_le_plain"],
                "properties": {
                    "seed": {"type": "integer"},
                    "variants": {
                        "type": "object",
                        "required": ["prion-vit", "plain-vit"],
                        "properties": {"prion-vit": _VARIANT, "plain-vit": _VARIANT},
                    },
                    "delta": {"type": "object", "additionalProperties": _opt_num},
                    "prion_mae_le_plain": {"type": "boolean"},
                },
            },
        },
        "summary": {"type": "object"},
        "paper_reference": {"type": "object"},
    },
}


def validate(payload: dict, schema: dict) -> None:
    jsonschema.validate(payload, schema)
