"""Deterministic JSON rendering shared by the command line front-end."""
from __future__ import annotations

import json
import math

import numpy as np

SCHEMA_VERSION = 1
DIGITS = 15


def clean(obj):
    """Recursively convert to JSON types, rounding floats to 15 significant digits."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.{DIGITS}g}")
    return obj


def dumps(command: str, payload: dict) -> str:
    record = {"schema": SCHEMA_VERSION, "command": command}
    record.update(payload)
    return json.dumps(clean(record), indent=2, allow_nan=False)
