"""JSON encoding with reals written at 17 significant digits.

The stdlib encoder writes the shortest round-trip repr; the file formats
here pin ``%.17g`` instead, which also round-trips bit-exactly.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def format_real(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == 0.0 and math.copysign(1.0, x) < 0:
        # "-0" would read back as the integer 0 and lose the sign
        return "-0.0"
    return "%.17g" % x


def dumps(obj: Any) -> str:
    """Compact, key-order-preserving JSON text."""
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_real(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {dumps(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def loads(text: str) -> Any:
    return json.loads(text)
