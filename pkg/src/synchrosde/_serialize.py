"""Deterministic report serialization.

Reals are written as 17-significant-digit decimals so reports round-trip
exactly and identical runs produce byte-identical artifacts.  Dict keys are
emitted sorted; non-finite floats become the quoted strings "inf", "-inf",
"nan" (plain JSON has no spelling for them).
"""

from __future__ import annotations

import json
import math

import numpy as np

__all__ = ["fmt_real", "dumps", "write_json", "write_csv"]


def fmt_real(x: float) -> str:
    return format(float(x), ".17g")


def _ser(obj, level: int) -> str:
    pad = "  " * level
    pad_in = "  " * (level + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return fmt_real(x)
        if math.isnan(x):
            return '"nan"'
        return '"inf"' if x > 0 else '"-inf"'
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = ",\n".join(pad_in + _ser(v, level + 1) for v in obj)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f"{pad_in}{json.dumps(str(k))}: {_ser(v, level + 1)}" for k, v in sorted(obj.items())
        )
        return "{\n" + items + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return _ser(obj, 0) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def write_csv(path, header: list[str], rows) -> None:
    """Rows of reals (or strings), comma separated, 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt_real(v) for v in row) + "\n")
