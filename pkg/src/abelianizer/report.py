"""JSON-ready conversion and deterministic serialization of results."""

from __future__ import annotations

import dataclasses
import json
import math
from enum import Enum

from .plane import Mat2, ProjLine, Vec2


def jsonable(obj):
    if isinstance(obj, Mat2):
        return obj.rows()
    if isinstance(obj, Vec2):
        return [obj.x, obj.y]
    if isinstance(obj, ProjLine):
        return list(obj.as_tuple())
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj) if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g") if x != int(x) or abs(x) >= 1e16 else format(x, ".1f")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""

    def enc(v, level: int) -> str:
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(v, bool) or v is None:
            return json.dumps(v)
        if isinstance(v, float):
            return _fmt_float(v)
        if isinstance(v, int):
            return str(v)
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(x, level + 1)}" for k, x in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(v, (list, tuple)):
            if not v:
                return "[]"
            if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
                return "[" + ", ".join(enc(x, level + 1) for x in v) + "]"
            return "[\n" + ",\n".join(pad + enc(x, level + 1) for x in v) + "\n" + end + "]"
        raise TypeError(f"not serializable: {type(v).__name__}")

    return enc(jsonable(obj), 0) + "\n"
