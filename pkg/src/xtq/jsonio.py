"""Deterministic JSON emission.

Stdlib ``json`` writes floats with ``repr`` (shortest round-trip form),
which varies in digit count. Model and law files instead serialize every
float with 17 significant digits so the byte output is fixed-width exact
and identical across runs and platforms. Reading uses plain ``json``.
"""

from __future__ import annotations

import json
from typing import Any, IO


def _emit(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad_in}{json.dumps(str(k))}: ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        # Scalar-only lists stay on one line; nested ones break per item.
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            out.append("[" + ", ".join(_scalar(v) for v in seq) + "]")
        else:
            out.append("[\n")
            for i, v in enumerate(seq):
                out.append(pad_in)
                _emit(v, out, indent, level + 1)
                out.append(",\n" if i < len(seq) - 1 else "\n")
            out.append(pad + "]")
    else:
        out.append(_scalar(obj))


def _scalar(v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def dumps(obj: Any, indent: int = 2) -> str:
    out: list[str] = []
    _emit(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def dump(obj: Any, fp: IO[str], indent: int = 2) -> None:
    fp.write(dumps(obj, indent))


def load(fp: IO) -> Any:
    return json.load(fp)


def loads(text: str) -> Any:
    return json.loads(text)
