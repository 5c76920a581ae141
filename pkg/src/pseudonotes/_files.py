"""Small file helpers: atomic writes, fixed-precision JSON, content hashes."""

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a temp file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def dumps_fixed(obj, indent=None, _level=0) -> str:
    """Serialize ``obj`` as JSON with every float written as ``%.6f``.

    Key order is preserved, so callers control the layout.  ``indent=None``
    gives a single line with ``", "`` / ``": "`` separators.
    """
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialize non-finite float {obj!r}")
        text = f"{obj:.6f}"
        return "0.000000" if text == "-0.000000" else text
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, os.PathLike):
        return json.dumps(os.fspath(obj), ensure_ascii=False)

    if indent is None:
        open_pad = close_pad = ""
        sep = ", "
    else:
        open_pad = "\n" + " " * (indent * (_level + 1))
        close_pad = "\n" + " " * (indent * _level)
        sep = "," + open_pad

    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{json.dumps(str(k), ensure_ascii=False)}: {dumps_fixed(v, indent, _level + 1)}"
            for k, v in obj.items()
        ]
        return "{" + open_pad + sep.join(items) + close_pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_fixed(v, indent, _level + 1) for v in obj]
        return "[" + open_pad + sep.join(items) + close_pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")
