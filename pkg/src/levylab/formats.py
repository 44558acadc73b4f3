"""File formats: CSV tables, canonical JSON, run manifests.

Floats are written with 17 significant digits and a '.' decimal point so that
outputs are byte-stable; JSON keys are sorted.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .errors import DataError, ParameterError
from .market import PriceCurve


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            # JSON has no infinities; emit a string tag
            return json.dumps(fmt(x))
        return fmt(x)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k), ensure_ascii=False) + ": " + _encode(obj[k], indent, level + 1)
                 for k in sorted(obj, key=str)]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def _decode_special(obj):
    if isinstance(obj, dict):
        return {k: _decode_special(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode_special(v) for v in obj]
    if obj in ("inf", "-inf"):
        return float(obj)
    return obj


def load_json(path: str | Path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    return _decode_special(json.loads(text))


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------------------- #
# Manifests
# --------------------------------------------------------------------------- #


def build_manifest(command: str, parameters: dict, inputs: Sequence[str | Path], outputs: Sequence[str | Path],
                   seed: int | None = None) -> dict:
    """Provenance record; thread counts and timestamps are deliberately excluded."""
    return {
        "command": command,
        "parameters": parameters,
        "seed": seed,
        "version": __version__,
        "inputs": [{"name": Path(p).name, "sha256": sha256_file(p)} for p in inputs],
        "outputs": [Path(p).name for p in outputs],
    }


def manifest_digest(manifest: dict) -> str:
    return hashlib.sha256(dumps(manifest).encode("utf-8")).hexdigest()


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def sidecar_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".meta.json")


# --------------------------------------------------------------------------- #
# CSV
# --------------------------------------------------------------------------- #


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]], digest: str | None = None):
    lines = []
    if digest is not None:
        lines.append(f"# manifest-sha256: {digest}")
    lines.append(",".join(header))
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif v is None:
                cells.append("")
            elif isinstance(v, str):
                cells.append(v)
            else:
                cells.append(fmt(v))
        lines.append(",".join(cells))
    write_text(path, "\n".join(lines) + "\n")


def read_csv(path: str | Path, required: Sequence[str]) -> dict[str, list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        body = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(body)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{path}: empty CSV") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise ParameterError(f"{path}: missing column(s) {', '.join(missing)}")
    cols: dict[str, list[str]] = {h: [] for h in header}
    for row in reader:
        if len(row) != len(header):
            raise ParameterError(f"{path}: ragged row {row}")
        for h, v in zip(header, row):
            cols[h].append(v.strip())
    return cols


def _float(v: str, path) -> float:
    try:
        return float(v)
    except ValueError:
        raise ParameterError(f"{path}: cannot parse number {v!r}") from None


def write_price_curve(path: str | Path, curve: PriceCurve, digest: str | None = None) -> None:
    rows = [(q, p if f else None, bool(f)) for q, p, f in zip(curve.q, curve.price, curve.finite)]
    write_csv(path, ("q", "price", "finite"), rows, digest)


def read_price_curve(path: str | Path, maturity: float, provenance: str = "external") -> PriceCurve:
    cols = read_csv(path, ("q", "price", "finite"))
    q = np.array([_float(v, path) for v in cols["q"]])
    finite = np.array([v.lower() in ("true", "1") for v in cols["finite"]])
    price = np.array([_float(v, path) if f and v else math.inf for v, f in zip(cols["price"], finite)])
    return PriceCurve.from_prices(maturity, q, price, provenance, finite)


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:n`` with inclusive endpoints."""
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(float(n))
    except ValueError:
        raise ParameterError(f"grid {spec!r} is not of the form lo:hi:n") from None
    if n < 1 or (n > 1 and not hi > lo):
        raise ParameterError(f"grid {spec!r} needs n >= 1 and hi > lo")
    if n == 1:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def parse_kv(spec: str) -> tuple[str, dict[str, str]]:
    """``name:k=v,k=v`` into ``(name, {k: v})``."""
    name, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            if not eq:
                raise ParameterError(f"expected key=value in {spec!r}, got {item!r}")
            params[k.strip()] = v.strip()
    return name.strip(), params
