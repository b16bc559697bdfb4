"""
File formats shared by the CLI and the verification suite.

  sequence file   JSON array of [re, im] pairs, |z| < 1, pairwise distinct
  grid field      see GridField.to_json (values interleaved re/im, radial-major)
  manifest        canonical JSON: sorted keys, fixed float repr, no timestamps
  solution        CSV (re, im, then re_k, im_k per component) and JSON
  level table     CSV (re, im, abs_b)
"""
import csv
import json
import logging
import math
import os
from typing import Any, Iterable, List

import numpy as np

from .cauchy_transform import load_grid_field, save_grid_field
from .errors import InputFormatError
from .sequence_analysis import FiniteSequence

logger = logging.getLogger(__name__)

__all__ = [
    "canonical_json",
    "load_grid_field",
    "load_sequence",
    "parse_sequence",
    "save_grid_field",
    "save_sequence",
    "write_level_csv",
    "write_manifest",
    "write_solution",
]


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


# ==============================================================================
# Sequences
# ==============================================================================

def parse_sequence(data: Any, where: str = "<sequence>") -> FiniteSequence:
    """Validate a decoded sequence document item by item."""
    if not isinstance(data, list):
        raise InputFormatError(f"{where}: expected a JSON array of [re, im] pairs")
    if not data:
        raise InputFormatError(f"{where}: sequence is empty")
    points: List[complex] = []
    for i, item in enumerate(data):
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise InputFormatError(f"{where}: item {i} is not a [re, im] pair")
        try:
            re, im = float(item[0]), float(item[1])
        except (TypeError, ValueError):
            field = "re" if not _is_number(item[0]) else "im"
            raise InputFormatError(f"{where}: item {i}, field '{field}' is not a number") from None
        if not (math.isfinite(re) and math.isfinite(im)):
            raise InputFormatError(f"{where}: item {i} is not finite")
        z = complex(re, im)
        if abs(z) >= 1.0:
            raise InputFormatError(f"{where}: item {i} = {z} is not inside the unit disk")
        if z in points:
            raise InputFormatError(f"{where}: item {i} repeats item {points.index(z)}")
        points.append(z)
    return FiniteSequence.of(points)


def _is_number(x: Any) -> bool:
    try:
        float(x)
    except (TypeError, ValueError):
        return False
    return True


def load_sequence(path: str) -> FiniteSequence:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{path}: line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise InputFormatError(f"{path}: {e}") from e
    seq = parse_sequence(data, where=path)
    logger.info("loaded %d sequence points from %s", len(seq), path)
    return seq


def save_sequence(seq: FiniteSequence, path: str) -> None:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(seq.to_pairs(), fh)


# ==============================================================================
# Manifests and solutions
# ==============================================================================

def _json_ready(obj: Any) -> Any:
    """numpy scalars/arrays and complex numbers to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def canonical_json(data: Any) -> str:
    return json.dumps(_json_ready(data), sort_keys=True, indent=2)


def write_manifest(data: dict, path: str) -> str:
    """Write canonical JSON; returns the text written."""
    _ensure_parent(path)
    text = canonical_json(data)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")
    return text


def write_solution(z: np.ndarray, values: np.ndarray, csv_path: str, json_path: str = None) -> None:
    """Sampled (z, L_K f(z)); values has shape z.shape + (d,)."""
    z = np.asarray(z, dtype=complex).ravel()
    values = np.asarray(values, dtype=complex).reshape(z.size, -1)
    d = values.shape[1]
    _ensure_parent(csv_path)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["re", "im"]
        for k in range(d):
            header += [f"re_{k}", f"im_{k}"]
        writer.writerow(header)
        for zi, vi in zip(z, values):
            row = [repr(float(zi.real)), repr(float(zi.imag))]
            for v in vi:
                row += [repr(float(v.real)), repr(float(v.imag))]
            writer.writerow(row)
    if json_path:
        write_manifest({"points": z, "values": values}, json_path)


def write_level_csv(z: Iterable[complex], abs_b: Iterable[float], path: str) -> None:
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im", "abs_b"])
        for zi, bi in zip(z, abs_b):
            writer.writerow([repr(float(zi.real)), repr(float(zi.imag)), repr(float(bi))])
