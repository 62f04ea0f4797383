"""Configuration files and result serialization.

Configuration files are flat ``key = value`` text.  ``#`` starts a comment,
keys are the :class:`~floquet_dmft.dmft.SolverConfig` field names, and any
other key is an error.  In sweep files ``omega_l`` and ``T`` may hold a
comma-separated list or an inclusive ``start:stop:step`` range.

CSV files carry one header row with units in brackets and write every float
with 17 significant digits, so identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .dmft import SolverConfig
from .floquet import ConfigurationError

SWEEP_KEYS = ("omega_l", "T")
FLOAT_FORMAT = "%.17g"

CONFIG_HEADER = """\
# floquet-dmft configuration
# energies (U, E, T, omega_l, D, eta, omega_min, omega_max) in units of the half-bandwidth D
"""


def _field_types():
    return {f.name: f.type for f in fields(SolverConfig)}


def _convert(key, text, ftype):
    text = text.strip()
    try:
        if ftype in ("int", int):
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if ftype in ("float", float):
            return float(text)
    except ValueError:
        raise ConfigurationError(f"{key}: cannot parse {text!r} as {ftype}") from None
    if text.lower() in ("none", ""):
        return None
    return text


def _parse_list(key, text):
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"{key}: range must be start:stop:step, got {text!r}")
        start, stop, step = (_convert(key, p, "float") for p in parts)
        if step <= 0 or stop < start:
            raise ConfigurationError(f"{key}: empty range {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [_convert(key, p, "float") for p in text.split(",")]


def parse_config(text: str, allow_lists: bool = False):
    """Parse configuration text.

    Returns
    -------
    base : dict
        Scalar settings.
    lists : dict
        ``{key: [values]}`` for sweep keys given as lists or ranges (only
        when `allow_lists`).

    Raises
    ------
    ConfigurationError
        Unknown key, duplicate key, unparseable value, or a list where none
        is allowed.  The message names the offending field.
    """
    types = _field_types()
    base, lists = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in base or key in lists:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        is_list = "," in value or (key in SWEEP_KEYS and ":" in value)
        if is_list:
            if not allow_lists or key not in SWEEP_KEYS:
                where = "in sweep files" if allow_lists else "only in sweep files"
                raise ConfigurationError(
                    f"{key}: value lists are allowed {where}"
                    + (f" for {', '.join(SWEEP_KEYS)}" if allow_lists else "")
                )
            lists[key] = _parse_list(key, value)
        else:
            base[key] = _convert(key, value, types[key])
    return base, lists


def load_config(path, allow_lists: bool = False):
    """Read and parse a configuration file; see :func:`parse_config`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, allow_lists=allow_lists)


def build_config(values: dict) -> SolverConfig:
    try:
        return SolverConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def format_config(cfg: SolverConfig) -> str:
    """Configuration text that :func:`parse_config` reads back to `cfg`."""
    lines = [CONFIG_HEADER.rstrip("\n")]
    for key, value in asdict(cfg).items():
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_csv(path, columns: dict):
    """Write equal-length columns; keys are header labels including units."""
    path = Path(path)
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    n = {len(c) for c in data}
    if len(n) != 1:
        raise ValueError(f"{path.name}: columns of unequal length")
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*data):
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT_FORMAT % float(v)


def read_csv(path):
    """Read a CSV written by :func:`write_csv` into ``{header: float array}``."""
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, r)) for r in reader]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {h: arr[:, i] for i, h in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload: dict):
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path
