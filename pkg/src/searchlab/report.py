"""JSON-lines reports.  Output bytes depend only on the records, never on time or host."""

from __future__ import annotations

import dataclasses
import json
from fractions import Fraction
from typing import IO, Iterable

import numpy as np

from . import __version__

SCHEMA = "searchlab.report/1"


def _default(o):
    if isinstance(o, Fraction):
        return f"{o.numerator}/{o.denominator}"
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "as_dict"):
        return o.as_dict()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, separators=(",", ":"), allow_nan=True)


def header(command: str, config: dict) -> dict:
    return {"schema": SCHEMA, "kind": "run", "tool": "searchlab", "version": __version__,
            "command": command, "config": config}


def emit(stream: IO[str], command: str, config: dict, records: Iterable[dict]) -> None:
    """One header line carrying the full config, then one line per check."""
    stream.write(dumps(header(command, config)) + "\n")
    for rec in records:
        stream.write(dumps({"schema": SCHEMA, **rec}) + "\n")
