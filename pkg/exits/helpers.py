"""
Helpers shared across the toolkit
"""


from dataclasses import asdict, is_dataclass
from enum import Enum
import json
from pathlib import Path
from typing import Any, Union
import numpy as np


__all__ = ["Encoder", "dump_json", "write_json"]


class Encoder(json.JSONEncoder):
    """
    Helper class to convert numpy values and dataclasses to JSON
    """

    def default(self, o): # pylint: disable=method-hidden
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, Enum):
            return o.value
        if isinstance(o, Path):
            return str(o)
        if is_dataclass(o) and not isinstance(o, type):
            return asdict(o)
        if isinstance(o, (tuple, set, frozenset)):
            return sorted(o) if isinstance(o, (set, frozenset)) else list(o)
        return super(Encoder, self).default(o)


def dump_json(obj: Any) -> str:
    """
    Serialize to a stable JSON text

    Keys are sorted and floats use their shortest round-trip repr, so the same
    value always produces the same bytes.
    """

    return json.dumps(obj, cls=Encoder, sort_keys=True, indent=2) + "\n"


def write_json(path: Union[str, Path], obj: Any) -> Path:
    """
    Write a JSON document
    """

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(obj))
    return path
