from __future__ import annotations

import math
import numbers
from typing import Any, Optional


def _to_float(value: Any) -> Optional[float]:
    try:
        if value is None:
            return None
        return float(value)
    except Exception:
        return None


def format_number(value: Any) -> str:
    """Render a cell value for CSV output.

    Floats use the shortest repr that round-trips, so identical values always
    print identically across runs. Integral types print as integers.
    """
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    num = _to_float(value)
    if num is None:
        return str(value)
    if not math.isfinite(num):
        raise ValueError(f"refusing to write non-finite value {value!r}")
    if num == 0.0:
        # -0.0 and 0.0 print the same
        return "0.0"
    return repr(num)

