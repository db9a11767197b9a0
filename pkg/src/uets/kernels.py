"""Backend selection for the combinatorial kernels.

The compiled extension is used when it imports and the integer inputs fit in
int64 with headroom; otherwise the pure-Python module runs. Setting
``UETS_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import math
import os
from fractions import Fraction
from types import ModuleType
from typing import Optional, Sequence

from uets import _pykernels

try:
    if os.environ.get("UETS_PURE_PYTHON"):
        raise ImportError("pure Python kernels requested")
    from uets import _ckernels
except ImportError:
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

# sums of two table entries and path lengths over <= 13 legs must stay in int64
_INT64_HEADROOM = 1 << 58


def scale(values: Sequence[Fraction]) -> tuple[list[int], int]:
    """Rescale exact rationals to integers over their common denominator."""
    denom = 1
    for v in values:
        denom = math.lcm(denom, v.denominator)
    return [int(v * denom) for v in values], denom


def _module(backend: Optional[str], largest: int) -> ModuleType:
    if backend is not None:
        return BACKENDS[backend]
    if _ckernels is not None and largest < _INT64_HEADROOM:
        return _ckernels
    return _pykernels


def minmax_partition(table: Sequence[int], n: int, k: int, cap: int, backend: Optional[str] = None) -> tuple[int, list[int]]:
    mod = _module(backend, max(table, default=0))
    return mod.minmax_partition(table, n, k, cap)


def held_karp_all(dist: Sequence[Sequence[int]], backend: Optional[str] = None) -> list[int]:
    largest = max((max(row, default=0) for row in dist), default=0) * max(len(dist), 1)
    return _module(backend, largest).held_karp_all(dist)


def subadditive_violation(table: Sequence[int], n: int, backend: Optional[str] = None) -> Optional[tuple[int, int]]:
    return _module(backend, max(table, default=0)).subadditive_violation(table, n)


def monotone_violation(table: Sequence[int], n: int, backend: Optional[str] = None) -> Optional[tuple[int, int]]:
    return _module(backend, max(table, default=0)).monotone_violation(table, n)


def closure_table(table: Sequence[int], n: int, backend: Optional[str] = None) -> list[int]:
    return _module(backend, max(table, default=0) * max(n, 1)).closure_table(table, n)
