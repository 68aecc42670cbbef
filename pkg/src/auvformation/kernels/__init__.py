"""Kernel backend selection.

The hot inner loop (per-vehicle dynamics, observers and reference
filters inside the RK4 stages) is available in two interchangeable
implementations:

* ``_core`` -- Cython extension, built at install time if a compiler is
  available;
* ``_pure`` -- pure Python/numpy fallback.

The compiled backend is preferred.  Set ``AUVFORMATION_PURE=1`` to force
the pure backend (used by the benchmark and by the equivalence tests).
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("AUVFORMATION_PURE", "0") == "1":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
        if not hasattr(_impl, "fleet_rhs"):
            _impl = _pure
            BACKEND = "pure"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

STATE_WIDTH = _pure.STATE_WIDTH
TERMS_WIDTH = _pure.TERMS_WIDTH
N_PARAMS = _pure.N_PARAMS
N_GAINS = _pure.N_GAINS

component_terms_into = _impl.component_terms_into
fleet_rhs = _impl.fleet_rhs
current_regressor = _pure.current_regressor

__all__ = [
    "BACKEND",
    "STATE_WIDTH",
    "TERMS_WIDTH",
    "N_PARAMS",
    "N_GAINS",
    "component_terms_into",
    "fleet_rhs",
    "current_regressor",
]
