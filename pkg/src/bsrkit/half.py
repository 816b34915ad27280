"""Binary16 conversion API with backend selection.

Prefers the compiled kernel when it was built; falls back to the pure
Python twin otherwise.  Set ``BSRKIT_FORCE_PY=1`` to skip the compiled
kernel (used by the benchmark and the cross-backend tests).
"""

import os

from bsrkit import _half_py

MAX_FINITE = 65504.0

if os.environ.get("BSRKIT_FORCE_PY", "") not in ("", "0"):
    _impl = _half_py
    BACKEND = "python"
else:
    try:
        from bsrkit import _halfcore as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _half_py
        BACKEND = "python"

encode_array = _impl.encode_f16
decode_array = _impl.decode_f16
encode_scalar = _impl.encode_f16_scalar
decode_scalar = _impl.decode_f16_scalar


def backends() -> dict:
    """Name -> module map of every available backend (for benchmarks/tests)."""
    found = {"python": _half_py}
    try:
        from bsrkit import _halfcore

        found["compiled"] = _halfcore
    except ImportError:
        pass
    return found
