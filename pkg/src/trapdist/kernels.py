"""Backend selection for the hot consensus kernel.

The compiled Cython extension is preferred; a numpy fallback with identical
arithmetic is used when the extension is unavailable or when
TRAPDIST_PURE_PYTHON=1 forces it (useful for the benchmark and for testing
backend parity).
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

if os.environ.get("TRAPDIST_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def ransac_consensus(
    x: np.ndarray, y: np.ndarray, samples: np.ndarray, threshold: float
) -> tuple[float, float, int]:
    """Dispatch to the active backend; see _kernels_py for the contract."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    samples = np.ascontiguousarray(samples, dtype=np.int64)
    return _impl.ransac_consensus(x, y, samples, float(threshold))
