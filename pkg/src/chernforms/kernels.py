"""Backend selection for the hot wedge kernel.

The compiled Cython kernel is used when it has been built; otherwise the numpy
implementation is used.  Setting ``CHERNFORMS_PURE_PYTHON=1`` forces the numpy
path.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
wedge_terms = _kernels_py.wedge_terms

if os.environ.get("CHERNFORMS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        wedge_terms = _compiled.wedge_terms
        BACKEND = "cython"

python_wedge_terms = _kernels_py.wedge_terms


def compiled_wedge_terms():
    """The compiled kernel, or None when the extension is unavailable."""
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels.wedge_terms
