"""Kernel dispatch: use the compiled extension when available, otherwise the
numpy reference implementation.  COVA_PURE_PYTHON=1 forces the fallback."""

import os

from . import reference

if os.environ.get("COVA_PURE_PYTHON"):
    _impl = reference
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = reference
        BACKEND = "python"

label_components = _impl.label_components
mog_update = _impl.mog_update
