"""Hot-kernel backend selection.

Prefers the compiled Cython extension; falls back to the numpy backend when
the extension was not built. Set EEGIMG_FORCE_NUMPY=1 to force the fallback
(used by the equivalence tests and the benchmark).
"""

import os

FORCE_ENV = "EEGIMG_FORCE_NUMPY"

if os.environ.get(FORCE_ENV, "") not in ("", "0"):
    from . import numpy_backend as _impl
else:
    try:
        from . import cykernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import numpy_backend as _impl

BACKEND = _impl.NAME
lbp_codes = _impl.lbp_codes
glcm_counts = _impl.glcm_counts
smo_solve = _impl.smo_solve


def available_backends() -> dict:
    """Name -> module for every importable backend."""
    from . import numpy_backend

    out = {"numpy": numpy_backend}
    try:
        from . import cykernels  # type: ignore[attr-defined]

        out["cython"] = cykernels
    except ImportError:
        pass
    return out
