"""Backend selection for the elementwise kernels.

The compiled extension is used when it imported cleanly; otherwise the pure
numpy fallback takes over.  Setting ``NPAMP_PURE_PYTHON=1`` in the environment
forces the fallback regardless.  ``BACKEND`` records which one is active.
"""

import os

if os.environ.get("NPAMP_PURE_PYTHON") == "1":
    from . import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "python"

count_le = _impl.count_le
score_into = _impl.score_into
prox_into = _impl.prox_into
soft_threshold_into = _impl.soft_threshold_into
