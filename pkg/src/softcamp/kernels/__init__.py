"""Annotation-sampling kernels.

The compiled Cython kernel is preferred when the extension built; otherwise
the numpy implementation in sampling_py is used. Both consume the same
pre-drawn uniforms and produce byte-identical output, so the backend choice
never changes simulation results. Set SOFTCAMP_FORCE_PY_KERNEL=1 to force
the fallback (used by the benchmark and the equivalence test).
"""

import os

if os.environ.get("SOFTCAMP_FORCE_PY_KERNEL") == "1":
    from . import sampling_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _sampling as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import sampling_py as _impl

        BACKEND = "python"

sample_many = _impl.sample_many

__all__ = ["BACKEND", "sample_many"]
