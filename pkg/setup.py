"""Build hook for the optional compiled sampling kernel.

The package works without the extension: softcamp.kernels falls back to a
pure-Python implementation at import time. Set SOFTCAMP_SKIP_EXT=1 to skip
compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SOFTCAMP_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "softcamp.kernels._sampling",
            ["src/softcamp/kernels/_sampling.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        pass

setup(ext_modules=ext_modules)
