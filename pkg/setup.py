"""Build script: compiles the optional simplex kernel extension.

The package works without the extension; a numpy fallback with the same
API is selected at import time when compilation failed or was skipped.
Set SRAMKIT_SKIP_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SRAMKIT_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext = Extension(
            "sramkit.solver._simplex_core",
            sources=["src/sramkit/solver/_simplex_core.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"sramkit: skipping compiled kernels ({exc}); numpy fallback will be used")
        ext_modules = []

setup(ext_modules=ext_modules)
