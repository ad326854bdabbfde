import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SALTNS_NO_EXTENSION") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "saltns._kernels",
            ["src/saltns/_kernels.pyx"],
            include_dirs=[np.get_include()],
            # keep the operation order identical to the numpy fallback
            extra_compile_args=["-O2", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except Exception as exc:  # build falls back to the pure-Python kernels
        print(f"saltns: compiled kernels disabled ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
