"""Build the optional Cython kernel module.

``pip install -e . --no-build-isolation`` compiles ``hawkessv._kernels``.
When Cython or a compiler is unavailable the package still installs and
falls back to ``hawkessv._pykernels`` at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("HAWKESSV_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "hawkessv._kernels",
                    ["src/hawkessv/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
