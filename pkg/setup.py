"""Build script: compiles the sampling kernel extension when Cython is available.

The package is fully functional without the extension (a pure-Python kernel with
identical semantics is selected at import time), so a missing compiler or missing
Cython only costs speed, never correctness.
"""

import os

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    if not os.path.exists("src/coinfactory/_kernels/_core.pyx"):
        raise ImportError
    ext_modules = cythonize(
        ["src/coinfactory/_kernels/_core.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
