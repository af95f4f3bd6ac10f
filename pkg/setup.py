"""Build script: compiles the optional native kernel extension.

The package works without the extension (a numpy reference backend is
selected at import time), so the build is marked optional and any
compiler failure degrades to the pure-Python install.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    ext = Extension(
        "fedpose.nn.kernels._native",
        ["src/fedpose/nn/kernels/_native.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    extensions = cythonize([ext], language_level=3)

setup(ext_modules=extensions)
