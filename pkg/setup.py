"""Build script for the optional compiled kernels.

The package works without the extension (a numpy fallback is selected at
import time), so build failures here should not block a pure-Python install:
`pip install -e . --no-build-isolation` with Cython available builds
`ddsmc._kernels._core`.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "ddsmc._kernels._core",
        sources=["src/ddsmc/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
)
