"""Build script: compiles the optional Cython kernel core.

The package works without the extension (a pure-numpy fallback is selected at
import time), so a missing compiler or Cython only degrades performance.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "structmc._core",
                ["src/structmc/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
