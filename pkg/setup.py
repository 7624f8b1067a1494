"""Build script: compiles the optional box-ops extension.

The package works without the extension (a pure fallback is selected at
import time); set SCREENFORGE_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("SCREENFORGE_NO_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "screenforge.kernels._native",
        ["src/screenforge/kernels/_native.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
