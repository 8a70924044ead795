"""Build script for the optional compiled stepping kernel.

The package is pure Python except for one Cython extension holding the
per-path simulation loop.  If the extension cannot be built the install
still succeeds and the numpy fallback is used at import time.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"conespde: skipping compiled kernel ({exc})", file=sys.stderr)
        return []
    from setuptools import Extension

    ext = Extension(
        "conespde.kernels._euler_cy",
        sources=["src/conespde/kernels/_euler_cy.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=_extensions())
