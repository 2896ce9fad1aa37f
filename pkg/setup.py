"""Build hook for the optional compiled quadrature kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any failure here degrades to a pure-Python
install instead of aborting.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("POSLOC_SKIP_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "posloc._kernels_cy",
                    ["src/posloc/_kernels_cy.pyx"],
                    extra_compile_args=["-O3", "-fno-math-errno"],
                )
            ],
            language_level="3",
        )
    except Exception as exc:  # noqa: BLE001 - degrade to pure python on any build issue
        print(f"posloc: skipping compiled kernels ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
