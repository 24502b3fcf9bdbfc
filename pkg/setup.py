"""Build script for the optional compiled stepping kernel.

The package is fully functional without the extension (a pure-Python
kernel is selected at import time), so any failure here degrades to a
source-only install instead of aborting. Set OMNITELEOP_NO_EXT=1 to skip
the compile step explicitly.
"""

import os

from setuptools import setup

ext_modules = []
pyx = os.path.join("src", "omniteleop", "engine", "_core.pyx")

if os.environ.get("OMNITELEOP_NO_EXT") != "1" and os.path.exists(pyx):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "omniteleop.engine._core",
                    [pyx],
                    # fused-multiply-add contraction is disabled so the
                    # compiled tick is bit-identical to the pure-Python one
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
