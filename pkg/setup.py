"""Build script: compiles the optional accelerator extension when Cython is available.

The package is fully functional without the extension; the pure-Python
backend is selected automatically at import time when the compiled module
is missing.
"""

from __future__ import annotations

import os

from setuptools import setup

ext_modules = []
if os.environ.get("PROXYAUDIT_PURE") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                "src/proxyaudit/kernels/_ckernels.pyx",
            ],
            compiler_directives={"language_level": "3"},
        )
        for ext in ext_modules:
            ext.include_dirs.append(numpy.get_include())
            ext.define_macros.append(("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION"))
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
