"""Build script for the compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), but the compiled core is what makes the larger verification
sweeps fit their time budgets.  `-ffp-contract=off` keeps the compiled
arithmetic aligned with the NumPy fallback (no FMA contraction).
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ebmlab.kernels._core",
                ["src/ebmlab/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
