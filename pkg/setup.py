"""Build script for the optional compiled kernels.

The package works without them: ``mildbbm.kernels`` falls back to the
pure-Python implementation when ``mildbbm._ckernels`` cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MILDBBM_NO_EXT") != "1":
    from Cython.Build import cythonize

    extensions = [
        Extension(
            "mildbbm._ckernels",
            ["src/mildbbm/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            # no fast-math and no FMA contraction: the compiled kernels must
            # reproduce the fallback bit for bit
            extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
        )
    ]
    ext_modules = cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
