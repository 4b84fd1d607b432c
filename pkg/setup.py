"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a pure-Python
mirror of every kernel ships in ``simcal._kernels._reference``); the
extension only accelerates the replication-heavy inner loops.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SIMCAL_SKIP_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "simcal._kernels._ckernels",
                    ["src/simcal/_kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
