import os

import numpy as np
from setuptools import Extension, setup

# Set DANSE_NO_EXT=1 to install the pure-Python package only, and
# DANSE_PORTABLE=1 to build without -march=native (e.g. for wheels).
ext_modules = []
cflags = ["-O3", "-fno-math-errno"]
if not os.environ.get("DANSE_PORTABLE"):
    cflags.append("-march=native")
if not os.environ.get("DANSE_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "danse._kernels",
                ["src/danse/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=cflags,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
