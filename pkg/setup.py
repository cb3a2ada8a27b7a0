import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None and not os.environ.get("PRIL_NO_EXTENSION"):
    extensions = cythonize(
        [
            Extension(
                "pril._kernels",
                ["src/pril/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # keep float ops identical to the numpy fallback
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
