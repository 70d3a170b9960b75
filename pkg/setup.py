import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("NRRIS_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "nrris._kernels",
                    ["src/nrris/_kernels.pyx"],
                    depends=["src/nrris/_vandermonde.h"],
                    include_dirs=[np.get_include(), "src/nrris"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
