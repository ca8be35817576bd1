"""Builds the optional Cython graph kernels; the package works without them."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("DIMENET_PURE_PYTHON", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension(
                "dimenet._graph_ext",
                sources=["src/dimenet/_graph_ext.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )],
            language_level=3,
        )

setup(ext_modules=ext_modules)
