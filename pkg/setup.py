"""Build the optional compiled linkage core.

The package works without it: ``demandshift.kernels`` falls back to the
numpy implementation when ``demandshift._clinkage`` cannot be imported.
Set ``DEMANDSHIFT_NO_EXT=1`` to skip the extension entirely.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("DEMANDSHIFT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("Cython/numpy unavailable, building pure-Python only", file=sys.stderr)
    else:
        # no -ffast-math: both backends must produce bit-identical merge distances
        compile_args = ["-O3", "-ffp-contract=off"]
        link_args = []
        if sys.platform.startswith("linux"):
            compile_args.append("-fopenmp")
            link_args.append("-fopenmp")
        ext_modules = cythonize(
            [
                Extension(
                    "demandshift._clinkage",
                    sources=["src/demandshift/_clinkage.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=compile_args,
                    extra_link_args=link_args,
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
