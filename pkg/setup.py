"""Build the optional Cython flow kernel.

The package works without it: ``cpnflow.flow.kernel`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CPNFLOW_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "cpnflow.flow._kernel",
                    ["src/cpnflow/flow/_kernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
