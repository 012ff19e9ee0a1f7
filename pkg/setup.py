"""Build hook for the optional compiled NTT core.

The package works without it: ``helix.ckks.ntt`` falls back to a numpy
implementation when ``helix.ckks._ntt_core`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("HELIX_NO_EXT"):
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
                    "helix.ckks._ntt_core",
                    ["src/helix/ckks/_ntt_core.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
