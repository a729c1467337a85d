"""Build script for the optional compiled kernels.

The package is fully functional without the extension (a numpy/scipy
fallback is selected at import time), so a missing Cython or C compiler
degrades the install instead of failing it.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "sepmix._accel._kernels",
                ["src/sepmix/_accel/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("sepmix: Cython/numpy unavailable at build time; "
          "installing without compiled kernels")

setup(ext_modules=ext_modules)
