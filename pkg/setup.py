"""Builds the optional compiled featurization kernel.

The package works without it (a pure-Python fallback is selected at import
time); the extension just makes batch predicate evaluation much faster.
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
                "seqexplain.kernels._speedups",
                ["src/seqexplain/kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3", "embedsignature": True},
    )
except ImportError:
    # No Cython/numpy at build time: install as pure Python.
    pass

setup(ext_modules=ext_modules)
