"""Build the optional Cython DP kernels.

The extension is marked optional: if it fails to compile, the package still
installs and ``storyalign.align`` falls back to the pure-Python kernels.
"""
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "storyalign.align._kernels",
        ["src/storyalign/align/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
