import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("OPENKROTOV_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "openkrotov._kernels._ckernels",
                ["src/openkrotov/_kernels/_ckernels.pyx"],
                extra_compile_args=["-O3", "-fopenmp"],
                extra_link_args=["-fopenmp"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
