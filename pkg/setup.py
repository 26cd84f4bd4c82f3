import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: chorusid.kernels falls back to the
# numpy implementation when the extension is missing.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "chorusid._kernels",
                ["src/chorusid/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
