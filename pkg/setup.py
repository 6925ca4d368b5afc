"""Build script for the compiled kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed compile only costs speed. Build in place with:

    python3 setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "varcausal._kernels",
                ["src/varcausal/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
