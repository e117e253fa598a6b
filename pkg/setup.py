"""Build script for the optional compiled FFT kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it just makes the spectral layers faster.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "spectab.numerics._fft_cy",
        ["src/spectab/numerics/_fft_cy.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
