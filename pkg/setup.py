# Builds the optional compiled kernel extension. If Cython or a C compiler
# is unavailable the install still succeeds; the package falls back to the
# numpy backend at import time.
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "eegimg.kernels.cykernels",
                sources=["src/eegimg/kernels/cykernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O2"],
            )
        ],
        language_level=3,
    )
except ImportError as exc:  # pragma: no cover
    print(f"eegimg: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
