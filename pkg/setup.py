"""Build script: compiles the optional LSTM recurrence extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the build therefore tolerates a missing compiler
or a failed cythonize and installs the pure-Python package instead.

    pip install -e . --no-build-isolation
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "crosstalk._ckernels",
                sources=["src/crosstalk/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"crosstalk: building without compiled kernels ({exc})")
    extensions = []

setup(ext_modules=extensions)
