"""Build script: compiles the integrator kernel when Cython is available.

The package works without the extension (a pure-Python kernel is selected
at import time), so a missing compiler only costs speed.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "walker22.dynamics._core",
                ["src/walker22/dynamics/_core.pyx"],
                # -ffp-contract=off keeps the compiled kernel bit-compatible
                # with the pure-Python twin (no fused multiply-add)
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
