"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a pure NumPy
fallback is selected at import time), so a failed compile only costs
speed, not features.
"""

import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernels if possible, warn and continue if not."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            print(f"WARNING: compiled kernels not built ({exc}); "
                  "falling back to pure-Python kernels", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"WARNING: failed to compile {ext.name} ({exc}); "
                  "falling back to pure-Python kernels", file=sys.stderr)


def make_extensions():
    import os

    if not os.path.exists("src/slungsim/_kernels_c.pyx"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "slungsim._kernels_c",
        sources=["src/slungsim/_kernels_c.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps float results identical to the NumPy
        # fallback so the backend-equivalence tests can be exact.
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=make_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
