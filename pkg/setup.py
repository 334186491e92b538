import os
import sys

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


class OptionalBuildExt(build_ext):
    """Build the compiled kernels if possible; fall back to pure numpy otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(
                "npamp: compiled kernels unavailable (%s); "
                "the pure numpy fallback will be used" % exc,
                file=sys.stderr,
            )

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(
                "npamp: building %s failed (%s); "
                "the pure numpy fallback will be used" % (ext.name, exc),
                file=sys.stderr,
            )


extensions = []
if cythonize is not None and os.environ.get("NPAMP_NO_EXTENSION") != "1":
    extensions = cythonize(
        [
            Extension(
                "npamp._kernels",
                ["src/npamp/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
