import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the compiled kernels if possible; fall back to pure Python.

    The package selects the backend at import time, so a missing compiler
    only costs speed, not functionality.
    """

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or toolchain missing
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python backend")


try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("fairforest._kernels._core", ["src/fairforest/_kernels/_core.pyx"])],
        language_level=3,
    )

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
