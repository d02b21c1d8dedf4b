"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (numpy fallback selected at import);
a failed compile must therefore never break installation.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, cython missing, ...
            warnings.warn(f"compiled kernels unavailable, using pure fallback: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernels unavailable, using pure fallback: {exc}")


def extensions():
    import os

    pyx = "src/pipeforge/kernels/_ckern.pyx"
    if not os.path.exists(pyx):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize([pyx], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
