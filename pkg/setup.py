"""Build script: compiles the optional accelerator extension when possible.

The package is fully functional without the extension (pure-Python kernels
are selected at import time), so any build failure here downgrades to a
pure install instead of aborting.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that warns instead of failing when a compiler is missing."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - distutils raises many types
            print(f"warning: skipping accelerator extension ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: skipping {ext.name} ({exc})")


def extension_modules():
    if os.environ.get("MTFORGE_SKIP_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available, installing pure-Python kernels only")
        return []
    ext = Extension(
        "mtforge._kernels",
        sources=["src/mtforge/_kernels.pyx"],
        language="c++",
        extra_compile_args=["-O3", "-std=c++17"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extension_modules(),
    cmdclass={"build_ext": optional_build_ext},
)
