"""Build script: compiles the optional Cython kernel extension.

The extension is an accelerator, not a requirement. If Cython or a C
compiler is missing the install proceeds and the package falls back to
the NumPy implementations in ``gossipmap._purepy``.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing or broken toolchain
            print(f"warning: building gossipmap._core failed ({exc}); "
                  "falling back to the pure NumPy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not compile {ext.name} ({exc}); "
                  "falling back to the pure NumPy backend")


ext_modules = []
cmdclass = {}
if os.environ.get("GOSSIPMAP_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension(
                "gossipmap._core",
                ["src/gossipmap/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )],
            compiler_directives={"language_level": "3"},
        )
        cmdclass["build_ext"] = optional_build_ext
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass=cmdclass)
