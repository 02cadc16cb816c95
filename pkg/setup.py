"""Build script for the optional compiled kernel core.

The package is pure Python plus one Cython extension (pum._ckernels) that
accelerates the pairwise kernel/weight evaluation loops.  If Cython or a C
compiler is unavailable the extension is skipped and the numpy fallback is
used at import time.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Skip the extension (instead of failing the install) if it won't build."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing / misconfigured
            print(f"warning: skipping compiled kernels ({exc}); "
                  "pure-python backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); "
                  "pure-python backend will be used")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "pum._ckernels",
        ["src/pum/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
