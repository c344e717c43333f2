"""Build script for the compiled simulation kernels.

The extension is optional: if the build fails (no compiler, no Cython) the
package falls back to the pure-Python kernels in qstream.kernels.pykernels.
-ffp-contract=off keeps the compiled kernels bit-identical to the Python
fallback (no FMA contraction of a*b+c).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "qstream.kernels._fast",
                ["src/qstream/kernels/_fast.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
