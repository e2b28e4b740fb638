"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so any compilation failure downgrades to a pure install
instead of aborting.
"""

import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "seqlab._ctcore",
                ["src/seqlab/_ctcore.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # noqa: BLE001
    print(f"seqlab: skipping compiled kernels ({exc}); "
          "pure-python fallback will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
