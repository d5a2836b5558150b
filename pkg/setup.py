"""Build script: compiles the boosted-tree split-scan kernel when Cython and a
C compiler are available; otherwise the package installs with the pure-numpy
fallback kernel selected at import time."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/cellshapes/gbt/_scan_cy.pyx"],
        language_level="3",
        # keep float semantics identical to the numpy kernel: no contraction
        compiler_directives={"boundscheck": False, "wraparound": False,
                             "cdivision": True},
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O2", "-ffp-contract=off"]
except ImportError:
    pass

setup(ext_modules=ext_modules)
