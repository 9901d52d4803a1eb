"""Builds the optional compiled scoring kernel.

The package works without it (a NumPy fallback is selected at import); the
extension just makes per-frontier boundary inference cheap in tight decode
loops.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "geoblock._kernels._profile_cy",
                ["src/geoblock/_kernels/_profile_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
