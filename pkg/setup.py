"""Builds the optional compiled kernels; the package works without them."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FORMLET_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # no Cython: pure-Python install
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            ["src/formlet/_ckernels.pyx"],
            compiler_directives={"language_level": 3},
            quiet=True,
        )

setup(ext_modules=ext_modules)
