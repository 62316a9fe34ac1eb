"""Builds the optional compiled kernels; installation proceeds without them."""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize([Extension("dgm._ckernels", ["src/dgm/_ckernels.pyx"])],
                            language_level=3, quiet=True)
except ImportError:
    pass

setup(ext_modules=ext_modules)
