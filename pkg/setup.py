from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension("rcsphere._kernel", ["src/rcsphere/_kernel.pyx"], extra_compile_args=["-O3"])

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
