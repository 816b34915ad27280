"""Build script: compiles the optional binary16 kernel extension.

The package works without the extension (a pure-Python twin is selected
at import time); building it just makes bulk encoding much faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "bsrkit._halfcore",
                ["src/bsrkit/_halfcore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
