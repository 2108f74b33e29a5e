import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    import scipy  # noqa: F401  (cython_blas declarations)
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError as exc:
    print(f"compobs: building without the compiled kernels ({exc})", file=sys.stderr)
else:
    ext_modules = cythonize(
        [
            Extension(
                "compobs._kernels",
                ["src/compobs/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
