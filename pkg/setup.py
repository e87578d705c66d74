from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "compactrag._kernels._cosine",
                ["src/compactrag/_kernels/_cosine.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Without Cython the package still works on the pure-Python kernels.
    ext_modules = []

setup(ext_modules=ext_modules)
