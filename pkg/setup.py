from setuptools import Extension, setup

# The boolean table kernel has an optional compiled implementation.  The
# package falls back to the pure-Python mirror when the extension is missing,
# so a failed build must not break installation.
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "flatmc._evalcore",
                ["src/flatmc/_evalcore.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
