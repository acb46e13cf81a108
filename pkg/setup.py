from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the package runs on its pure-Python kernels
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("iscc._kernels", ["src/iscc/_kernels.pyx"], extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
