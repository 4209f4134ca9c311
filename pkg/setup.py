from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("usr._ckernels", ["src/usr/_ckernels.pyx"], include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        language_level=3,
    )
except ImportError:
    # no Cython: the package runs on the numpy fallback
    ext_modules = []

setup(ext_modules=ext_modules)
