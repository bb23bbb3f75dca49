import os

from setuptools import setup


def extensions():
    # VPFPLAB_NO_EXT=1 or a missing Cython installs the numpy fallback only
    if os.environ.get("VPFPLAB_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "vpfplab._kernels",
        ["src/vpfplab/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
